#include "mw/frame_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mw/error.hpp"

namespace mw::frames {

Stat stat_from_string(const std::string& s) {
    if (s == "mean") return Stat::mean;
    if (s == "sd") return Stat::sd;
    if (s == "min") return Stat::min;
    if (s == "max") return Stat::max;
    if (s == "slope") return Stat::slope;
    input_error("unknown aggregation stat '", s, "'");
}

const char* to_string(Stat s) {
    switch (s) {
        case Stat::mean: return "mean";
        case Stat::sd: return "sd";
        case Stat::min: return "min";
        case Stat::max: return "max";
        case Stat::slope: return "slope";
    }
    return "?";
}

namespace {

corpus::FrameFeatureTable take_rows(const corpus::FrameFeatureTable& table,
                                    const std::vector<Eigen::Index>& rows) {
    corpus::FrameFeatureTable out;
    out.columns = table.columns;
    out.retained_fraction = table.retained_fraction;
    out.t.reserve(rows.size());
    out.confidence.reserve(rows.size());
    out.values.resize(static_cast<Eigen::Index>(rows.size()), table.values.cols());
    Eigen::Index at = 0;
    for (Eigen::Index r : rows) {
        out.t.push_back(table.t[static_cast<std::size_t>(r)]);
        out.confidence.push_back(table.confidence[static_cast<std::size_t>(r)]);
        out.values.row(at++) = table.values.row(r);
    }
    return out;
}

}  // namespace

corpus::FrameFeatureTable filter_rows(const corpus::FrameFeatureTable& table,
                                      double confidence_min) {
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < table.row_count(); ++i)
        if (table.confidence[i] >= confidence_min) keep.push_back(static_cast<Eigen::Index>(i));
    corpus::FrameFeatureTable out = take_rows(table, keep);
    out.retained_fraction = table.row_count() == 0
                                ? 0.0
                                : static_cast<double>(keep.size()) /
                                      static_cast<double>(table.row_count());
    return out;
}

corpus::FrameFeatureTable downsample_rows(const corpus::FrameFeatureTable& table,
                                          double target_hz, std::int64_t window_start_ms,
                                          double window_duration_s, double source_hz) {
    if (!(target_hz > 0)) input_error("downsample target rate must be positive");
    if (target_hz > source_hz)
        input_error("downsample target ", target_hz, " Hz exceeds source rate ", source_hz, " Hz");

    const auto rows = static_cast<std::size_t>(std::floor(window_duration_s * target_hz));
    std::vector<Eigen::Index> picks;
    if (!table.t.empty()) {
        const double step_ms = 1000.0 / target_hz;
        for (std::size_t k = 0; k < rows; ++k) {
            const double target_t =
                static_cast<double>(window_start_ms) + step_ms * static_cast<double>(k);
            // nearest timestamp; ties resolve to the earlier row
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < table.t.size(); ++i) {
                const double d = std::abs(static_cast<double>(table.t[i]) - target_t);
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            picks.push_back(static_cast<Eigen::Index>(best));
        }
    }
    return take_rows(table, picks);
}

FeatureVector aggregate_window(const corpus::FrameFeatureTable& table,
                               const windowing::LabeledWindow& window,
                               const AggregationSpec& spec) {
    if (spec.stats.empty()) input_error("aggregate_window: empty stat list");
    const Eigen::Index cols = table.values.cols();
    const Eigen::Index width = cols * static_cast<Eigen::Index>(spec.stats.size());

    FeatureVector out;
    out.values = Eigen::VectorXd::Zero(width);
    const Eigen::Index n = table.values.rows();
    if (n == 0) {
        out.degraded = true;
        return out;
    }
    if (n == 1) out.degraded = true;  // sd/slope fall back to 0

    // time in seconds relative to the window start, for slope
    Eigen::VectorXd ts(n);
    for (Eigen::Index i = 0; i < n; ++i)
        ts[i] = static_cast<double>(table.t[static_cast<std::size_t>(i)] - window.t_start) / 1000.0;
    const double t_mean = ts.mean();
    const double t_var = (ts.array() - t_mean).square().sum();

    Eigen::Index at = 0;
    for (Eigen::Index c = 0; c < cols; ++c) {
        const Eigen::VectorXd col = table.values.col(c);
        const double mean = col.mean();
        for (Stat s : spec.stats) {
            double v = 0;
            switch (s) {
                case Stat::mean: v = mean; break;
                case Stat::sd:
                    v = n > 1 ? std::sqrt((col.array() - mean).square().sum() /
                                          static_cast<double>(n - 1))
                              : 0.0;
                    break;
                case Stat::min: v = col.minCoeff(); break;
                case Stat::max: v = col.maxCoeff(); break;
                case Stat::slope:
                    v = t_var > 0 ? ((ts.array() - t_mean) * (col.array() - mean)).sum() / t_var
                                  : 0.0;
                    break;
            }
            out.values[at++] = v;
        }
    }
    return out;
}

FeatureVector extract_window_features(const corpus::FrameFeatureTable& table,
                                      const windowing::LabeledWindow& window,
                                      const AggregationSpec& spec, double source_hz) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < table.row_count(); ++i)
        if (table.t[i] >= window.t_start && table.t[i] < window.t_end)
            rows.push_back(static_cast<Eigen::Index>(i));
    corpus::FrameFeatureTable sliced = take_rows(table, rows);
    sliced = filter_rows(sliced, spec.confidence_min);
    const double window_s = static_cast<double>(window.t_end - window.t_start) / 1000.0;
    if (spec.target_hz < source_hz)
        sliced = downsample_rows(sliced, spec.target_hz, window.t_start, window_s, source_hz);
    return aggregate_window(sliced, window, spec);
}

}  // namespace mw::frames
