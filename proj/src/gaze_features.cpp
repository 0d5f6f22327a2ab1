#include "mw/gaze_features.hpp"

#include <algorithm>
#include <cmath>

#include "mw/csv.hpp"
#include "mw/error.hpp"

namespace mw::gaze {

double GazeConfig::deg_per_px() const {
    if (!geometry || geometry->distance_mm <= 0 || geometry->pixel_pitch_mm <= 0) return 0.0;
    return geometry->pixel_pitch_mm / geometry->distance_mm * 57.29577951308232;
}

SpeedUnit GazeConfig::unit() const {
    return deg_per_px() > 0 ? SpeedUnit::deg_per_s : SpeedUnit::px_per_s;
}

double GazeConfig::resolved_threshold() const {
    if (ivt_threshold) return *ivt_threshold;
    return unit() == SpeedUnit::deg_per_s ? 30.0 : 1000.0;
}

KinematicsSeries kinematics(const std::vector<corpus::GazeSample>& samples,
                            const GazeConfig& config) {
    KinematicsSeries series;
    series.unit = config.unit();
    series.total_samples = samples.size();

    // valid points, with invalid ones linearly bridged when the surrounding
    // valid gap is short enough; longer gaps split the series
    struct Point {
        std::int64_t t;
        double x, y;
    };
    std::vector<std::vector<Point>> raw_segments(1);

    std::vector<std::size_t> valid_idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].valid) valid_idx.push_back(i);
    series.valid_samples = valid_idx.size();
    if (valid_idx.size() < 3)
        runtime_error("kinematics needs at least 3 valid samples, got ", valid_idx.size());

    for (std::size_t vi = 0; vi < valid_idx.size(); ++vi) {
        const corpus::GazeSample& cur = samples[valid_idx[vi]];
        if (vi > 0) {
            const corpus::GazeSample& prev = samples[valid_idx[vi - 1]];
            const double gap = static_cast<double>(cur.t - prev.t);
            if (gap > config.bridge_max_gap_ms && valid_idx[vi] != valid_idx[vi - 1] + 1) {
                raw_segments.emplace_back();
            } else if (valid_idx[vi] != valid_idx[vi - 1] + 1) {
                // bridge the skipped invalid samples at their own timestamps
                for (std::size_t j = valid_idx[vi - 1] + 1; j < valid_idx[vi]; ++j) {
                    const double f = static_cast<double>(samples[j].t - prev.t) / gap;
                    raw_segments.back().push_back(
                        {samples[j].t, prev.x + f * (cur.x - prev.x), prev.y + f * (cur.y - prev.y)});
                }
            }
        }
        raw_segments.back().push_back({cur.t, cur.x, cur.y});
    }

    const double scale = series.unit == SpeedUnit::deg_per_s ? config.deg_per_px() : 1.0;
    for (const auto& pts : raw_segments) {
        if (pts.size() < 3) continue;
        KinematicsSegment seg;
        const std::size_t m = pts.size();
        seg.t.reserve(m);
        seg.x.reserve(m);
        seg.y.reserve(m);
        for (const auto& p : pts) {
            seg.t.push_back(p.t);
            seg.x.push_back(p.x);
            seg.y.push_back(p.y);
        }
        seg.speed.resize(m - 1);
        for (std::size_t k = 1; k + 1 < m; ++k) {
            const double dx = pts[k + 1].x - pts[k - 1].x;
            const double dy = pts[k + 1].y - pts[k - 1].y;
            const double dt_s = static_cast<double>(pts[k + 1].t - pts[k - 1].t) / 1000.0;
            seg.speed[k] = std::sqrt(dx * dx + dy * dy) / dt_s * scale;
        }
        seg.speed[0] = seg.speed[1];  // clamp: no central estimate at the first interval
        seg.accel.resize(seg.speed.size() - 1);
        for (std::size_t k = 0; k + 1 < seg.speed.size(); ++k) {
            const double dt_s = static_cast<double>(pts[k + 1].t - pts[k].t) / 1000.0;
            seg.accel[k] = (seg.speed[k + 1] - seg.speed[k]) / dt_s;
        }
        series.segments.push_back(std::move(seg));
    }
    return series;
}

namespace {

struct Run {
    bool fixation;
    std::size_t first;  // interval index range [first, last]
    std::size_t last;
};

GazeEvent make_event(const KinematicsSegment& seg, const Run& run) {
    GazeEvent e;
    e.kind = run.fixation ? GazeEventKind::fixation : GazeEventKind::saccade;
    e.t_start = seg.t[run.first];
    e.t_end = seg.t[run.last + 1];
    // sample-and-hold: the segment's final run holds one interval past the
    // last sample, so a full-window dwell spans the full window duration
    if (run.last + 2 == seg.t.size() && seg.t.size() >= 2)
        e.t_end += seg.t[seg.t.size() - 1] - seg.t[seg.t.size() - 2];
    if (run.fixation) {
        double sx = 0, sy = 0;
        const std::size_t count = run.last + 2 - run.first;
        for (std::size_t i = run.first; i <= run.last + 1; ++i) {
            sx += seg.x[i];
            sy += seg.y[i];
        }
        e.centroid_x = sx / static_cast<double>(count);
        e.centroid_y = sy / static_cast<double>(count);
    } else {
        e.amplitude = std::hypot(seg.x[run.last + 1] - seg.x[run.first],
                                 seg.y[run.last + 1] - seg.y[run.first]);
    }
    return e;
}

}  // namespace

std::vector<GazeEvent> ivt_detect(const KinematicsSeries& series, double threshold,
                                  double min_fixation_ms, const GazeConfig& config) {
    if (!(threshold > 0)) input_error("ivt threshold must be positive, got ", threshold);

    const double merge_dist = series.unit == SpeedUnit::deg_per_s && config.deg_per_px() > 0
                                  ? config.merge_max_dist_deg / config.deg_per_px()
                                  : config.merge_max_dist_px;

    auto centroid = [](const KinematicsSegment& seg, const Run& run, double& cx, double& cy) {
        double sx = 0, sy = 0;
        const std::size_t count = run.last + 2 - run.first;
        for (std::size_t i = run.first; i <= run.last + 1; ++i) {
            sx += seg.x[i];
            sy += seg.y[i];
        }
        cx = sx / static_cast<double>(count);
        cy = sy / static_cast<double>(count);
    };

    std::vector<GazeEvent> events;
    for (const auto& seg : series.segments) {
        // group equal-label intervals into runs
        std::vector<Run> runs;
        for (std::size_t k = 0; k < seg.speed.size(); ++k) {
            const bool fix = seg.speed[k] < threshold;
            if (!runs.empty() && runs.back().fixation == fix)
                runs.back().last = k;
            else
                runs.push_back({fix, k, k});
        }

        // sub-minimum fixations dissolve into adjacent saccades
        std::vector<Run> merged;
        for (const Run& run : runs) {
            bool fix = run.fixation;
            if (fix) {
                const auto dur = seg.t[run.last + 1] - seg.t[run.first];
                if (static_cast<double>(dur) < min_fixation_ms) {
                    if (runs.size() == 1) continue;  // nothing to merge into; drop
                    fix = false;
                }
            }
            if (!merged.empty() && merged.back().fixation == fix)
                merged.back().last = run.last;
            else
                merged.push_back({fix, run.first, run.last});
        }

        // near-coincident fixations across a tiny saccade collapse into one
        std::vector<Run> final_runs;
        for (const Run& run : merged) {
            if (run.fixation && final_runs.size() >= 2 && !final_runs.back().fixation &&
                final_runs[final_runs.size() - 2].fixation) {
                const Run& gap = final_runs.back();
                const Run& prev = final_runs[final_runs.size() - 2];
                const auto gap_ms = seg.t[gap.last + 1] - seg.t[gap.first];
                double ax, ay, bx, by;
                centroid(seg, prev, ax, ay);
                centroid(seg, run, bx, by);
                const double dist = std::hypot(bx - ax, by - ay);
                if (static_cast<double>(gap_ms) < config.merge_max_gap_ms && dist < merge_dist) {
                    Run joined{true, prev.first, run.last};
                    final_runs.pop_back();
                    final_runs.pop_back();
                    final_runs.push_back(joined);
                    continue;
                }
            }
            final_runs.push_back(run);
        }

        for (const Run& run : final_runs) events.push_back(make_event(seg, run));
    }
    return events;
}

FeatureVector gaze_feature_vector(const std::vector<GazeEvent>& events,
                                  const std::vector<corpus::GazeSample>& samples,
                                  const windowing::LabeledWindow& window,
                                  const GazeConfig& config) {
    const double window_s = static_cast<double>(window.t_end - window.t_start) / 1000.0;
    if (!(window_s > 0)) input_error("window duration must be positive");

    FeatureVector out;
    out.values = Eigen::VectorXd::Zero(7);

    std::size_t invalid = 0;
    for (const auto& s : samples)
        if (!s.valid) ++invalid;
    out.values[6] =
        samples.empty() ? 0.0 : static_cast<double>(invalid) / static_cast<double>(samples.size());

    std::vector<double> fix_durations;
    std::vector<double> sac_amplitudes;
    for (const auto& e : events) {
        if (e.kind == GazeEventKind::fixation)
            fix_durations.push_back(static_cast<double>(e.duration_ms()));
        else
            sac_amplitudes.push_back(e.amplitude);
    }

    double mean_speed = 0;
    std::size_t speed_count = 0;
    bool have_kinematics = false;
    try {
        const KinematicsSeries series = kinematics(samples, config);
        for (const auto& seg : series.segments)
            for (double v : seg.speed) {
                mean_speed += v;
                ++speed_count;
            }
        have_kinematics = speed_count > 0;
    } catch (const Error&) {
        have_kinematics = false;
    }

    if (events.empty() || !have_kinematics) out.degraded = true;

    if (!fix_durations.empty()) {
        out.values[0] = static_cast<double>(fix_durations.size()) / window_s;
        double mean = 0;
        for (double d : fix_durations) mean += d;
        mean /= static_cast<double>(fix_durations.size());
        out.values[1] = mean;
        if (fix_durations.size() > 1) {
            double ss = 0;
            for (double d : fix_durations) ss += (d - mean) * (d - mean);
            out.values[2] = std::sqrt(ss / static_cast<double>(fix_durations.size() - 1));
        }
    }
    if (!sac_amplitudes.empty()) {
        out.values[3] = static_cast<double>(sac_amplitudes.size()) / window_s;
        double mean = 0;
        for (double a : sac_amplitudes) mean += a;
        out.values[4] = mean / static_cast<double>(sac_amplitudes.size());
    }
    if (have_kinematics) out.values[5] = mean_speed / static_cast<double>(speed_count);
    return out;
}

FeatureVector extract_window_features(const std::vector<corpus::GazeSample>& samples,
                                      const windowing::LabeledWindow& window,
                                      const GazeConfig& config) {
    std::vector<corpus::GazeSample> in_window;
    for (const auto& s : samples)
        if (s.t >= window.t_start && s.t < window.t_end) in_window.push_back(s);

    std::vector<GazeEvent> events;
    try {
        const KinematicsSeries series = kinematics(in_window, config);
        events = ivt_detect(series, config.resolved_threshold(), config.min_fixation_ms, config);
    } catch (const Error&) {
        // not enough valid signal: all-zero vector with the quality flag set
    }
    return gaze_feature_vector(events, in_window, window, config);
}

void write_event_dump(const std::string& path, const std::vector<GazeEvent>& events) {
    CsvTable table;
    table.header = {"kind", "t_start_ms", "t_end_ms", "amplitude"};
    for (const auto& e : events)
        table.rows.push_back({e.kind == GazeEventKind::fixation ? "fixation" : "saccade",
                              std::to_string(e.t_start), std::to_string(e.t_end),
                              format_double(e.amplitude)});
    write_csv(path, table);
}

}  // namespace mw::gaze
