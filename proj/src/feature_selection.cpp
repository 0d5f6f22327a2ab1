#include "mw/feature_selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mw/error.hpp"

namespace mw::select {

ScoreMethod method_from_string(const std::string& s) {
    if (s == "anova_f") return ScoreMethod::anova_f;
    if (s == "mutual_info") return ScoreMethod::mutual_info;
    input_error("unknown feature scoring method '", s, "'");
}

const char* to_string(ScoreMethod m) {
    return m == ScoreMethod::anova_f ? "anova_f" : "mutual_info";
}

namespace {

constexpr double kInfSentinel = 1e12;

void check_labels(const Eigen::MatrixXd& x, const std::vector<int>& y, std::size_t min_per_class) {
    if (x.rows() == 0) input_error("feature scoring: empty input");
    if (static_cast<std::size_t>(x.rows()) != y.size())
        input_error("feature scoring: ", x.rows(), " rows but ", y.size(), " labels");
    std::size_t pos = 0;
    for (int v : y) pos += v == 1 ? 1 : 0;
    const std::size_t neg = y.size() - pos;
    if (pos < min_per_class || neg < min_per_class)
        input_error("feature scoring needs both classes with at least ", min_per_class,
                    " samples (got ", pos, " positive, ", neg, " negative)");
}

}  // namespace

FeatureScores anova_f(const Eigen::MatrixXd& x, const std::vector<int>& y) {
    check_labels(x, y, 2);
    const Eigen::Index d = x.cols();
    const Eigen::Index n = x.rows();

    FeatureScores out;
    out.method = ScoreMethod::anova_f;
    out.scores = Eigen::VectorXd::Zero(d);

    std::vector<Eigen::Index> group[2];
    for (Eigen::Index i = 0; i < n; ++i) group[y[static_cast<std::size_t>(i)] == 1].push_back(i);

    for (Eigen::Index f = 0; f < d; ++f) {
        const double grand = x.col(f).mean();
        double ssb = 0, ssw = 0;
        for (int g = 0; g < 2; ++g) {
            double mean = 0;
            for (Eigen::Index i : group[g]) mean += x(i, f);
            mean /= static_cast<double>(group[g].size());
            ssb += static_cast<double>(group[g].size()) * (mean - grand) * (mean - grand);
            for (Eigen::Index i : group[g]) ssw += (x(i, f) - mean) * (x(i, f) - mean);
        }
        const double df_within = static_cast<double>(n - 2);
        if (ssw <= 0) {
            // zero within-group variance: 0/0 counts as no signal, otherwise sentinel
            out.scores[f] = ssb > 0 ? kInfSentinel : 0.0;
            out.flagged = true;
        } else {
            out.scores[f] = ssb / (ssw / df_within);
        }
    }
    return out;
}

FeatureScores mutual_info(const Eigen::MatrixXd& x, const std::vector<int>& y, int bins) {
    if (bins < 2) input_error("mutual_info needs at least 2 bins, got ", bins);
    check_labels(x, y, 1);
    const Eigen::Index d = x.cols();
    const Eigen::Index n = x.rows();

    FeatureScores out;
    out.method = ScoreMethod::mutual_info;
    out.scores = Eigen::VectorXd::Zero(d);

    std::vector<double> joint(static_cast<std::size_t>(bins) * 2);
    for (Eigen::Index f = 0; f < d; ++f) {
        const double lo = x.col(f).minCoeff();
        const double hi = x.col(f).maxCoeff();
        if (!(hi > lo)) {
            out.flagged = true;  // constant feature: MI 0 by convention
            continue;
        }
        std::fill(joint.begin(), joint.end(), 0.0);
        const double width = (hi - lo) / static_cast<double>(bins);
        for (Eigen::Index i = 0; i < n; ++i) {
            int b = static_cast<int>((x(i, f) - lo) / width);
            b = std::clamp(b, 0, bins - 1);
            const int c = y[static_cast<std::size_t>(i)] == 1 ? 1 : 0;
            joint[static_cast<std::size_t>(b) * 2 + c] += 1.0 / static_cast<double>(n);
        }
        double p_c[2] = {0, 0};
        for (int b = 0; b < bins; ++b)
            for (int c = 0; c < 2; ++c) p_c[c] += joint[static_cast<std::size_t>(b) * 2 + c];
        double mi = 0;
        for (int b = 0; b < bins; ++b) {
            const double p_b = joint[static_cast<std::size_t>(b) * 2] +
                               joint[static_cast<std::size_t>(b) * 2 + 1];
            if (p_b <= 0) continue;
            for (int c = 0; c < 2; ++c) {
                const double p = joint[static_cast<std::size_t>(b) * 2 + c];
                if (p > 0) mi += p * std::log(p / (p_b * p_c[c]));
            }
        }
        if (mi < 0) {
            mi = 0;
            out.flagged = true;
        }
        out.scores[f] = mi;
    }
    return out;
}

std::vector<Eigen::Index> select_top_k(const FeatureScores& scores, Eigen::Index k) {
    const Eigen::Index d = scores.scores.size();
    if (k < 1 || k > d) input_error("select_top_k: k=", k, " out of range [1, ", d, "]");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&scores](Eigen::Index a, Eigen::Index b) {
        return scores.scores[a] > scores.scores[b];  // stable: ties keep lower index first
    });
    order.resize(static_cast<std::size_t>(k));
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace mw::select
