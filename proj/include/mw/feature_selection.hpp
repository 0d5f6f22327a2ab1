#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mw/types.hpp"

namespace mw::select {

enum class ScoreMethod { anova_f, mutual_info };

ScoreMethod method_from_string(const std::string& s);
const char* to_string(ScoreMethod m);

struct FeatureScores {
    Eigen::VectorXd scores;
    ScoreMethod method = ScoreMethod::anova_f;
    bool flagged = false;  // degenerate columns (0/0 -> 0, +inf -> sentinel, clamped MI)
};

// One-way ANOVA F statistic per feature, two groups.
FeatureScores anova_f(const Eigen::MatrixXd& x, const std::vector<int>& y);

// Plug-in mutual information (nats) after equal-width discretization over the
// training range.
FeatureScores mutual_info(const Eigen::MatrixXd& x, const std::vector<int>& y, int bins = 10);

// Indices of the k largest scores; ties break toward the lower index; result
// sorted ascending.
std::vector<Eigen::Index> select_top_k(const FeatureScores& scores, Eigen::Index k);

}  // namespace mw::select
