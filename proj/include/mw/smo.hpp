#pragma once

#include <Eigen/Dense>

namespace mw::models {

struct SmoResult {
    Eigen::VectorXd alpha;
    double b = 0;
};

// Deterministic SMO for the binary SVM dual with per-sample box constraints
// 0 <= alpha_i <= c_per_sample_i. k is the full kernel matrix, ys in {-1,+1}.
SmoResult smo_solve(const Eigen::MatrixXd& k, const Eigen::VectorXd& ys,
                    const Eigen::VectorXd& c_per_sample, double tol = 1e-3);

}  // namespace mw::models
