#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mw/corpus.hpp"
#include "mw/types.hpp"

namespace mw::eeg {

struct BandSpec {
    std::string name;  // delta, theta, alpha, beta
    double lo_hz = 0;
    double hi_hz = 0;
};

// delta (1-4), theta (4-8), alpha (8-13), beta (13-30)
std::vector<BandSpec> standard_bands();
BandSpec band_by_name(const std::string& name);

// Symmetric positive-definite matrix; construction paths verify symmetry to
// 1e-10 and strictly positive eigenvalues.
struct SpdMatrix {
    Eigen::MatrixXd m;

    Eigen::Index size() const { return m.rows(); }
};

SpdMatrix make_spd(const Eigen::MatrixXd& m);  // validates invariants

// Zero-phase (forward-backward) order-4 Butterworth band-pass per channel.
corpus::EegEpoch band_decompose(const corpus::EegEpoch& epoch, const BandSpec& band);

// Mean-centered sample covariance X X^T/(T-1) with trace-normalized shrinkage
// (1-lambda) C + lambda (tr C / n) I.
SpdMatrix spatial_covariance(const corpus::EegEpoch& epoch, double shrinkage);

// Riemannian (affine-invariant) barycenter via fixed-point iteration from the
// arithmetic mean; converged when the tangent-mean Frobenius norm drops under tol.
SpdMatrix karcher_mean(const std::vector<SpdMatrix>& matrices, double tol = 1e-6,
                       int max_iter = 50);

// Isometric tangent-space coordinates at ref: vectorized upper triangle of
// log(ref^{-1/2} C ref^{-1/2}) with off-diagonals scaled by sqrt(2).
Eigen::VectorXd tangent_project(const SpdMatrix& c, const SpdMatrix& ref);

// ||log(r^{-1/2} c r^{-1/2})||_F
double riemannian_distance(const SpdMatrix& c, const SpdMatrix& r);

// Per-band decompose -> covariance -> tangent coordinates, concatenated in
// band order. refs must come from training windows only.
Eigen::VectorXd eeg_feature_vector(const corpus::EegEpoch& epoch,
                                   const std::vector<BandSpec>& bands,
                                   const std::vector<SpdMatrix>& refs, double shrinkage);

// matrix functions used by the pipeline (eigendecomposition based, inputs symmetrized)
Eigen::MatrixXd spd_log(const Eigen::MatrixXd& a);
Eigen::MatrixXd spd_exp(const Eigen::MatrixXd& a);   // matrix exp of a symmetric matrix
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& a);
Eigen::MatrixXd spd_inv_sqrt(const Eigen::MatrixXd& a);

}  // namespace mw::eeg
