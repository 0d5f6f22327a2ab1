#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace mw::models {

// Hidden-layer count follows feature dimensionality: <=16 -> 1, 17..64 -> 2,
// >=65 -> 3. Each hidden block is linear -> batch norm -> ReLU -> dropout; the
// head is a 2-unit softmax.
struct MlpArchitecture {
    int input_dim = 0;
    int hidden_layers = 1;
    int hidden_width = 64;
    double dropout = 0.1;
    bool batch_norm = true;

    static MlpArchitecture for_dim(int input_dim, int hidden_width = 64);
};

struct MlpParams {
    std::vector<Eigen::MatrixXd> w;      // hidden weights, width x fan_in
    std::vector<Eigen::VectorXd> b;      // hidden biases
    std::vector<Eigen::VectorXd> gamma;  // batch-norm scale
    std::vector<Eigen::VectorXd> beta;   // batch-norm shift
    std::vector<Eigen::VectorXd> run_mean;
    std::vector<Eigen::VectorXd> run_var;
    Eigen::MatrixXd w_out;  // 2 x width
    Eigen::VectorXd b_out;  // 2

    // full state incl. batch-norm running stats (aggregation operates on this)
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& flat);

    // trainable subset only (gradient checks and SGD updates)
    Eigen::VectorXd flatten_trainable() const;
    void add_scaled_trainable(const Eigen::VectorXd& direction, double scale);
};

struct MlpTrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 8;
    std::uint64_t stream_seed = 0;  // per-client stream; epoch index is mixed in per epoch
    bool use_dropout = true;
};

MlpParams mlp_init(const MlpArchitecture& arch, std::uint64_t seed);

// mean softmax cross-entropy; training mode (batch statistics), dropout off
double mlp_batch_loss(const MlpArchitecture& arch, const MlpParams& params,
                      const Eigen::MatrixXd& x, const std::vector<int>& y);

// exact gradient of mlp_batch_loss in the flatten_trainable layout
Eigen::VectorXd mlp_gradient(const MlpArchitecture& arch, const MlpParams& params,
                             const Eigen::MatrixXd& x, const std::vector<int>& y);

// one seeded epoch of mini-batch SGD in place; returns mean training loss.
// epoch_index drives shuffling and dropout so a run is reproducible from
// (stream_seed, epoch_index) alone.
double mlp_run_epoch(const MlpArchitecture& arch, MlpParams& params, const Eigen::MatrixXd& x,
                     const std::vector<int>& y, const MlpTrainConfig& cfg, int epoch_index);

// inference mode: running statistics, no dropout
Eigen::VectorXd mlp_scores(const MlpArchitecture& arch, const MlpParams& params,
                           const Eigen::MatrixXd& x);
double mlp_eval_loss(const MlpArchitecture& arch, const MlpParams& params,
                     const Eigen::MatrixXd& x, const std::vector<int>& y);

// per-class mean of the last hidden layer's pre-activation outputs; row 0 for
// class 0, row 1 for class 1 (used by embedding-based server aggregation)
Eigen::MatrixXd mlp_class_embeddings(const MlpArchitecture& arch, const MlpParams& params,
                                     const Eigen::MatrixXd& x, const std::vector<int>& y,
                                     bool& has_class0, bool& has_class1);

}  // namespace mw::models
