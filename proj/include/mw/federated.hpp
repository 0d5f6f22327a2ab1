#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mw/model_zoo.hpp"
#include "mw/types.hpp"

namespace mw::fed {

// One client per participant.
struct ClientShard {
    std::string participant;
    Eigen::MatrixXd x;
    std::vector<int> y;

    double count() const { return static_cast<double>(x.rows()); }
};

struct RoundConfig {
    int rounds = 20;
    double client_fraction = 1.0;  // {0.5, 1.0}
    int local_epochs = 5;          // {5, 15}
    int batch_size = 8;            // {4, 8, 16}
    double learning_rate = 1e-3;   // {1e-2, 1e-3, 1e-4}
    double server_lr = 1.0;        // TurboSVM server step toward the aggregate
    double logits_lr = 1e-4;       // TurboSVM head update {1e-3, 1e-4, 1e-5}
    int patience = 10;             // rounds without validation improvement
    std::uint64_t seed = 0;
};

enum class Strategy { fedavg, turbosvm };
const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

// Shards in sorted participant order; union equals the input, no overlaps.
std::vector<ClientShard> partition_by_participant(const FeatureMatrix& train);

struct ClientUpdate {
    Eigen::VectorXd params;  // flattened MLP state
    double count = 0;
};

// Class-wise mean of last hidden pre-activation outputs on the client's shard.
struct ClientEmbedding {
    Eigen::VectorXd class0;
    Eigen::VectorXd class1;
    bool has0 = false;
    bool has1 = false;
};

// count-weighted mean, summed in a canonical order so the result is exactly
// permutation invariant
Eigen::VectorXd fedavg_aggregate(const std::vector<ClientUpdate>& updates);

// Max-margin reweighting over client class embeddings with a spreadout head
// update; falls back to exact FedAvg when embeddings are degenerate or fewer
// than 2 clients carry both classes.
Eigen::VectorXd turbosvm_aggregate(const std::vector<ClientUpdate>& updates,
                                   const std::vector<ClientEmbedding>& embeddings,
                                   const Eigen::VectorXd& prev_global,
                                   const models::MlpArchitecture& arch, const RoundConfig& cfg,
                                   bool* fell_back = nullptr);

// local_epochs passes of seeded mini-batch SGD from the global parameters.
// client_index pins the client's RNG stream; round_index advances the epoch
// schedule so one client over R rounds replays centralized training exactly.
ClientUpdate local_update(const models::MlpArchitecture& arch, const Eigen::VectorXd& global,
                          const ClientShard& shard, const RoundConfig& cfg, int round_index,
                          std::size_t client_index);

struct RoundLog {
    int round = 0;
    std::string strategy;
    int selected_clients = 0;
    double val_loss = 0;
    double val_f1 = 0;
};

struct FederatedResult {
    models::TrainedModel model;      // best-round global as an mlp-family model
    Eigen::VectorXd final_params;    // last-round global (flattened)
    std::vector<RoundLog> log;
    int best_round = -1;
};

FederatedResult run_federated(const FeatureMatrix& train, const FeatureMatrix& val,
                              const RoundConfig& cfg, Strategy strategy,
                              const models::HyperParams& mlp_params = {});

void write_round_log(const std::string& path, const std::vector<RoundLog>& log);

}  // namespace mw::fed
