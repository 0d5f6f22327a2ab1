#include "mw/federated.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mw/csv.hpp"
#include "mw/error.hpp"
#include "mw/evaluation.hpp"
#include "mw/rng.hpp"
#include "mw/smo.hpp"

namespace mw::fed {

const char* to_string(Strategy s) { return s == Strategy::fedavg ? "fedavg" : "turbosvm"; }

Strategy strategy_from_string(const std::string& s) {
    if (s == "fedavg") return Strategy::fedavg;
    if (s == "turbosvm") return Strategy::turbosvm;
    input_error("unknown federated strategy '", s, "'");
}

std::vector<ClientShard> partition_by_participant(const FeatureMatrix& train) {
    if (train.rows() == 0) input_error("partition_by_participant: empty training set");

    std::map<std::string, std::vector<Eigen::Index>> groups;
    for (Eigen::Index i = 0; i < train.rows(); ++i)
        groups[train.participants[static_cast<std::size_t>(i)]].push_back(i);

    std::vector<ClientShard> shards;
    for (const auto& [participant, rows] : groups) {
        ClientShard shard;
        shard.participant = participant;
        shard.x.resize(static_cast<Eigen::Index>(rows.size()), train.cols());
        shard.y.reserve(rows.size());
        Eigen::Index at = 0;
        for (Eigen::Index r : rows) {
            shard.x.row(at++) = train.x.row(r);
            shard.y.push_back(train.labels[static_cast<std::size_t>(r)]);
        }
        shards.push_back(std::move(shard));
    }
    return shards;
}

Eigen::VectorXd fedavg_aggregate(const std::vector<ClientUpdate>& updates) {
    if (updates.empty()) input_error("fedavg_aggregate: no updates");
    const Eigen::Index dim = updates.front().params.size();
    double total = 0;
    for (const auto& u : updates) {
        if (u.params.size() != dim)
            input_error("fedavg_aggregate: parameter shape mismatch (", u.params.size(), " vs ",
                        dim, ")");
        total += u.count;
    }
    if (total <= 0) input_error("fedavg_aggregate: zero total count");

    // canonical summation order makes the reduction permutation invariant
    std::vector<std::size_t> order(updates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&updates](std::size_t a, std::size_t b) {
        if (updates[a].count != updates[b].count) return updates[a].count < updates[b].count;
        const Eigen::VectorXd& pa = updates[a].params;
        const Eigen::VectorXd& pb = updates[b].params;
        for (Eigen::Index i = 0; i < pa.size(); ++i)
            if (pa[i] != pb[i]) return pa[i] < pb[i];
        return false;
    });

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (std::size_t i : order) mean += (updates[i].count / total) * updates[i].params;
    return mean;
}

namespace {

// gradient step on hinge(class separation) - log distance between class rows
void spreadout_head_step(Eigen::MatrixXd& w_out, const std::vector<ClientEmbedding>& embeddings,
                         double logits_lr) {
    if (logits_lr == 0.0) return;
    const Eigen::Index width = w_out.cols();
    Eigen::VectorXd diff = (w_out.row(1) - w_out.row(0)).transpose();

    Eigen::VectorXd grad_diff = Eigen::VectorXd::Zero(width);
    double active = 0;
    double pairs = 0;
    for (const auto& e : embeddings) {
        if (!e.has0 || !e.has1) continue;
        pairs += 2;
        const double s0 = diff.dot(e.class0);  // label -1
        const double s1 = diff.dot(e.class1);  // label +1
        if (1.0 + s0 > 0) {
            grad_diff += e.class0;
            active += 1;
        }
        if (1.0 - s1 > 0) {
            grad_diff -= e.class1;
            active += 1;
        }
    }
    if (pairs > 0) grad_diff /= pairs;

    const double dist2 = diff.squaredNorm();
    if (dist2 > 1e-24) grad_diff -= diff / dist2;  // d/d(diff) of -log ||diff||

    // rows move in opposite directions through diff = w1 - w0
    w_out.row(1) -= (logits_lr * grad_diff).transpose();
    w_out.row(0) += (logits_lr * grad_diff).transpose();
}

}  // namespace

Eigen::VectorXd turbosvm_aggregate(const std::vector<ClientUpdate>& updates,
                                   const std::vector<ClientEmbedding>& embeddings,
                                   const Eigen::VectorXd& prev_global,
                                   const models::MlpArchitecture& arch, const RoundConfig& cfg,
                                   bool* fell_back) {
    if (updates.size() != embeddings.size())
        input_error("turbosvm_aggregate: updates and embeddings differ in length");
    if (fell_back) *fell_back = false;

    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < embeddings.size(); ++i)
        if (embeddings[i].has0 && embeddings[i].has1) eligible.push_back(i);

    auto fallback = [&]() {
        if (fell_back) *fell_back = true;
        return fedavg_aggregate(updates);
    };
    if (eligible.size() < 2) return fallback();

    // degenerate: every reported embedding identical
    bool all_same = true;
    const Eigen::VectorXd& ref0 = embeddings[eligible.front()].class0;
    for (std::size_t i : eligible) {
        if ((embeddings[i].class0 - ref0).cwiseAbs().maxCoeff() != 0.0 ||
            (embeddings[i].class1 - ref0).cwiseAbs().maxCoeff() != 0.0)
            all_same = false;
    }
    if (all_same) return fallback();

    // max-margin separator over the client class-embedding pairs
    const Eigen::Index width = ref0.size();
    const auto n_points = static_cast<Eigen::Index>(2 * eligible.size());
    Eigen::MatrixXd points(n_points, width);
    Eigen::VectorXd ys(n_points);
    for (std::size_t j = 0; j < eligible.size(); ++j) {
        points.row(static_cast<Eigen::Index>(2 * j)) = embeddings[eligible[j]].class0.transpose();
        ys[static_cast<Eigen::Index>(2 * j)] = -1.0;
        points.row(static_cast<Eigen::Index>(2 * j + 1)) =
            embeddings[eligible[j]].class1.transpose();
        ys[static_cast<Eigen::Index>(2 * j + 1)] = 1.0;
    }
    const Eigen::MatrixXd kernel = points * points.transpose();
    const Eigen::VectorXd box = Eigen::VectorXd::Constant(n_points, 1e6);
    const models::SmoResult sol = models::smo_solve(kernel, ys, box, 1e-6);

    double total_count = 0;
    for (const auto& u : updates) total_count += u.count;

    // support-vector coefficient mass per client, FedAvg weight as the floor
    double mass_total = 0;
    std::vector<double> mass(updates.size(), 0.0);
    for (std::size_t j = 0; j < eligible.size(); ++j) {
        mass[eligible[j]] = sol.alpha[static_cast<Eigen::Index>(2 * j)] +
                            sol.alpha[static_cast<Eigen::Index>(2 * j + 1)];
        mass_total += mass[eligible[j]];
    }
    if (mass_total <= 0) return fallback();

    std::vector<double> weight(updates.size(), 0.0);
    double weight_sum = 0;
    for (std::size_t i = 0; i < updates.size(); ++i) {
        const double fedavg_w = updates[i].count / total_count;
        weight[i] = std::max(mass[i] / mass_total, fedavg_w);
        weight_sum += weight[i];
    }

    const Eigen::Index dim = updates.front().params.size();
    Eigen::VectorXd agg = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < updates.size(); ++i)
        agg += (weight[i] / weight_sum) * updates[i].params;

    // body step from the previous global
    Eigen::VectorXd next = prev_global + cfg.server_lr * (agg - prev_global);

    // class-row update on the aggregated head
    models::MlpParams p = models::mlp_init(arch, 0);
    p.unflatten(next);
    std::vector<ClientEmbedding> eligible_embeddings;
    for (std::size_t i : eligible) eligible_embeddings.push_back(embeddings[i]);
    spreadout_head_step(p.w_out, eligible_embeddings, cfg.logits_lr);
    return p.flatten();
}

ClientUpdate local_update(const models::MlpArchitecture& arch, const Eigen::VectorXd& global,
                          const ClientShard& shard, const RoundConfig& cfg, int round_index,
                          std::size_t client_index) {
    if (!global.allFinite()) runtime_error("local_update: non-finite global parameters");

    models::MlpParams params = models::mlp_init(arch, 0);
    params.unflatten(global);

    models::MlpTrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = cfg.batch_size;
    tc.stream_seed = mix_seed(cfg.seed, client_index);
    tc.use_dropout = true;

    for (int e = 0; e < cfg.local_epochs; ++e) {
        const double loss = models::mlp_run_epoch(arch, params, shard.x, shard.y, tc,
                                                  round_index * cfg.local_epochs + e);
        if (!std::isfinite(loss))
            runtime_error("local_update: non-finite loss in round ", round_index);
    }
    return {params.flatten(), shard.count()};
}

FederatedResult run_federated(const FeatureMatrix& train, const FeatureMatrix& val,
                              const RoundConfig& cfg, Strategy strategy,
                              const models::HyperParams& mlp_params) {
    if (train.rows() == 0) input_error("run_federated: empty training set");
    if (val.rows() == 0) input_error("run_federated: validation set required");

    models::TrainedModel model;
    model.family = models::Family::mlp;
    model.hyperparams = mlp_params;
    model.seed = cfg.seed;
    model.input_dim = train.cols();
    model.selected.resize(static_cast<std::size_t>(train.cols()));
    std::iota(model.selected.begin(), model.selected.end(), 0);
    model.standardizer.fit(train.x);

    FeatureMatrix train_std = train;
    train_std.x = model.standardizer.apply(train.x);
    const Eigen::MatrixXd val_x = model.standardizer.apply(val.x);

    const auto shards = partition_by_participant(train_std);
    const auto arch = models::MlpArchitecture::for_dim(
        static_cast<int>(train.cols()),
        static_cast<int>(models::num_param(mlp_params, "hidden_width", 64)));

    models::MlpParams params = models::mlp_init(arch, cfg.seed);
    Eigen::VectorXd global = params.flatten();
    Eigen::VectorXd best = global;
    double best_loss = models::mlp_eval_loss(arch, params, val_x, val.labels);
    int best_round = -1;
    int stale = 0;

    FederatedResult result;
    const auto n_clients = shards.size();
    const auto per_round =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(
                                     cfg.client_fraction * static_cast<double>(n_clients))));

    for (int round = 0; round < cfg.rounds; ++round) {
        // seeded without-replacement client draw, processed in index order
        std::vector<std::size_t> pool(n_clients);
        std::iota(pool.begin(), pool.end(), 0);
        Rng rng(mix_seed(cfg.seed, 0xc0ULL + static_cast<std::uint64_t>(round)));
        rng.shuffle(pool);
        pool.resize(std::min(per_round, n_clients));
        std::sort(pool.begin(), pool.end());

        std::vector<ClientUpdate> updates;
        std::vector<ClientEmbedding> embeddings;
        for (std::size_t idx : pool) {
            updates.push_back(local_update(arch, global, shards[idx], cfg, round, idx));
            if (strategy == Strategy::turbosvm) {
                models::MlpParams cp = models::mlp_init(arch, 0);
                cp.unflatten(updates.back().params);
                ClientEmbedding e;
                const Eigen::MatrixXd em = models::mlp_class_embeddings(
                    arch, cp, shards[idx].x, shards[idx].y, e.has0, e.has1);
                e.class0 = em.row(0).transpose();
                e.class1 = em.row(1).transpose();
                embeddings.push_back(std::move(e));
            }
        }

        global = strategy == Strategy::fedavg
                     ? fedavg_aggregate(updates)
                     : turbosvm_aggregate(updates, embeddings, global, arch, cfg);

        params.unflatten(global);
        const double vloss = models::mlp_eval_loss(arch, params, val_x, val.labels);
        const Eigen::VectorXd scores = models::mlp_scores(arch, params, val_x);
        std::vector<int> pred(static_cast<std::size_t>(scores.size()));
        for (Eigen::Index i = 0; i < scores.size(); ++i)
            pred[static_cast<std::size_t>(i)] = scores[i] >= 0.5 ? 1 : 0;
        const double vf1 = eval::confusion_metrics(val.labels, pred).f1;
        result.log.push_back(
            {round, to_string(strategy), static_cast<int>(pool.size()), vloss, vf1});

        if (vloss < best_loss) {
            best_loss = vloss;
            best = global;
            best_round = round;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }

    result.final_params = global;
    result.best_round = best_round;
    params.unflatten(best);
    model.payload = models::MlpModel{arch, params};
    result.model = std::move(model);
    return result;
}

void write_round_log(const std::string& path, const std::vector<RoundLog>& log) {
    CsvTable table;
    table.header = {"round", "strategy", "selected_clients", "val_loss", "val_f1"};
    for (const auto& entry : log)
        table.rows.push_back({std::to_string(entry.round), entry.strategy,
                              std::to_string(entry.selected_clients),
                              format_double(entry.val_loss), format_double(entry.val_f1)});
    write_csv(path, table);
}

}  // namespace mw::fed
