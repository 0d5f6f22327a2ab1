#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mw/error.hpp"
#include "mw/federated.hpp"
#include "mw/rng.hpp"

using namespace mw;
using fed::ClientEmbedding;
using fed::ClientShard;
using fed::ClientUpdate;
using fed::RoundConfig;

namespace {

FeatureMatrix matrix_of(const std::vector<std::string>& participants,
                        const std::vector<int>& labels, std::uint64_t seed, int dim = 4) {
    Rng rng(seed);
    FeatureMatrix m;
    m.participants = participants;
    m.labels = labels;
    m.provenance.assign(labels.size(), Provenance::pre_probe);
    m.x.resize(static_cast<Eigen::Index>(labels.size()), dim);
    for (Eigen::Index i = 0; i < m.x.rows(); ++i)
        for (int c = 0; c < dim; ++c)
            m.x(i, c) = rng.normal(labels[static_cast<std::size_t>(i)] * 1.5, 1.0);
    return m;
}

FeatureMatrix blob_matrix(int participants, int rows_each, std::uint64_t seed, int dim = 4) {
    std::vector<std::string> ids;
    std::vector<int> labels;
    for (int p = 0; p < participants; ++p)
        for (int r = 0; r < rows_each; ++r) {
            ids.push_back("p" + std::to_string(p));
            labels.push_back(r % 2);
        }
    return matrix_of(ids, labels, seed, dim);
}

}  // namespace

TEST_CASE("partition_by_participant") {
    SUBCASE("shard sizes follow the grouping") {
        FeatureMatrix m = matrix_of({"a", "a", "b", "c", "a", "b", "a", "a",
                                     "a", "a", "a", "a", "b", "b", "b", "c",
                                     "c", "c", "c", "a"},
                                    std::vector<int>(20, 1), 1);
        for (std::size_t i = 0; i < 20; i += 2) m.labels[i] = 0;
        const auto shards = fed::partition_by_participant(m);
        REQUIRE(shards.size() == 3);
        CHECK(shards[0].participant == "a");
        CHECK(shards[0].x.rows() == 10);
        CHECK(shards[1].x.rows() == 5);
        CHECK(shards[2].x.rows() == 5);
    }

    SUBCASE("single participant gets the whole set") {
        const FeatureMatrix m = matrix_of({"solo", "solo", "solo"}, {0, 1, 0}, 2);
        const auto shards = fed::partition_by_participant(m);
        REQUIRE(shards.size() == 1);
        CHECK(shards[0].x.rows() == 3);
    }

    SUBCASE("shards re-concatenate to the original rows") {
        const FeatureMatrix m = blob_matrix(4, 5, 3);
        const auto shards = fed::partition_by_participant(m);
        Eigen::Index total = 0;
        double sum = 0;
        for (const auto& s : shards) {
            total += s.x.rows();
            sum += s.x.sum();
        }
        CHECK(total == m.rows());
        CHECK(sum == doctest::Approx(m.x.sum()).epsilon(1e-12));
    }
}

TEST_CASE("fedavg_aggregate") {
    SUBCASE("weighted scalar example: counts (1,3) over values (0,4) give 3") {
        ClientUpdate a{Eigen::VectorXd::Constant(1, 0.0), 1};
        ClientUpdate b{Eigen::VectorXd::Constant(1, 4.0), 3};
        CHECK(fed::fedavg_aggregate({a, b})[0] == doctest::Approx(3.0).epsilon(1e-15));
    }

    SUBCASE("singleton average is the update itself") {
        Rng rng(5);
        Eigen::VectorXd v(7);
        for (Eigen::Index i = 0; i < 7; ++i) v[i] = rng.normal();
        const auto out = fed::fedavg_aggregate({ClientUpdate{v, 13}});
        CHECK((out - v).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("identical params from all clients stay identical") {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(4, 2.5);
        const auto out =
            fed::fedavg_aggregate({ClientUpdate{v, 1}, ClientUpdate{v, 5}, ClientUpdate{v, 2}});
        CHECK((out - v).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("permutation invariance is exact") {
        Rng rng(6);
        std::vector<ClientUpdate> updates;
        for (int i = 0; i < 6; ++i) {
            Eigen::VectorXd v(5);
            for (Eigen::Index j = 0; j < 5; ++j) v[j] = rng.normal();
            updates.push_back({v, static_cast<double>(1 + rng.below(20))});
        }
        const auto base = fed::fedavg_aggregate(updates);
        for (int trial = 0; trial < 10; ++trial) {
            rng.shuffle(updates);
            const auto shuffled = fed::fedavg_aggregate(updates);
            CHECK((base - shuffled).cwiseAbs().maxCoeff() == 0.0);
        }
    }

    SUBCASE("shape mismatch is rejected") {
        CHECK_THROWS_WITH_AS(
            fed::fedavg_aggregate(
                {ClientUpdate{Eigen::VectorXd::Zero(3), 1}, ClientUpdate{Eigen::VectorXd::Zero(4), 1}}),
            doctest::Contains("shape mismatch"), Error);
    }
}

TEST_CASE("local_update basics") {
    const auto arch = models::MlpArchitecture::for_dim(4, 8);
    const auto init = models::mlp_init(arch, 0);
    const Eigen::VectorXd global = init.flatten();

    ClientShard shard;
    shard.participant = "p0";
    const FeatureMatrix m = blob_matrix(1, 12, 7);
    shard.x = m.x;
    shard.y = m.labels;

    RoundConfig cfg;
    cfg.local_epochs = 0;
    SUBCASE("zero local epochs is a no-op") {
        const auto update = fed::local_update(arch, global, shard, cfg, 0, 0);
        CHECK((update.params - global).cwiseAbs().maxCoeff() == 0.0);
        CHECK(update.count == 12);
    }

    SUBCASE("zero learning rate moves no trainable parameter") {
        cfg.local_epochs = 3;
        cfg.learning_rate = 0.0;
        const auto update = fed::local_update(arch, global, shard, cfg, 0, 0);
        models::MlpParams after = models::mlp_init(arch, 0);
        after.unflatten(update.params);
        CHECK((after.flatten_trainable() - init.flatten_trainable()).cwiseAbs().maxCoeff() ==
              0.0);
    }

    SUBCASE("identical runs produce identical parameters") {
        cfg.local_epochs = 2;
        cfg.learning_rate = 1e-2;
        const auto a = fed::local_update(arch, global, shard, cfg, 1, 0);
        const auto b = fed::local_update(arch, global, shard, cfg, 1, 0);
        CHECK((a.params - b.params).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("turbosvm_aggregate") {
    const auto arch = models::MlpArchitecture::for_dim(4, 8);
    const auto init = models::mlp_init(arch, 0);
    const Eigen::VectorXd prev = init.flatten();
    const Eigen::Index width = arch.hidden_width;

    auto embedding = [width](double center0, double center1) {
        ClientEmbedding e;
        e.class0 = Eigen::VectorXd::Constant(width, center0);
        e.class1 = Eigen::VectorXd::Constant(width, center1);
        e.has0 = e.has1 = true;
        return e;
    };

    Rng rng(9);
    auto update_of = [&](double scale, double count) {
        Eigen::VectorXd v = prev;
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += scale * rng.normal();
        return ClientUpdate{v, count};
    };

    SUBCASE("identical clients fall back to FedAvg bitwise") {
        const ClientUpdate u{prev, 5};
        const auto fedavg = fed::fedavg_aggregate({u, u});
        RoundConfig cfg;
        bool fell_back = false;
        const auto turbo = fed::turbosvm_aggregate({u, u}, {embedding(1, 1), embedding(1, 1)},
                                                   prev, arch, cfg, &fell_back);
        CHECK(fell_back);
        CHECK((turbo - fedavg).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("zero server and logits learning rates return the previous global") {
        RoundConfig cfg;
        cfg.server_lr = 0.0;
        cfg.logits_lr = 0.0;
        const auto out = fed::turbosvm_aggregate({update_of(0.1, 3), update_of(0.1, 5)},
                                                 {embedding(-1, 1), embedding(-0.5, 1.5)}, prev,
                                                 arch, cfg, nullptr);
        CHECK((out - prev).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("fewer than two full clients falls back, flagged") {
        RoundConfig cfg;
        ClientEmbedding missing;
        missing.class0 = Eigen::VectorXd::Zero(width);
        missing.class1 = Eigen::VectorXd::Zero(width);
        missing.has0 = true;
        missing.has1 = false;
        bool fell_back = false;
        const auto updates = std::vector<ClientUpdate>{update_of(0.1, 2), update_of(0.1, 2)};
        const auto out = fed::turbosvm_aggregate(updates, {embedding(-1, 1), missing}, prev,
                                                 arch, cfg, &fell_back);
        CHECK(fell_back);
        CHECK((out - fed::fedavg_aggregate(updates)).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("separable embeddings: margin client dominates, floor keeps the other") {
        // client 1 sits on the margin (embeddings at -1/+1), client 2 is inside
        // (-2/+2, non-support): support mass lands on client 1, client 2 keeps
        // its FedAvg floor 0.5, so normalized weights are (2/3, 1/3)
        RoundConfig cfg;
        cfg.server_lr = 1.0;
        cfg.logits_lr = 0.0;
        const auto u1 = update_of(0.5, 4);
        const auto u2 = update_of(0.5, 4);
        const auto out = fed::turbosvm_aggregate({u1, u2}, {embedding(-1, 1), embedding(-2, 2)},
                                                 prev, arch, cfg, nullptr);
        const Eigen::VectorXd expect = (2.0 / 3.0) * u1.params + (1.0 / 3.0) * u2.params;
        CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("run_federated") {
    const FeatureMatrix train = blob_matrix(4, 12, 20);
    const FeatureMatrix val = blob_matrix(2, 8, 21);

    SUBCASE("zero rounds returns the initialization") {
        RoundConfig cfg;
        cfg.rounds = 0;
        const auto res = fed::run_federated(train, val, cfg, fed::Strategy::fedavg);
        const auto arch = models::MlpArchitecture::for_dim(static_cast<int>(train.cols()), 64);
        const auto init = models::mlp_init(arch, cfg.seed);
        CHECK((res.final_params - init.flatten()).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("fraction 0.5 of 4 clients selects exactly 2 per round, deterministically") {
        RoundConfig cfg;
        cfg.rounds = 5;
        cfg.client_fraction = 0.5;
        cfg.local_epochs = 1;
        const auto a = fed::run_federated(train, val, cfg, fed::Strategy::fedavg);
        const auto b = fed::run_federated(train, val, cfg, fed::Strategy::fedavg);
        REQUIRE(a.log.size() == b.log.size());
        for (std::size_t i = 0; i < a.log.size(); ++i) {
            CHECK(a.log[i].selected_clients == 2);
            CHECK(a.log[i].val_loss == b.log[i].val_loss);
        }
        CHECK((a.final_params - b.final_params).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("full participation includes every client every round") {
        RoundConfig cfg;
        cfg.rounds = 3;
        cfg.client_fraction = 1.0;
        cfg.local_epochs = 1;
        const auto res = fed::run_federated(train, val, cfg, fed::Strategy::fedavg);
        for (const auto& entry : res.log) CHECK(entry.selected_clients == 4);
    }

    SUBCASE("single-client FedAvg replays centralized training exactly") {
        const FeatureMatrix solo = blob_matrix(1, 30, 22);
        RoundConfig cfg;
        cfg.rounds = 3;
        cfg.local_epochs = 5;
        cfg.client_fraction = 1.0;
        cfg.learning_rate = 1e-2;
        cfg.batch_size = 8;
        cfg.patience = 1000;
        cfg.seed = 0;
        const auto res = fed::run_federated(solo, val, cfg, fed::Strategy::fedavg);

        // centralized path: same init, same epoch schedule (client stream 0)
        const auto arch = models::MlpArchitecture::for_dim(static_cast<int>(solo.cols()), 64);
        models::TrainedModel ref_model;
        models::Standardizer std_fit;
        std_fit.fit(solo.x);
        const Eigen::MatrixXd xs = std_fit.apply(solo.x);
        models::MlpParams params = models::mlp_init(arch, cfg.seed);
        models::MlpTrainConfig tc;
        tc.learning_rate = cfg.learning_rate;
        tc.batch_size = cfg.batch_size;
        tc.stream_seed = mix_seed(cfg.seed, 0);
        for (int epoch = 0; epoch < cfg.rounds * cfg.local_epochs; ++epoch)
            models::mlp_run_epoch(arch, params, xs, solo.labels, tc, epoch);

        CHECK((res.final_params - params.flatten()).cwiseAbs().maxCoeff() < 1e-9);
    }

    SUBCASE("turbosvm runs end to end and logs rounds") {
        RoundConfig cfg;
        cfg.rounds = 4;
        cfg.local_epochs = 1;
        const auto res = fed::run_federated(train, val, cfg, fed::Strategy::turbosvm);
        CHECK(res.log.size() == 4);
        const auto scores = res.model.predict_scores(val.x);
        for (Eigen::Index i = 0; i < scores.size(); ++i) {
            CHECK(scores[i] >= 0.0);
            CHECK(scores[i] <= 1.0);
        }
    }
}
