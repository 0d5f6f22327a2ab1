#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mw/error.hpp"
#include "mw/evaluation.hpp"
#include "mw/model_zoo.hpp"
#include "mw/rng.hpp"

using namespace mw;
using models::Family;
using models::ModelSpec;
using models::TrainedModel;

namespace {

struct Data {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

// two Gaussian blobs separated by `margin` standard deviations on every axis
Data blobs(int n_per_class, int dim, double margin, std::uint64_t seed) {
    Rng rng(seed);
    Data d;
    d.x.resize(2 * n_per_class, dim);
    for (int i = 0; i < 2 * n_per_class; ++i) {
        const int label = i < n_per_class ? 0 : 1;
        d.y.push_back(label);
        for (int c = 0; c < dim; ++c)
            d.x(i, c) = rng.normal(label == 1 ? margin : -margin, 1.0);
    }
    return d;
}

// strictly separated classes (gap >= 2 units around the boundary)
Data separable(int n_per_class, int dim, std::uint64_t seed) {
    Rng rng(seed);
    Data d;
    d.x.resize(2 * n_per_class, dim);
    for (int i = 0; i < 2 * n_per_class; ++i) {
        const int label = i < n_per_class ? 0 : 1;
        d.y.push_back(label);
        const double offset = label == 1 ? 2.0 : -2.0;
        d.x(i, 0) = offset + (label == 1 ? 1.0 : -1.0) * rng.uniform();
        for (int c = 1; c < dim; ++c) d.x(i, c) = rng.normal();
    }
    return d;
}

ModelSpec spec_of(Family family, std::uint64_t seed = 0) {
    ModelSpec s;
    s.family = family;
    s.seed = seed;
    return s;
}

double train_f1(const TrainedModel& model, const Data& d) {
    return eval::confusion_metrics(d.y, model.predict_labels(d.x)).f1;
}

const std::vector<Family> kAll = {Family::logreg,    Family::gaussian_nb, Family::knn,
                                  Family::tree,      Family::random_forest, Family::gboost,
                                  Family::adaboost,  Family::svm_linear,  Family::svm_rbf,
                                  Family::mlp};

}  // namespace

TEST_CASE("standardizer") {
    const Data d = blobs(50, 4, 0.7, 1);
    models::Standardizer s;
    s.fit(d.x);
    const Eigen::MatrixXd z = s.apply(d.x);
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        CHECK(std::abs(z.col(c).mean()) < 1e-9);
        const double sd = std::sqrt((z.col(c).array() - z.col(c).mean()).square().sum() /
                                    static_cast<double>(z.rows() - 1));
        CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
    }

    // zero-variance column passes through unscaled
    Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(5, 1, 3.0);
    models::Standardizer s2;
    s2.fit(flat);
    CHECK(s2.apply(flat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spec validation rejects foreign hyperparameters") {
    ModelSpec s = spec_of(Family::logreg);
    s.params["k"] = 3.0;  // knn key
    CHECK_THROWS_WITH_AS(models::validate_spec(s), doctest::Contains("not valid for family"),
                         Error);
}

TEST_CASE("fit rejects degenerate inputs") {
    Data d = blobs(20, 3, 1.0, 2);
    SUBCASE("single class") {
        std::fill(d.y.begin(), d.y.end(), 1);
        CHECK_THROWS_AS(models::fit(spec_of(Family::logreg), d.x, d.y, {}, {}), Error);
    }
    SUBCASE("non-finite features") {
        d.x(3, 1) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(models::fit(spec_of(Family::logreg), d.x, d.y, {}, {}), Error);
    }
    SUBCASE("mlp without validation data") {
        CHECK_THROWS_WITH_AS(models::fit(spec_of(Family::mlp), d.x, d.y, {}, {}),
                             doctest::Contains("validation"), Error);
    }
}

TEST_CASE("worked single-family examples") {
    SUBCASE("knn with k=1 scores a training point as its own label") {
        const Data d = blobs(20, 2, 1.0, 3);
        ModelSpec s = spec_of(Family::knn);
        s.params["k"] = 1.0;
        const auto model = models::fit(s, d.x, d.y, {}, {});
        const auto scores = model.predict_scores(d.x);
        for (Eigen::Index i = 0; i < scores.size(); ++i)
            CHECK(scores[i] == (d.y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0));
    }

    SUBCASE("gaussian_nb is exactly 0.5 at the mirror point") {
        Eigen::MatrixXd x(8, 1);
        x << -3, -2.5, -2, -1.5, 1.5, 2, 2.5, 3;
        const std::vector<int> y = {0, 0, 0, 0, 1, 1, 1, 1};
        const auto model = models::fit(spec_of(Family::gaussian_nb), x, y, {}, {});
        Eigen::MatrixXd probe(1, 1);
        probe << 0.0;
        CHECK(model.predict_scores(probe)[0] == doctest::Approx(0.5).epsilon(1e-9));
    }

    SUBCASE("logreg fully separates 1-D separable data at threshold 0.5") {
        Rng rng(4);
        Eigen::MatrixXd x(100, 1);
        std::vector<int> y;
        for (int i = 0; i < 100; ++i) {
            const int label = i < 50 ? 0 : 1;
            y.push_back(label);
            x(i, 0) = label == 1 ? 0.2 + rng.uniform() : -0.2 - rng.uniform();
        }
        const auto model = models::fit(spec_of(Family::logreg), x, y, {}, {});
        CHECK(eval::confusion_metrics(y, model.predict_labels(x)).accuracy == 1.0);
    }

    SUBCASE("gboost with zero stages returns the prior everywhere") {
        const Data d = blobs(25, 3, 1.0, 5);
        ModelSpec s = spec_of(Family::gboost);
        s.params["n_trees"] = 0.0;
        const auto model = models::fit(s, d.x, d.y, {}, {});
        const auto scores = model.predict_scores(d.x);
        for (Eigen::Index i = 1; i < scores.size(); ++i) CHECK(scores[i] == scores[0]);
        CHECK(scores[0] == doctest::Approx(0.5).epsilon(1e-9));
    }
}

TEST_CASE("score range and threshold semantics") {
    const Data train = blobs(30, 4, 0.8, 6);
    const Data test = blobs(20, 4, 0.8, 7);
    const Data val = blobs(10, 4, 0.8, 8);

    for (Family family : kAll) {
        CAPTURE(models::to_string(family));
        ModelSpec s = spec_of(family, 0);
        if (family == Family::mlp) s.params["max_epochs"] = 10.0;
        const auto model = models::fit(s, train.x, train.y, val.x, val.y);
        const auto scores = model.predict_scores(test.x);
        for (Eigen::Index i = 0; i < scores.size(); ++i) {
            CHECK(scores[i] >= 0.0);
            CHECK(scores[i] <= 1.0);
        }
        const auto labels = model.predict_labels(test.x, 0.0);
        for (int v : labels) CHECK(v == 1);  // threshold 0 makes everything positive
        CHECK_THROWS_AS(model.predict_labels(test.x, 1.5), Error);
    }

    SUBCASE("threshold is boundary inclusive") {
        // direct contract check on scores (0.4, 0.5, 0.6)
        const std::vector<double> scores = {0.4, 0.5, 0.6};
        std::vector<int> labels;
        for (double v : scores) labels.push_back(v >= 0.5 ? 1 : 0);
        CHECK(labels == std::vector<int>{0, 1, 1});
    }
}

TEST_CASE("refits are bitwise deterministic") {
    const Data train = blobs(25, 5, 0.6, 9);
    const Data val = blobs(8, 5, 0.6, 10);
    const Data test = blobs(15, 5, 0.6, 11);

    for (Family family : kAll) {
        CAPTURE(models::to_string(family));
        ModelSpec s = spec_of(family, 3);
        if (family == Family::mlp) s.params["max_epochs"] = 6.0;
        const auto a = models::fit(s, train.x, train.y, val.x, val.y);
        const auto b = models::fit(s, train.x, train.y, val.x, val.y);
        const auto sa = a.predict_scores(test.x);
        const auto sb = b.predict_scores(test.x);
        REQUIRE(sa.size() == sb.size());
        for (Eigen::Index i = 0; i < sa.size(); ++i) REQUIRE(sa[i] == sb[i]);
    }
}

TEST_CASE("monotone sanity: separable data is fully learned") {
    const Data d = separable(40, 3, 12);
    const std::vector<Family> families = {Family::logreg, Family::svm_linear, Family::tree,
                                          Family::random_forest};
    for (Family family : families) {
        CAPTURE(models::to_string(family));
        const auto model = models::fit(spec_of(family, 1), d.x, d.y, {}, {});
        CHECK(train_f1(model, d) == 1.0);
    }
    ModelSpec knn1 = spec_of(Family::knn);
    knn1.params["k"] = 1.0;
    CHECK(train_f1(models::fit(knn1, d.x, d.y, {}, {}), d) == 1.0);
}

TEST_CASE("logreg L1 zeroes out noise features") {
    Rng rng(23);
    Eigen::MatrixXd x(200, 6);
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        y.push_back(i % 2);
        x(i, 0) = rng.normal(y.back() * 2.0, 1.0);
        for (int c = 1; c < 6; ++c) x(i, c) = rng.normal();
    }
    ModelSpec s = spec_of(Family::logreg);
    s.params["penalty"] = std::string("l1");
    s.params["C"] = 0.1;
    const auto model = models::fit(s, x, y, {}, {});
    const auto* payload = std::get_if<models::LogregModel>(&model.payload);
    REQUIRE(payload != nullptr);
    CHECK(std::abs(payload->w[0]) > 0.1);  // signal survives
    int exact_zeros = 0;
    for (int c = 1; c < 6; ++c) exact_zeros += payload->w[c] == 0.0 ? 1 : 0;
    CHECK(exact_zeros >= 3);  // soft threshold kills most noise weights

    // L2 keeps them small but nonzero
    s.params["penalty"] = std::string("l2");
    const auto l2 = models::fit(s, x, y, {}, {});
    const auto* l2p = std::get_if<models::LogregModel>(&l2.payload);
    int l2_zeros = 0;
    for (int c = 1; c < 6; ++c) l2_zeros += l2p->w[c] == 0.0 ? 1 : 0;
    CHECK(l2_zeros == 0);
}

TEST_CASE("svm_rbf gamma modes") {
    const Data d = blobs(25, 4, 1.0, 24);
    for (const char* gamma : {"scale", "auto", "0.05"}) {
        CAPTURE(gamma);
        ModelSpec s = spec_of(Family::svm_rbf);
        s.params["gamma"] = std::string(gamma);
        const auto model = models::fit(s, d.x, d.y, {}, {});
        const auto scores = model.predict_scores(d.x);
        CHECK(eval::confusion_metrics(d.y, model.predict_labels(d.x)).accuracy > 0.7);
        CHECK(scores.minCoeff() >= 0.0);
        CHECK(scores.maxCoeff() <= 1.0);
    }
    ModelSpec bad = spec_of(Family::svm_rbf);
    bad.params["gamma"] = std::string("banana");
    CHECK_THROWS_AS(models::fit(bad, d.x, d.y, {}, {}), Error);
}

TEST_CASE("svm_rbf SMO respects the dual constraints") {
    const Data d = blobs(30, 3, 0.8, 13);
    ModelSpec s = spec_of(Family::svm_rbf);
    s.params["C"] = 1.0;
    s.params["class_weight"] = std::string("balanced");
    const auto model = models::fit(s, d.x, d.y, {}, {});
    const auto* payload = std::get_if<models::SvmRbfModel>(&model.payload);
    REQUIRE(payload != nullptr);

    // alpha stored as alpha*y: |alpha_y| <= C_i and sum alpha_y ~ 0
    const Eigen::VectorXd cw = models::class_weights(d.y, "balanced");
    double sum = 0;
    for (Eigen::Index i = 0; i < payload->alpha_y.size(); ++i) {
        sum += payload->alpha_y[i];
        CHECK(std::abs(payload->alpha_y[i]) <= 1.0 * cw.maxCoeff() + 1e-9);
    }
    CHECK(std::abs(sum) < 1e-6);
}

TEST_CASE("gboost training loss is non-increasing with full rows") {
    const Data d = blobs(40, 4, 0.5, 14);
    ModelSpec s = spec_of(Family::gboost);
    s.params["n_trees"] = 30.0;
    s.params["learning_rate"] = 0.3;
    s.params["subsample"] = 1.0;
    const auto model = models::fit(s, d.x, d.y, {}, {});
    const auto* payload = std::get_if<models::GboostModel>(&model.payload);
    REQUIRE(payload != nullptr);

    // replay the staged margins on the standardized training matrix
    Eigen::MatrixXd xs(d.x.rows(), static_cast<Eigen::Index>(model.selected.size()));
    for (std::size_t j = 0; j < model.selected.size(); ++j)
        xs.col(static_cast<Eigen::Index>(j)) = d.x.col(model.selected[j]);
    xs = model.standardizer.apply(xs);

    Eigen::VectorXd f = Eigen::VectorXd::Constant(xs.rows(), payload->f0);
    auto loss_of = [&]() {
        double loss = 0;
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            const double p = 1.0 / (1.0 + std::exp(-f[i]));
            loss -= d.y[static_cast<std::size_t>(i)] == 1 ? std::log(p) : std::log(1 - p);
        }
        return loss / static_cast<double>(f.size());
    };
    double prev = loss_of();
    for (const auto& tree : payload->trees) {
        for (Eigen::Index i = 0; i < f.size(); ++i)
            f[i] += payload->learning_rate * tree.predict(xs.row(i));
        const double cur = loss_of();
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
}

TEST_CASE("supervised selection rides inside fit") {
    // informative feature 0, noise elsewhere; selection keeps feature 0
    Rng rng(15);
    Eigen::MatrixXd x(120, 8);
    std::vector<int> y;
    for (int i = 0; i < 120; ++i) {
        y.push_back(i % 2);
        x(i, 0) = rng.normal(y.back() * 3.0, 1.0);
        for (int c = 1; c < 8; ++c) x(i, c) = rng.normal();
    }
    ModelSpec s = spec_of(Family::logreg);
    s.params["select_method"] = std::string("anova_f");
    s.params["select_k_frac"] = 0.25;  // 2 of 8
    const auto model = models::fit(s, x, y, {}, {});
    CHECK(model.selected.size() == 2);
    CHECK(model.selected[0] == 0);
    CHECK(model.standardizer.mean.size() == 2);
}

TEST_CASE("serialized models reload to bitwise-identical predictions") {
    namespace fs = std::filesystem;
    const Data train = blobs(25, 4, 0.7, 16);
    const Data val = blobs(8, 4, 0.7, 17);
    const Data test = blobs(30, 4, 0.7, 18);
    const fs::path dir = fs::temp_directory_path() / "mw_model_io";
    fs::create_directories(dir);

    for (Family family : kAll) {
        CAPTURE(models::to_string(family));
        ModelSpec s = spec_of(family, 5);
        s.params["select_method"] = std::string("anova_f");
        s.params["select_k_frac"] = 0.5;
        if (family == Family::mlp) {
            s.params.erase("select_method");
            s.params.erase("select_k_frac");
            s.params["max_epochs"] = 5.0;
        }
        const auto model = models::fit(s, train.x, train.y, val.x, val.y);
        const fs::path path = dir / (std::string(models::to_string(family)) + ".json");
        model.save(path.string());
        const auto loaded = TrainedModel::load(path.string());

        const auto sa = model.predict_scores(test.x);
        const auto sb = loaded.predict_scores(test.x);
        REQUIRE(sa.size() == sb.size());
        for (Eigen::Index i = 0; i < sa.size(); ++i) REQUIRE(sa[i] == sb[i]);
    }
}

TEST_CASE("predict dimension mismatch is rejected") {
    const Data d = blobs(20, 3, 1.0, 19);
    const auto model = models::fit(spec_of(Family::logreg), d.x, d.y, {}, {});
    Eigen::MatrixXd wrong(4, 5);
    wrong.setZero();
    CHECK_THROWS_WITH_AS(model.predict_scores(wrong), doctest::Contains("dimension"), Error);
}
