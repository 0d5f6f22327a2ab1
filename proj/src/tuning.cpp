#include "mw/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mw/csv.hpp"
#include "mw/error.hpp"
#include "mw/evaluation.hpp"
#include "mw/rng.hpp"

namespace mw::tune {

namespace {

FeatureMatrix rows_for(const FeatureMatrix& full, const std::set<std::string>& wanted) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < full.rows(); ++i)
        if (wanted.count(full.participants[static_cast<std::size_t>(i)]))
            idx.push_back(i);
    return full.select_rows(idx);
}

double mw_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    return eval::confusion_metrics(y_true, y_pred).f1;
}

}  // namespace

TrainValView::TrainValView(const FeatureMatrix& full, const corpus::Split& split) {
    train_ = rows_for(full, {split.train.begin(), split.train.end()});
    val_ = rows_for(full, {split.val.begin(), split.val.end()});
}

FeatureMatrix TrainValView::combined() const {
    FeatureMatrix out;
    out.x.resize(train_.rows() + val_.rows(), train_.cols());
    out.x.topRows(train_.rows()) = train_.x;
    out.x.bottomRows(val_.rows()) = val_.x;
    out.labels = train_.labels;
    out.labels.insert(out.labels.end(), val_.labels.begin(), val_.labels.end());
    out.participants = train_.participants;
    out.participants.insert(out.participants.end(), val_.participants.begin(),
                            val_.participants.end());
    out.provenance = train_.provenance;
    out.provenance.insert(out.provenance.end(), val_.provenance.begin(), val_.provenance.end());
    return out;
}

std::vector<int> kfold_indices(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) input_error("kfold_indices: k must be >= 2");
    if (n < static_cast<std::size_t>(k))
        input_error("kfold_indices: n=", n, " is smaller than k=", k);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0xf01dULL));
    rng.shuffle(order);

    std::vector<int> fold(n, 0);
    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t extra = n % static_cast<std::size_t>(k);
    std::size_t at = 0;
    for (int f = 0; f < k; ++f) {
        const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
        for (std::size_t i = 0; i < size; ++i) fold[order[at++]] = f;
    }
    return fold;
}

std::size_t Grid::size() const {
    std::size_t total = 1;
    for (const auto& [name, values] : axes) {
        (void)name;
        total *= values.size();
    }
    return total;
}

models::HyperParams Grid::at(std::size_t flat_index) const {
    models::HyperParams params;
    std::size_t remaining = flat_index;
    for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
        const auto& [name, values] = *it;
        params[name] = values[remaining % values.size()];
        remaining /= values.size();
    }
    if (remaining != 0) input_error("grid index ", flat_index, " out of range");
    return params;
}

Grid default_grid(models::Family family, bool with_selection, bool xgboost_variant) {
    using models::HyperValue;
    Grid grid;
    grid.family = family;
    auto nums = [](std::initializer_list<double> vs) {
        std::vector<HyperValue> out;
        for (double v : vs) out.emplace_back(v);
        return out;
    };
    auto strs = [](std::initializer_list<const char*> vs) {
        std::vector<HyperValue> out;
        for (const char* v : vs) out.emplace_back(std::string(v));
        return out;
    };

    switch (family) {
        case models::Family::logreg:
            grid.axes = {{"C", nums({0.1, 1, 10})},
                         {"penalty", strs({"l1", "l2"})},
                         {"class_weight", strs({"none", "balanced"})}};
            break;
        case models::Family::gaussian_nb:
            grid.axes = {{"var_smoothing", nums({1e-9, 1e-8, 1e-7, 1e-6})}};
            break;
        case models::Family::knn:
            grid.axes = {{"k", nums({3, 5, 7, 9})},
                         {"metric", strs({"euclidean", "manhattan"})},
                         {"weights", strs({"uniform", "distance"})}};
            break;
        case models::Family::tree:
            grid.axes = {{"max_depth", nums({0, 10, 20, 30})},
                         {"min_samples_split", nums({2, 5, 10})},
                         {"min_samples_leaf", nums({1, 2, 4})},
                         {"class_weight", strs({"none", "balanced"})}};
            break;
        case models::Family::random_forest:
            grid.axes = {{"n_trees", nums({100, 200, 300})},
                         {"max_depth", nums({0, 10, 20, 30})},
                         {"min_samples_split", nums({2, 5, 10})},
                         {"class_weight", strs({"none", "balanced"})}};
            break;
        case models::Family::gboost:
            grid.axes = {{"n_trees", nums({100, 200})},
                         {"max_depth", nums({3, 6, 9})},
                         {"learning_rate", nums({0.01, 0.1, 0.3})},
                         {"subsample", nums({0.8, 1.0})}};
            if (xgboost_variant) grid.axes.push_back({"colsample", nums({0.8, 1.0})});
            break;
        case models::Family::adaboost:
            grid.axes = {{"n_estimators", nums({50, 100, 200})},
                         {"learning_rate", nums({0.01, 0.1, 0.3})}};
            break;
        case models::Family::svm_linear:
            grid.axes = {{"C", nums({0.1, 1, 10, 100})},
                         {"class_weight", strs({"none", "balanced"})}};
            break;
        case models::Family::svm_rbf:
            grid.axes = {{"C", nums({0.1, 1, 10, 100})},
                         {"gamma", strs({"scale", "auto", "0.001", "0.01", "0.1"})},
                         {"class_weight", strs({"none", "balanced"})}};
            break;
        case models::Family::mlp:
            grid.axes = {{"learning_rate", nums({1e-3, 1e-4, 1e-5})},
                         {"batch_size", nums({4, 8, 16})}};
            break;
    }
    if (with_selection && family != models::Family::mlp) {
        grid.axes.push_back({"select_method", strs({"anova_f", "mutual_info"})});
        grid.axes.push_back({"select_k_frac", nums({1.0, 0.5, 0.25})});
    }
    return grid;
}

TuneResult grid_search_cv(const Grid& grid, const TrainValView& data, int folds,
                          std::uint64_t cv_seed) {
    if (grid.size() == 0) input_error("grid_search_cv: empty grid");
    const FeatureMatrix all = data.combined();

    // participant-grouped folds, falling back to row folds for tiny cohorts
    std::vector<std::string> participants(all.participants);
    std::sort(participants.begin(), participants.end());
    participants.erase(std::unique(participants.begin(), participants.end()),
                       participants.end());

    std::vector<int> row_fold(static_cast<std::size_t>(all.rows()));
    if (participants.size() >= static_cast<std::size_t>(folds)) {
        const std::vector<int> pfold = kfold_indices(participants.size(), folds, cv_seed);
        for (Eigen::Index i = 0; i < all.rows(); ++i) {
            const auto it = std::lower_bound(participants.begin(), participants.end(),
                                             all.participants[static_cast<std::size_t>(i)]);
            row_fold[static_cast<std::size_t>(i)] =
                pfold[static_cast<std::size_t>(it - participants.begin())];
        }
    } else {
        row_fold = kfold_indices(static_cast<std::size_t>(all.rows()), folds, cv_seed);
    }

    TuneResult result;
    bool any_ok = false;
    double best = -1;
    std::string last_error = "no grid point evaluated";
    for (std::size_t g = 0; g < grid.size(); ++g) {
        models::ModelSpec spec;
        spec.family = grid.family;
        spec.params = grid.at(g);
        spec.seed = 0;

        double mean = 0;
        bool failed = false;
        for (int f = 0; f < folds; ++f) {
            std::vector<Eigen::Index> tr, te;
            for (Eigen::Index i = 0; i < all.rows(); ++i)
                (row_fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
            const FeatureMatrix train = all.select_rows(tr);
            const FeatureMatrix test = all.select_rows(te);
            try {
                const models::TrainedModel model =
                    models::fit(spec, train.x, train.labels, Eigen::MatrixXd(), {});
                const double f1 = mw_f1(test.labels, model.predict_labels(test.x));
                result.trace.push_back({models::to_string(grid.family), g,
                                        "fold" + std::to_string(f), f1});
                mean += f1;
            } catch (const Error& e) {
                failed = true;
                last_error = e.what();
                break;
            }
        }
        if (failed) continue;
        mean /= static_cast<double>(folds);
        any_ok = true;
        if (mean > best) {  // strict: ties keep the earliest enumeration index
            best = mean;
            result.best = spec.params;
            result.best_index = g;
            result.best_metric = mean;
        }
    }
    if (!any_ok) runtime_error("grid_search_cv: every grid point failed (last: ", last_error, ")");
    return result;
}

TuneResult nn_grid_search(const Grid& grid, const TrainValView& data) {
    if (grid.size() == 0) input_error("nn_grid_search: empty grid");
    if (data.val().rows() == 0) input_error("nn_grid_search: validation set required");

    TuneResult result;
    bool any_ok = false;
    double best = -1;
    std::string last_error = "no grid point evaluated";
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double mean = 0;
        bool failed = false;
        for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
            models::ModelSpec spec;
            spec.family = grid.family;
            spec.params = grid.at(g);
            spec.seed = seed;
            try {
                const models::TrainedModel model = models::fit(spec, data.train(), data.val());
                const double f1 =
                    mw_f1(data.val().labels, model.predict_labels(data.val().x));
                result.trace.push_back({models::to_string(grid.family), g,
                                        "seed" + std::to_string(seed), f1});
                mean += f1;
            } catch (const Error& e) {
                failed = true;
                last_error = e.what();
                break;
            }
        }
        if (failed) continue;
        mean /= 3.0;
        any_ok = true;
        if (mean > best) {
            best = mean;
            result.best = grid.at(g);
            result.best_index = g;
            result.best_metric = mean;
        }
    }
    if (!any_ok) runtime_error("nn_grid_search: every grid point failed (last: ", last_error, ")");
    return result;
}

FederatedSearchResult federated_search(const FederatedSpace& space, std::size_t budget,
                                       std::uint64_t seed, const TrainValView& data,
                                       fed::Strategy strategy) {
    if (budget < 1) input_error("federated_search: budget must be >= 1");

    // finite space enumerated mixed-radix; draws are a seeded sample without
    // replacement, so a budget covering the space degenerates to exhaustive
    // search and returns its global argmax
    const std::size_t radix[7] = {space.rounds.size(),       space.client_fraction.size(),
                                  space.local_epochs.size(), space.batch_size.size(),
                                  space.learning_rate.size(), space.server_lr.size(),
                                  space.logits_lr.size()};
    std::size_t total = 1;
    for (std::size_t r : radix) {
        if (r == 0) input_error("federated_search: empty axis in the config space");
        total *= r;
    }

    std::vector<std::size_t> draws(total);
    std::iota(draws.begin(), draws.end(), 0);
    if (budget < total) {
        Rng rng(mix_seed(seed, 0xfed5ULL));
        rng.shuffle(draws);
        draws.resize(budget);
        std::sort(draws.begin(), draws.end());
    }

    auto decode = [&](std::size_t flat) {
        fed::RoundConfig cfg;
        cfg.logits_lr = space.logits_lr[flat % radix[6]];
        flat /= radix[6];
        cfg.server_lr = space.server_lr[flat % radix[5]];
        flat /= radix[5];
        cfg.learning_rate = space.learning_rate[flat % radix[4]];
        flat /= radix[4];
        cfg.batch_size = space.batch_size[flat % radix[3]];
        flat /= radix[3];
        cfg.local_epochs = space.local_epochs[flat % radix[2]];
        flat /= radix[2];
        cfg.client_fraction = space.client_fraction[flat % radix[1]];
        flat /= radix[1];
        cfg.rounds = space.rounds[flat % radix[0]];
        cfg.seed = 0;
        return cfg;
    };

    FederatedSearchResult result;
    double best = -1;
    for (const std::size_t flat : draws) {
        const fed::RoundConfig cfg = decode(flat);
        const fed::FederatedResult run = fed::run_federated(data.train(), data.val(), cfg,
                                                            strategy);
        const double f1 =
            mw_f1(data.val().labels, run.model.predict_labels(data.val().x));
        result.trace.push_back(
            {to_string(strategy), flat, "draw" + std::to_string(flat), f1});
        if (f1 > best) {
            best = f1;
            result.best = cfg;
            result.best_metric = f1;
        }
    }
    return result;
}

void write_tuning_trace(const std::string& path, const std::vector<TuneTrace>& trace) {
    CsvTable table;
    table.header = {"family", "grid_point", "fold_or_seed", "metric"};
    for (const auto& t : trace)
        table.rows.push_back({t.family, std::to_string(t.grid_point), t.fold_or_seed,
                              format_double(t.metric)});
    write_csv(path, table);
}

}  // namespace mw::tune
