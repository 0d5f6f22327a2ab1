#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mw/corpus.hpp"
#include "mw/federated.hpp"
#include "mw/model_zoo.hpp"
#include "mw/types.hpp"

namespace mw::tune {

// The only projection of a dataset that tuning code can touch: test rows are
// dropped at construction, so no tuning path can reach them.
class TrainValView {
public:
    TrainValView(const FeatureMatrix& full, const corpus::Split& split);

    const FeatureMatrix& train() const { return train_; }
    const FeatureMatrix& val() const { return val_; }
    FeatureMatrix combined() const;  // train + val stacked, for cross-validation

private:
    FeatureMatrix train_;
    FeatureMatrix val_;
};

// fold id per item: seeded shuffle, then contiguous folds of size
// ceil(n/k) (first n mod k folds) or floor(n/k)
std::vector<int> kfold_indices(std::size_t n, int k, std::uint64_t seed);

struct Grid {
    models::Family family = models::Family::logreg;
    // ordered axes; enumeration is row-major over this order
    std::vector<std::pair<std::string, std::vector<models::HyperValue>>> axes;

    std::size_t size() const;
    models::HyperParams at(std::size_t flat_index) const;
};

// Published search ranges per family; with_selection adds the supervised
// selection axes for traditional classifiers. xgboost_variant extends gboost
// with the column-subsample axis.
Grid default_grid(models::Family family, bool with_selection, bool xgboost_variant = false);

struct TuneTrace {
    std::string family;
    std::size_t grid_point = 0;
    std::string fold_or_seed;
    double metric = 0;
};

struct TuneResult {
    models::HyperParams best;
    std::size_t best_index = 0;
    double best_metric = 0;
    std::vector<TuneTrace> trace;
};

// 5-fold cross-validated grid search on train+val (participant-grouped folds),
// scored by mind-wandering F1; ties break to the earliest grid point.
TuneResult grid_search_cv(const Grid& grid, const TrainValView& data, int folds = 5,
                          std::uint64_t cv_seed = 0);

// Neural grid: every point trained with seeds {0,1,2}, ranked by mean
// validation mind-wandering F1.
TuneResult nn_grid_search(const Grid& grid, const TrainValView& data);

struct FederatedSpace {
    std::vector<int> rounds = {10, 20, 40};
    std::vector<double> client_fraction = {0.5, 1.0};
    std::vector<int> local_epochs = {5, 15};
    std::vector<int> batch_size = {4, 8, 16};
    std::vector<double> learning_rate = {1e-2, 1e-3, 1e-4};
    std::vector<double> server_lr = {0.1, 0.5, 1.0};
    std::vector<double> logits_lr = {1e-3, 1e-4, 1e-5};
};

struct FederatedSearchResult {
    fed::RoundConfig best;
    double best_metric = 0;
    std::vector<TuneTrace> trace;
};

// Seeded random search over the federated config space (stand-in for Bayesian
// optimization), each draw scored by validation mind-wandering F1.
FederatedSearchResult federated_search(const FederatedSpace& space, std::size_t budget,
                                       std::uint64_t seed, const TrainValView& data,
                                       fed::Strategy strategy);

void write_tuning_trace(const std::string& path, const std::vector<TuneTrace>& trace);

}  // namespace mw::tune
