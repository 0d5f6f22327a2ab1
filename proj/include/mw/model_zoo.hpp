#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mw/mlp.hpp"
#include "mw/types.hpp"

namespace mw::models {

enum class Family {
    logreg,
    gaussian_nb,
    knn,
    tree,
    random_forest,
    gboost,
    adaboost,
    svm_linear,
    svm_rbf,
    mlp
};

Family family_from_string(const std::string& s);
const char* to_string(Family f);

using HyperValue = std::variant<double, std::string>;
using HyperParams = std::map<std::string, HyperValue>;

double num_param(const HyperParams& p, const std::string& key, double fallback);
std::string str_param(const HyperParams& p, const std::string& key, const std::string& fallback);

struct ModelSpec {
    Family family = Family::logreg;
    HyperParams params;
    std::uint64_t seed = 0;
};

// rejects hyperparameter keys that do not belong to the family
void validate_spec(const ModelSpec& spec);

struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;  // zero-variance columns standardize with sd 1

    void fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

// ---- family payloads -------------------------------------------------------

struct LogregModel {
    Eigen::VectorXd w;
    double b = 0;
};

struct GnbModel {
    Eigen::VectorXd mean0, mean1, var0, var1;
    double log_prior0 = 0, log_prior1 = 0;
};

struct KnnModel {
    Eigen::MatrixXd x;
    std::vector<int> y;
    int k = 5;
    bool manhattan = false;
    bool distance_weighted = false;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;  // leaf: positive-class probability (or regression value)
};

struct TreeModel {
    std::vector<TreeNode> nodes;
    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct ForestModel {
    std::vector<TreeModel> trees;
};

struct GboostModel {
    double f0 = 0;  // initial log-odds
    double learning_rate = 0.1;
    std::vector<TreeModel> trees;
};

struct Stump {
    int feature = 0;
    double threshold = 0;
    int vote_right = 1;  // predicted class for x[feature] > threshold
};

struct AdaModel {
    std::vector<Stump> stumps;
    std::vector<double> alpha;
};

// 1-D logistic calibration fit on training margins
struct PlattScale {
    double a = 0;
    double b = 0;
    double operator()(double margin) const;
};

struct SvmLinearModel {
    Eigen::VectorXd w;
    double b = 0;
    PlattScale platt;
};

struct SvmRbfModel {
    Eigen::MatrixXd support;    // rows = support vectors
    Eigen::VectorXd alpha_y;    // alpha_i * y_i per support vector
    double b = 0;
    double gamma = 1.0;
    PlattScale platt;
};

struct MlpModel {
    MlpArchitecture arch;
    MlpParams params;
};

using ModelPayload = std::variant<LogregModel, GnbModel, KnnModel, TreeModel, ForestModel,
                                  GboostModel, AdaModel, SvmLinearModel, SvmRbfModel, MlpModel>;

struct TrainedModel {
    Family family = Family::logreg;
    HyperParams hyperparams;
    std::uint64_t seed = 0;
    Eigen::Index input_dim = 0;
    std::vector<Eigen::Index> selected;  // feature columns used by the model
    Standardizer standardizer;           // fit on training data, selected columns
    ModelPayload payload;

    Eigen::VectorXd predict_scores(const Eigen::MatrixXd& x) const;
    std::vector<int> predict_labels(const Eigen::MatrixXd& x, double threshold = 0.5) const;

    // versioned text artifact; reload reproduces predictions bitwise
    void save(const std::string& path) const;
    static TrainedModel load(const std::string& path);
};

// Validation data is required by the mlp family (early stopping) and ignored
// by the rest.
TrainedModel fit(const ModelSpec& spec, const Eigen::MatrixXd& x, const std::vector<int>& y,
                 const Eigen::MatrixXd& x_val, const std::vector<int>& y_val);
TrainedModel fit(const ModelSpec& spec, const FeatureMatrix& train, const FeatureMatrix& val);

// balanced weights: n / (2 * class count); "none" gives all ones
Eigen::VectorXd class_weights(const std::vector<int>& y, const std::string& mode);

}  // namespace mw::models
