#include "mw/model_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "mw/error.hpp"
#include "mw/feature_selection.hpp"
#include "mw/rng.hpp"
#include "mw/smo.hpp"

namespace mw::models {

Family family_from_string(const std::string& s) {
    if (s == "logreg") return Family::logreg;
    if (s == "gaussian_nb") return Family::gaussian_nb;
    if (s == "knn") return Family::knn;
    if (s == "tree") return Family::tree;
    if (s == "random_forest") return Family::random_forest;
    if (s == "gboost") return Family::gboost;
    if (s == "adaboost") return Family::adaboost;
    if (s == "svm_linear") return Family::svm_linear;
    if (s == "svm_rbf") return Family::svm_rbf;
    if (s == "mlp") return Family::mlp;
    input_error("unknown model family '", s, "'");
}

const char* to_string(Family f) {
    switch (f) {
        case Family::logreg: return "logreg";
        case Family::gaussian_nb: return "gaussian_nb";
        case Family::knn: return "knn";
        case Family::tree: return "tree";
        case Family::random_forest: return "random_forest";
        case Family::gboost: return "gboost";
        case Family::adaboost: return "adaboost";
        case Family::svm_linear: return "svm_linear";
        case Family::svm_rbf: return "svm_rbf";
        case Family::mlp: return "mlp";
    }
    return "?";
}

double num_param(const HyperParams& p, const std::string& key, double fallback) {
    const auto it = p.find(key);
    if (it == p.end()) return fallback;
    if (const double* v = std::get_if<double>(&it->second)) return *v;
    input_error("hyperparameter '", key, "' must be numeric");
}

std::string str_param(const HyperParams& p, const std::string& key, const std::string& fallback) {
    const auto it = p.find(key);
    if (it == p.end()) return fallback;
    if (const std::string* v = std::get_if<std::string>(&it->second)) return *v;
    input_error("hyperparameter '", key, "' must be a string");
}

void validate_spec(const ModelSpec& spec) {
    static const std::set<std::string> common = {"select_method", "select_k_frac"};
    std::set<std::string> allowed = common;
    switch (spec.family) {
        case Family::logreg: allowed.insert({"C", "penalty", "class_weight"}); break;
        case Family::gaussian_nb: allowed.insert({"var_smoothing"}); break;
        case Family::knn: allowed.insert({"k", "metric", "weights"}); break;
        case Family::tree:
            allowed.insert({"max_depth", "min_samples_split", "min_samples_leaf", "class_weight"});
            break;
        case Family::random_forest:
            allowed.insert({"n_trees", "max_depth", "min_samples_split", "class_weight"});
            break;
        case Family::gboost:
            allowed.insert({"n_trees", "max_depth", "learning_rate", "subsample", "colsample"});
            break;
        case Family::adaboost: allowed.insert({"n_estimators", "learning_rate"}); break;
        case Family::svm_linear: allowed.insert({"C", "class_weight"}); break;
        case Family::svm_rbf: allowed.insert({"C", "gamma", "class_weight"}); break;
        case Family::mlp:
            allowed.insert(
                {"learning_rate", "batch_size", "hidden_width", "max_epochs", "patience"});
            break;
    }
    for (const auto& [key, value] : spec.params) {
        (void)value;
        if (!allowed.count(key))
            input_error("hyperparameter '", key, "' is not valid for family ",
                        to_string(spec.family));
    }
}

void Standardizer::fit(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    mean = x.colwise().mean();
    sd.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double ss = (x.col(c).array() - mean[c]).square().sum();
        const double v = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        sd[c] = v > 0 ? v : 1.0;
    }
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean.size())
        input_error("standardizer dimension mismatch: ", x.cols(), " vs ", mean.size());
    return (x.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
}

Eigen::VectorXd class_weights(const std::vector<int>& y, const std::string& mode) {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(y.size()));
    if (mode == "none") return w;
    if (mode != "balanced") input_error("class_weight must be 'none' or 'balanced', got ", mode);
    double pos = 0;
    for (int v : y) pos += v == 1 ? 1.0 : 0.0;
    const double n = static_cast<double>(y.size());
    const double w1 = n / (2.0 * pos);
    const double w0 = n / (2.0 * (n - pos));
    for (std::size_t i = 0; i < y.size(); ++i)
        w[static_cast<Eigen::Index>(i)] = y[i] == 1 ? w1 : w0;
    return w;
}

double PlattScale::operator()(double margin) const {
    return 1.0 / (1.0 + std::exp(-(a * margin + b)));
}

double TreeModel::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
        const TreeNode& n = nodes[static_cast<std::size_t>(at)];
        at = row[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
}

// ===========================================================================
// internal solvers
// ===========================================================================

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double parse_gamma(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || !(v > 0))
        input_error("svm_rbf gamma must be 'scale', 'auto' or a positive number, got '", s, "'");
    return v;
}

void check_binary(const std::vector<int>& y) {
    bool has0 = false, has1 = false;
    for (int v : y) (v == 1 ? has1 : has0) = true;
    if (!has0 || !has1) input_error("training set must contain both classes");
}

// ---- Platt calibration ----------------------------------------------------

PlattScale fit_platt(const Eigen::VectorXd& margins, const std::vector<int>& y) {
    const Eigen::Index n = margins.size();
    double n_pos = 0;
    for (int v : y) n_pos += v == 1 ? 1.0 : 0.0;
    const double n_neg = static_cast<double>(n) - n_pos;
    const double t_pos = (n_pos + 1.0) / (n_pos + 2.0);
    const double t_neg = 1.0 / (n_neg + 2.0);

    PlattScale s;
    s.a = 0.0;
    s.b = std::log((n_neg + 1.0) / (n_pos + 1.0)) * -1.0;

    auto loss_of = [&](double a, double b) {
        double loss = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double t = y[static_cast<std::size_t>(i)] == 1 ? t_pos : t_neg;
            const double z = a * margins[i] + b;
            // numerically stable soft cross-entropy
            loss += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - t * z;
        }
        return loss;
    };

    double cur = loss_of(s.a, s.b);
    for (int iter = 0; iter < 100; ++iter) {
        double g_a = 0, g_b = 0, h_aa = 1e-12, h_ab = 0, h_bb = 1e-12;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double t = y[static_cast<std::size_t>(i)] == 1 ? t_pos : t_neg;
            const double p = sigmoid(s.a * margins[i] + s.b);
            const double d = p - t;
            const double w = std::max(p * (1.0 - p), 1e-12);
            g_a += d * margins[i];
            g_b += d;
            h_aa += w * margins[i] * margins[i];
            h_ab += w * margins[i];
            h_bb += w;
        }
        if (std::max(std::abs(g_a), std::abs(g_b)) < 1e-10) break;
        const double det = h_aa * h_bb - h_ab * h_ab;
        double da = -(h_bb * g_a - h_ab * g_b) / det;
        double db = -(-h_ab * g_a + h_aa * g_b) / det;
        double step = 1.0;
        while (step > 1e-10 && loss_of(s.a + step * da, s.b + step * db) > cur + 1e-15)
            step *= 0.5;
        s.a += step * da;
        s.b += step * db;
        cur = loss_of(s.a, s.b);
    }
    return s;
}

// ---- logistic regression ---------------------------------------------------

LogregModel fit_logreg(const Eigen::MatrixXd& x, const std::vector<int>& y,
                       const Eigen::VectorXd& cw, double c, const std::string& penalty) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0;

    auto predict = [&x](const Eigen::VectorXd& w, double b) -> Eigen::VectorXd {
        return ((x * w).array() + b).unaryExpr([](double z) { return sigmoid(z); }).matrix();
    };

    LogregModel model;
    model.w = Eigen::VectorXd::Zero(d);
    model.b = 0;

    if (penalty == "l2") {
        // Newton with backtracking on 0.5 w'w + C sum cw * CE
        auto loss_of = [&](const Eigen::VectorXd& w, double b) {
            double loss = 0.5 * w.squaredNorm();
            for (Eigen::Index i = 0; i < n; ++i) {
                const double z = x.row(i) * w + b;
                const double margin = yv[i] > 0.5 ? z : -z;
                loss += c * cw[i] * (std::log1p(std::exp(-std::abs(margin))) +
                                     std::max(-margin, 0.0));
            }
            return loss;
        };
        double cur = loss_of(model.w, model.b);
        for (int iter = 0; iter < 100; ++iter) {
            const Eigen::VectorXd p = predict(model.w, model.b);
            const Eigen::VectorXd r = (p - yv).cwiseProduct(cw) * c;
            Eigen::VectorXd grad(d + 1);
            grad.head(d) = x.transpose() * r + model.w;
            grad[d] = r.sum();
            if (grad.cwiseAbs().maxCoeff() < 1e-9 * (1.0 + c)) break;

            const Eigen::VectorXd s =
                (p.array() * (1.0 - p.array())).cwiseMax(1e-12).matrix().cwiseProduct(cw) * c;
            Eigen::MatrixXd h(d + 1, d + 1);
            h.topLeftCorner(d, d) = x.transpose() * s.asDiagonal() * x +
                                    Eigen::MatrixXd::Identity(d, d);
            h.block(0, d, d, 1) = x.transpose() * s;
            h.block(d, 0, 1, d) = (x.transpose() * s).transpose();
            h(d, d) = s.sum() + 1e-12;

            const Eigen::VectorXd delta = h.ldlt().solve(-grad);
            double step = 1.0;
            Eigen::VectorXd w_new;
            double b_new;
            for (;; step *= 0.5) {
                w_new = model.w + step * delta.head(d);
                b_new = model.b + step * delta[d];
                if (loss_of(w_new, b_new) <= cur + 1e-12 || step < 1e-10) break;
            }
            model.w = w_new;
            model.b = b_new;
            cur = loss_of(model.w, model.b);
        }
    } else if (penalty == "l1") {
        // FISTA on ||w||_1 + C sum cw * CE, intercept unpenalized
        Eigen::MatrixXd xt(n, d + 1);
        xt.leftCols(d) = x;
        xt.col(d).setOnes();
        // Lipschitz bound via power iteration on X'X
        Eigen::VectorXd v = Eigen::VectorXd::Ones(d + 1).normalized();
        double sigma2 = 1.0;
        for (int it = 0; it < 60; ++it) {
            v = xt.transpose() * (xt * v);
            sigma2 = v.norm();
            if (sigma2 <= 0) break;
            v /= sigma2;
        }
        const double lip = std::max(1e-12, c * cw.maxCoeff() * sigma2 / 4.0);
        const double step = 1.0 / lip;

        Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
        Eigen::VectorXd look = theta;
        double t_acc = 1.0;
        for (int iter = 0; iter < 2000; ++iter) {
            const Eigen::VectorXd p =
                (xt * look).unaryExpr([](double z) { return sigmoid(z); });
            const Eigen::VectorXd grad = xt.transpose() * ((p - yv).cwiseProduct(cw) * c);
            Eigen::VectorXd next = look - step * grad;
            for (Eigen::Index j = 0; j < d; ++j)  // soft threshold, intercept skipped
                next[j] = std::copysign(std::max(std::abs(next[j]) - step, 0.0), next[j]);
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
            look = next + ((t_acc - 1.0) / t_next) * (next - theta);
            const double change = (next - theta).cwiseAbs().maxCoeff();
            theta = next;
            t_acc = t_next;
            if (change < 1e-9) break;
        }
        model.w = theta.head(d);
        model.b = theta[d];
    } else {
        input_error("logreg penalty must be 'l1' or 'l2', got ", penalty);
    }
    return model;
}

// ---- gaussian naive bayes ---------------------------------------------------

GnbModel fit_gnb(const Eigen::MatrixXd& x, const std::vector<int>& y, double var_smoothing) {
    const Eigen::Index d = x.cols();
    GnbModel m;
    m.mean0 = Eigen::VectorXd::Zero(d);
    m.mean1 = Eigen::VectorXd::Zero(d);
    m.var0 = Eigen::VectorXd::Zero(d);
    m.var1 = Eigen::VectorXd::Zero(d);

    double n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (y[static_cast<std::size_t>(i)] == 1) {
            m.mean1 += x.row(i).transpose();
            n1 += 1;
        } else {
            m.mean0 += x.row(i).transpose();
            n0 += 1;
        }
    }
    m.mean0 /= n0;
    m.mean1 /= n1;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Eigen::VectorXd row = x.row(i).transpose();
        if (y[static_cast<std::size_t>(i)] == 1)
            m.var1 += (row - m.mean1).cwiseAbs2();
        else
            m.var0 += (row - m.mean0).cwiseAbs2();
    }
    m.var0 /= n0;
    m.var1 /= n1;

    // smoothing by a fraction of the largest overall feature variance
    Eigen::VectorXd total_var(d);
    const Eigen::VectorXd grand = x.colwise().mean().transpose();
    for (Eigen::Index c = 0; c < d; ++c)
        total_var[c] = (x.col(c).array() - grand[c]).square().mean();
    const double eps = var_smoothing * std::max(total_var.maxCoeff(), 1e-300);
    m.var0.array() += eps;
    m.var1.array() += eps;

    m.log_prior0 = std::log(n0 / (n0 + n1));
    m.log_prior1 = std::log(n1 / (n0 + n1));
    return m;
}

double gnb_score(const GnbModel& m, const Eigen::RowVectorXd& row) {
    double l0 = m.log_prior0, l1 = m.log_prior1;
    for (Eigen::Index c = 0; c < row.size(); ++c) {
        const double d0 = row[c] - m.mean0[c];
        const double d1 = row[c] - m.mean1[c];
        l0 += -0.5 * std::log(2.0 * M_PI * m.var0[c]) - d0 * d0 / (2.0 * m.var0[c]);
        l1 += -0.5 * std::log(2.0 * M_PI * m.var1[c]) - d1 * d1 / (2.0 * m.var1[c]);
    }
    // p(class 1 | x)
    const double mx = std::max(l0, l1);
    const double e0 = std::exp(l0 - mx);
    const double e1 = std::exp(l1 - mx);
    return e1 / (e0 + e1);
}

// ---- decision trees ---------------------------------------------------------

struct TreeBuildConfig {
    int max_depth = 0;  // 0 = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    bool regression = false;     // mse splits + newton leaves (boosting)
    int per_split_features = 0;  // 0 = all allowed features at every split
};

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                const Eigen::VectorXd& weight, const Eigen::VectorXd& hessian,
                const TreeBuildConfig& cfg, const std::vector<int>& allowed_features, Rng* rng)
        : x_(x), target_(target), weight_(weight), hessian_(hessian), cfg_(cfg),
          allowed_(allowed_features), rng_(rng) {}

    TreeModel build(const std::vector<Eigen::Index>& rows) {
        TreeModel model;
        grow(rows, 0, model);
        return model;
    }

private:
    double leaf_value(const std::vector<Eigen::Index>& rows) const {
        if (cfg_.regression) {
            double g = 0, h = 0;
            for (Eigen::Index i : rows) {
                g += target_[i];
                h += hessian_[i];
            }
            return g / std::max(h, 1e-12);
        }
        double wpos = 0, wtot = 0;
        for (Eigen::Index i : rows) {
            wtot += weight_[i];
            if (target_[i] > 0.5) wpos += weight_[i];
        }
        return wtot > 0 ? wpos / wtot : 0.5;
    }

    // impurity * total weight for a candidate child, from accumulated sums
    static double gini_cost(double w, double wpos) {
        if (w <= 0) return 0;
        const double p = wpos / w;
        return w * 2.0 * p * (1.0 - p);
    }

    static double sse_cost(double n, double sum, double sum2) {
        if (n <= 0) return 0;
        return sum2 - sum * sum / n;
    }

    bool find_split(const std::vector<Eigen::Index>& rows, int& best_feature,
                    double& best_threshold) const {
        double best_cost = 1e300;
        bool found = false;

        std::vector<int> features = allowed_;
        if (cfg_.per_split_features > 0 &&
            cfg_.per_split_features < static_cast<int>(features.size())) {
            // seeded draw without replacement, order-stable
            std::vector<int> pool = features;
            rng_->shuffle(pool);
            pool.resize(static_cast<std::size_t>(cfg_.per_split_features));
            std::sort(pool.begin(), pool.end());
            features = pool;
        }

        std::vector<Eigen::Index> order(rows);
        for (int f : features) {
            std::sort(order.begin(), order.end(), [this, f](Eigen::Index a, Eigen::Index b) {
                return x_(a, f) != x_(b, f) ? x_(a, f) < x_(b, f) : a < b;
            });

            // prefix accumulators
            double lw = 0, lwpos = 0, ln = 0, lsum = 0, lsum2 = 0;
            double rw = 0, rwpos = 0, rn = 0, rsum = 0, rsum2 = 0;
            for (Eigen::Index i : order) {
                if (cfg_.regression) {
                    rn += 1;
                    rsum += target_[i];
                    rsum2 += target_[i] * target_[i];
                } else {
                    rw += weight_[i];
                    if (target_[i] > 0.5) rwpos += weight_[i];
                }
            }

            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                const Eigen::Index i = order[k];
                if (cfg_.regression) {
                    ln += 1;
                    lsum += target_[i];
                    lsum2 += target_[i] * target_[i];
                    rn -= 1;
                    rsum -= target_[i];
                    rsum2 -= target_[i] * target_[i];
                } else {
                    lw += weight_[i];
                    rw -= weight_[i];
                    if (target_[i] > 0.5) {
                        lwpos += weight_[i];
                        rwpos -= weight_[i];
                    }
                }
                const double v = x_(i, f);
                const double v_next = x_(order[k + 1], f);
                if (v == v_next) continue;
                const auto left_count = static_cast<int>(k + 1);
                const auto right_count = static_cast<int>(order.size() - k - 1);
                if (left_count < cfg_.min_samples_leaf || right_count < cfg_.min_samples_leaf)
                    continue;
                const double cost = cfg_.regression
                                        ? sse_cost(ln, lsum, lsum2) + sse_cost(rn, rsum, rsum2)
                                        : gini_cost(lw, lwpos) + gini_cost(rw, rwpos);
                if (cost < best_cost - 1e-15) {
                    best_cost = cost;
                    best_feature = f;
                    best_threshold = 0.5 * (v + v_next);
                    found = true;
                }
            }
        }
        return found;
    }

    int grow(const std::vector<Eigen::Index>& rows, int depth, TreeModel& model) {
        const int node_id = static_cast<int>(model.nodes.size());
        model.nodes.emplace_back();
        model.nodes.back().value = leaf_value(rows);

        const bool depth_ok = cfg_.max_depth == 0 || depth < cfg_.max_depth;
        bool pure = true;
        for (std::size_t k = 1; k < rows.size(); ++k)
            if (target_[rows[k]] != target_[rows[0]]) {
                pure = false;
                break;
            }
        if (!depth_ok || pure ||
            static_cast<int>(rows.size()) < cfg_.min_samples_split ||
            rows.size() < 2)
            return node_id;

        int feature = -1;
        double threshold = 0;
        if (!find_split(rows, feature, threshold)) return node_id;

        std::vector<Eigen::Index> left, right;
        for (Eigen::Index i : rows) (x_(i, feature) <= threshold ? left : right).push_back(i);

        const int left_id = grow(left, depth + 1, model);
        const int right_id = grow(right, depth + 1, model);
        model.nodes[static_cast<std::size_t>(node_id)].feature = feature;
        model.nodes[static_cast<std::size_t>(node_id)].threshold = threshold;
        model.nodes[static_cast<std::size_t>(node_id)].left = left_id;
        model.nodes[static_cast<std::size_t>(node_id)].right = right_id;
        return node_id;
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& target_;
    const Eigen::VectorXd& weight_;
    const Eigen::VectorXd& hessian_;
    TreeBuildConfig cfg_;
    std::vector<int> allowed_;
    Rng* rng_;
};

std::vector<int> all_features(Eigen::Index d) {
    std::vector<int> f(static_cast<std::size_t>(d));
    std::iota(f.begin(), f.end(), 0);
    return f;
}

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
    std::vector<Eigen::Index> r(static_cast<std::size_t>(n));
    std::iota(r.begin(), r.end(), 0);
    return r;
}

TreeModel fit_tree(const Eigen::MatrixXd& x, const std::vector<int>& y,
                   const Eigen::VectorXd& cw, const HyperParams& params) {
    TreeBuildConfig cfg;
    cfg.max_depth = static_cast<int>(num_param(params, "max_depth", 0));
    cfg.min_samples_split = static_cast<int>(num_param(params, "min_samples_split", 2));
    cfg.min_samples_leaf = static_cast<int>(num_param(params, "min_samples_leaf", 1));

    Eigen::VectorXd target(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        target[i] = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0;
    const Eigen::VectorXd hess = Eigen::VectorXd::Ones(x.rows());
    TreeBuilder builder(x, target, cw, hess, cfg, all_features(x.cols()), nullptr);
    return builder.build(all_rows(x.rows()));
}

ForestModel fit_forest(const Eigen::MatrixXd& x, const std::vector<int>& y,
                       const Eigen::VectorXd& cw, const HyperParams& params,
                       std::uint64_t seed) {
    const int n_trees = static_cast<int>(num_param(params, "n_trees", 100));
    TreeBuildConfig cfg;
    cfg.max_depth = static_cast<int>(num_param(params, "max_depth", 0));
    cfg.min_samples_split = static_cast<int>(num_param(params, "min_samples_split", 2));
    cfg.per_split_features =
        std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols())))));

    Eigen::VectorXd target(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        target[i] = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0;
    const Eigen::VectorXd hess = Eigen::VectorXd::Ones(x.rows());
    const auto features = all_features(x.cols());

    ForestModel forest;
    for (int t = 0; t < n_trees; ++t) {
        Rng rng(mix_seed(seed, 0xf000ULL + static_cast<std::uint64_t>(t)));
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
        for (auto& r : rows)
            r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(x.rows())));
        std::sort(rows.begin(), rows.end());
        TreeBuilder builder(x, target, cw, hess, cfg, features, &rng);
        forest.trees.push_back(builder.build(rows));
    }
    return forest;
}

GboostModel fit_gboost(const Eigen::MatrixXd& x, const std::vector<int>& y,
                       const HyperParams& params, std::uint64_t seed) {
    const int n_trees = static_cast<int>(num_param(params, "n_trees", 100));
    const double lr = num_param(params, "learning_rate", 0.1);
    const double subsample = num_param(params, "subsample", 1.0);
    const double colsample = num_param(params, "colsample", 1.0);
    TreeBuildConfig cfg;
    cfg.max_depth = static_cast<int>(num_param(params, "max_depth", 3));
    cfg.min_samples_split = 2;
    cfg.min_samples_leaf = 1;
    cfg.regression = true;

    const Eigen::Index n = x.rows();
    double pos = 0;
    for (int v : y) pos += v == 1 ? 1.0 : 0.0;
    const double prior = std::clamp(pos / static_cast<double>(n), 1e-12, 1.0 - 1e-12);

    GboostModel model;
    model.f0 = std::log(prior / (1.0 - prior));
    model.learning_rate = lr;

    Eigen::VectorXd f = Eigen::VectorXd::Constant(n, model.f0);
    const auto features = all_features(x.cols());

    for (int t = 0; t < n_trees; ++t) {
        Eigen::VectorXd grad(n), hess(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double p = sigmoid(f[i]);
            grad[i] = (y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0) - p;
            hess[i] = std::max(p * (1.0 - p), 1e-12);
        }

        Rng rng(mix_seed(seed, 0xb000ULL + static_cast<std::uint64_t>(t)));
        std::vector<Eigen::Index> rows = all_rows(n);
        if (subsample < 1.0) {
            rng.shuffle(rows);
            rows.resize(std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(subsample * static_cast<double>(n)))));
            std::sort(rows.begin(), rows.end());
        }
        std::vector<int> cols = features;
        if (colsample < 1.0) {
            rng.shuffle(cols);
            cols.resize(std::max<std::size_t>(
                1, static_cast<std::size_t>(
                       std::floor(colsample * static_cast<double>(features.size())))));
            std::sort(cols.begin(), cols.end());
        }

        const Eigen::VectorXd unit = Eigen::VectorXd::Ones(n);
        TreeBuilder builder(x, grad, unit, hess, cfg, cols, &rng);
        TreeModel tree = builder.build(rows);
        for (Eigen::Index i = 0; i < n; ++i) f[i] += lr * tree.predict(x.row(i));
        model.trees.push_back(std::move(tree));
    }
    return model;
}

double gboost_margin(const GboostModel& m, const Eigen::RowVectorXd& row) {
    double f = m.f0;
    for (const auto& tree : m.trees) f += m.learning_rate * tree.predict(row);
    return f;
}

// ---- adaboost (SAMME, depth-1 stumps) --------------------------------------

AdaModel fit_adaboost(const Eigen::MatrixXd& x, const std::vector<int>& y,
                      const HyperParams& params) {
    const int n_estimators = static_cast<int>(num_param(params, "n_estimators", 50));
    const double lr = num_param(params, "learning_rate", 0.1);
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();

    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    AdaModel model;

    for (int t = 0; t < n_estimators; ++t) {
        // weighted-error-optimal stump over all features and midpoints
        double best_err = 1e300;
        Stump best;
        bool found = false;
        for (Eigen::Index f = 0; f < d; ++f) {
            std::vector<Eigen::Index> order = all_rows(n);
            std::sort(order.begin(), order.end(), [&x, f](Eigen::Index a, Eigen::Index b) {
                return x(a, f) != x(b, f) ? x(a, f) < x(b, f) : a < b;
            });
            double left_w1 = 0, left_w0 = 0, right_w1 = 0, right_w0 = 0;
            for (Eigen::Index i = 0; i < n; ++i)
                (y[static_cast<std::size_t>(i)] == 1 ? right_w1 : right_w0) += w[i];
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                const Eigen::Index i = order[k];
                if (y[static_cast<std::size_t>(i)] == 1) {
                    left_w1 += w[i];
                    right_w1 -= w[i];
                } else {
                    left_w0 += w[i];
                    right_w0 -= w[i];
                }
                const double v = x(i, f);
                const double v_next = x(order[k + 1], f);
                if (v == v_next) continue;
                // vote_right = 1: right side called positive
                const double err_pos_right = left_w1 + right_w0;
                const double err_pos_left = left_w0 + right_w1;
                if (err_pos_right < best_err - 1e-15) {
                    best_err = err_pos_right;
                    best = {static_cast<int>(f), 0.5 * (v + v_next), 1};
                    found = true;
                }
                if (err_pos_left < best_err - 1e-15) {
                    best_err = err_pos_left;
                    best = {static_cast<int>(f), 0.5 * (v + v_next), 0};
                    found = true;
                }
            }
        }
        if (!found) break;
        const double err = std::clamp(best_err, 1e-10, 1.0 - 1e-10);
        if (err >= 0.5) break;  // no better than chance under current weights

        const double alpha = lr * std::log((1.0 - err) / err);
        model.stumps.push_back(best);
        model.alpha.push_back(alpha);

        for (Eigen::Index i = 0; i < n; ++i) {
            const int pred = x(i, best.feature) > best.threshold ? best.vote_right
                                                                 : 1 - best.vote_right;
            if (pred != (y[static_cast<std::size_t>(i)] == 1 ? 1 : 0))
                w[i] *= std::exp(alpha);
        }
        w /= w.sum();
        if (best_err < 1e-10) break;  // perfect stump
    }
    return model;
}

double ada_score(const AdaModel& m, const Eigen::RowVectorXd& row) {
    if (m.stumps.empty()) return 0.5;
    double vote = 0, total = 0;
    for (std::size_t t = 0; t < m.stumps.size(); ++t) {
        const Stump& s = m.stumps[t];
        const int pred = row[s.feature] > s.threshold ? s.vote_right : 1 - s.vote_right;
        vote += m.alpha[t] * static_cast<double>(pred);
        total += m.alpha[t];
    }
    return total > 0 ? vote / total : 0.5;
}

// ---- linear SVM (deterministic subgradient descent) -------------------------

SvmLinearModel fit_svm_linear(const Eigen::MatrixXd& x, const std::vector<int>& y,
                              const Eigen::VectorXd& cw, double c) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    Eigen::VectorXd ys(n);
    for (Eigen::Index i = 0; i < n; ++i) ys[i] = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;

    SvmLinearModel model;
    model.w = Eigen::VectorXd::Zero(d);
    model.b = 0;

    const int iters = 2000;
    Eigen::VectorXd w_avg = Eigen::VectorXd::Zero(d);
    double b_avg = 0;
    int avg_count = 0;
    for (int t = 0; t < iters; ++t) {
        Eigen::VectorXd grad_w = model.w;
        double grad_b = 0;
        const Eigen::VectorXd raw = ((x * model.w).array() + model.b).matrix();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (ys[i] * raw[i] < 1.0) {
                grad_w -= c * cw[i] * ys[i] * x.row(i).transpose();
                grad_b -= c * cw[i] * ys[i];
            }
        }
        const double eta = 1.0 / (1.0 + static_cast<double>(t));
        model.w -= eta * grad_w;
        model.b -= eta * grad_b;
        if (t >= iters / 2) {  // tail averaging
            w_avg += model.w;
            b_avg += model.b;
            ++avg_count;
        }
    }
    model.w = w_avg / static_cast<double>(avg_count);
    model.b = b_avg / static_cast<double>(avg_count);

    const Eigen::VectorXd train_margins = ((x * model.w).array() + model.b).matrix();
    model.platt = fit_platt(train_margins, y);
    return model;
}

}  // namespace

// ---- RBF SVM via SMO ---------------------------------------------------------

SmoResult smo_solve(const Eigen::MatrixXd& k, const Eigen::VectorXd& ys,
                    const Eigen::VectorXd& c_per_sample, double tol) {
    const Eigen::Index n = k.rows();
    SmoResult r;
    r.alpha = Eigen::VectorXd::Zero(n);
    r.b = 0;

    auto f_of = [&](Eigen::Index i) {
        double s = r.b;
        for (Eigen::Index j = 0; j < n; ++j)
            if (r.alpha[j] > 0) s += r.alpha[j] * ys[j] * k(j, i);
        return s;
    };

    auto take_step = [&](Eigen::Index i1, Eigen::Index i2, double e2) -> bool {
        if (i1 == i2) return false;
        const double a1 = r.alpha[i1], a2 = r.alpha[i2];
        const double y1 = ys[i1], y2 = ys[i2];
        const double e1 = f_of(i1) - y1;
        const double s = y1 * y2;
        double lo, hi;
        if (y1 != y2) {
            lo = std::max(0.0, a2 - a1);
            hi = std::min(c_per_sample[i2], c_per_sample[i1] + a2 - a1);
        } else {
            lo = std::max(0.0, a1 + a2 - c_per_sample[i1]);
            hi = std::min(c_per_sample[i2], a1 + a2);
        }
        if (lo >= hi) return false;
        const double eta = k(i1, i1) + k(i2, i2) - 2.0 * k(i1, i2);
        if (eta <= 1e-12) return false;
        double a2_new = a2 + y2 * (e1 - e2) / eta;
        a2_new = std::clamp(a2_new, lo, hi);
        if (std::abs(a2_new - a2) < 1e-12 * (a2_new + a2 + 1e-12)) return false;
        const double a1_new = a1 + s * (a2 - a2_new);

        const double b1 = r.b - e1 - y1 * (a1_new - a1) * k(i1, i1) -
                          y2 * (a2_new - a2) * k(i1, i2);
        const double b2 = r.b - e2 - y1 * (a1_new - a1) * k(i1, i2) -
                          y2 * (a2_new - a2) * k(i2, i2);
        if (a1_new > 0 && a1_new < c_per_sample[i1])
            r.b = b1;
        else if (a2_new > 0 && a2_new < c_per_sample[i2])
            r.b = b2;
        else
            r.b = 0.5 * (b1 + b2);

        r.alpha[i1] = a1_new;
        r.alpha[i2] = a2_new;
        return true;
    };

    auto examine = [&](Eigen::Index i2) -> int {
        const double y2 = ys[i2];
        const double a2 = r.alpha[i2];
        const double e2 = f_of(i2) - y2;
        const double r2 = e2 * y2;
        if ((r2 < -tol && a2 < c_per_sample[i2]) || (r2 > tol && a2 > 0)) {
            // second choice: largest |e1 - e2| among non-bound points
            Eigen::Index best = -1;
            double best_gap = -1;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (r.alpha[j] <= 0 || r.alpha[j] >= c_per_sample[j]) continue;
                const double gap = std::abs((f_of(j) - ys[j]) - e2);
                if (gap > best_gap) {
                    best_gap = gap;
                    best = j;
                }
            }
            if (best >= 0 && take_step(best, i2, e2)) return 1;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (r.alpha[j] <= 0 || r.alpha[j] >= c_per_sample[j]) continue;
                if (take_step(j, i2, e2)) return 1;
            }
            for (Eigen::Index j = 0; j < n; ++j)
                if (take_step(j, i2, e2)) return 1;
        }
        return 0;
    };

    bool examine_all = true;
    int changed = 0;
    int guard = 0;
    const int guard_limit = 200;
    while ((changed > 0 || examine_all) && guard++ < guard_limit) {
        changed = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!examine_all && (r.alpha[i] <= 0 || r.alpha[i] >= c_per_sample[i])) continue;
            changed += examine(i);
        }
        if (examine_all)
            examine_all = false;
        else if (changed == 0)
            examine_all = true;
    }
    return r;
}

namespace {

SvmRbfModel fit_svm_rbf(const Eigen::MatrixXd& x, const std::vector<int>& y,
                        const Eigen::VectorXd& cw, double c, const std::string& gamma_mode) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();

    double gamma;
    if (gamma_mode == "scale") {
        const double mean_all = x.mean();
        const double var_all = (x.array() - mean_all).square().mean();
        gamma = 1.0 / (static_cast<double>(d) * std::max(var_all, 1e-12));
    } else if (gamma_mode == "auto") {
        gamma = 1.0 / static_cast<double>(d);
    } else {
        gamma = parse_gamma(gamma_mode);
    }

    Eigen::VectorXd ys(n);
    for (Eigen::Index i = 0; i < n; ++i) ys[i] = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;

    // full kernel matrix
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dist2 = (x.row(i) - x.row(j)).squaredNorm();
            k(i, j) = k(j, i) = std::exp(-gamma * dist2);
        }
    }

    const Eigen::VectorXd c_per = cw * c;
    const SmoResult sol = smo_solve(k, ys, c_per);

    SvmRbfModel model;
    model.gamma = gamma;
    model.b = sol.b;
    std::vector<Eigen::Index> sv;
    for (Eigen::Index i = 0; i < n; ++i)
        if (sol.alpha[i] > 1e-12) sv.push_back(i);
    model.support.resize(static_cast<Eigen::Index>(sv.size()), d);
    model.alpha_y.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t i = 0; i < sv.size(); ++i) {
        model.support.row(static_cast<Eigen::Index>(i)) = x.row(sv[i]);
        model.alpha_y[static_cast<Eigen::Index>(i)] = sol.alpha[sv[i]] * ys[sv[i]];
    }

    Eigen::VectorXd margins(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double f = model.b;
        for (Eigen::Index s = 0; s < model.support.rows(); ++s) {
            const double dist2 = (x.row(i) - model.support.row(s)).squaredNorm();
            f += model.alpha_y[s] * std::exp(-gamma * dist2);
        }
        margins[i] = f;
    }
    model.platt = fit_platt(margins, y);
    return model;
}

// ---- k nearest neighbors ----------------------------------------------------

double knn_score(const KnnModel& m, const Eigen::RowVectorXd& row) {
    const Eigen::Index n = m.x.rows();
    const int k = std::min<int>(m.k, static_cast<int>(n));

    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = m.manhattan ? (m.x.row(i) - row).cwiseAbs().sum()
                                     : (m.x.row(i) - row).norm();
        dist[static_cast<std::size_t>(i)] = {d, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

    if (m.distance_weighted) {
        // exact hits dominate: they vote alone with unit weight
        bool any_zero = false;
        for (int j = 0; j < k; ++j) any_zero |= dist[static_cast<std::size_t>(j)].first == 0.0;
        double num = 0, den = 0;
        for (int j = 0; j < k; ++j) {
            const auto& [d, i] = dist[static_cast<std::size_t>(j)];
            if (any_zero && d > 0.0) continue;
            const double w = any_zero ? 1.0 : 1.0 / d;
            num += w * (m.y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0);
            den += w;
        }
        return num / den;
    }
    double pos = 0;
    for (int j = 0; j < k; ++j)
        pos += m.y[static_cast<std::size_t>(dist[static_cast<std::size_t>(j)].second)] == 1 ? 1.0
                                                                                            : 0.0;
    return pos / static_cast<double>(k);
}

// ---- MLP (centralized training with early stopping) -------------------------

MlpModel fit_mlp(const Eigen::MatrixXd& x, const std::vector<int>& y,
                 const Eigen::MatrixXd& x_val, const std::vector<int>& y_val,
                 const HyperParams& params, std::uint64_t seed) {
    if (x_val.rows() == 0) input_error("mlp requires a validation set for early stopping");

    MlpModel model;
    model.arch = MlpArchitecture::for_dim(static_cast<int>(x.cols()),
                                          static_cast<int>(num_param(params, "hidden_width", 64)));
    model.params = mlp_init(model.arch, seed);

    MlpTrainConfig cfg;
    cfg.learning_rate = num_param(params, "learning_rate", 1e-3);
    cfg.batch_size = static_cast<int>(num_param(params, "batch_size", 8));
    cfg.stream_seed = mix_seed(seed, 0);  // client-0 stream, shared with federated
    cfg.use_dropout = true;

    const int max_epochs = static_cast<int>(num_param(params, "max_epochs", 200));
    const int patience = static_cast<int>(num_param(params, "patience", 10));

    MlpParams best = model.params;
    double best_loss = mlp_eval_loss(model.arch, model.params, x_val, y_val);
    int stale = 0;
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        mlp_run_epoch(model.arch, model.params, x, y, cfg, epoch);
        const double vloss = mlp_eval_loss(model.arch, model.params, x_val, y_val);
        if (vloss < best_loss) {
            best_loss = vloss;
            best = model.params;
            stale = 0;
        } else if (++stale >= patience) {
            break;
        }
    }
    model.params = best;
    return model;
}

}  // namespace

// ===========================================================================
// fit / predict / persistence
// ===========================================================================

TrainedModel fit(const ModelSpec& spec, const Eigen::MatrixXd& x, const std::vector<int>& y,
                 const Eigen::MatrixXd& x_val, const std::vector<int>& y_val) {
    validate_spec(spec);
    if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != y.size())
        input_error("fit: bad training shape");
    check_binary(y);
    if (!x.allFinite()) input_error("fit: training features contain non-finite values");

    TrainedModel model;
    model.family = spec.family;
    model.hyperparams = spec.params;
    model.seed = spec.seed;
    model.input_dim = x.cols();

    // supervised selection on training data only
    const std::string method = str_param(spec.params, "select_method", "none");
    if (method == "none") {
        model.selected.resize(static_cast<std::size_t>(x.cols()));
        std::iota(model.selected.begin(), model.selected.end(), 0);
    } else {
        const double frac = num_param(spec.params, "select_k_frac", 1.0);
        const auto k = std::max<Eigen::Index>(
            1, static_cast<Eigen::Index>(std::floor(frac * static_cast<double>(x.cols()))));
        const select::FeatureScores scores = method == "anova_f"
                                                 ? select::anova_f(x, y)
                                                 : select::mutual_info(x, y);
        model.selected = select::select_top_k(scores, k);
    }

    auto take_cols = [&model](const Eigen::MatrixXd& src) {
        Eigen::MatrixXd out(src.rows(), static_cast<Eigen::Index>(model.selected.size()));
        for (std::size_t j = 0; j < model.selected.size(); ++j)
            out.col(static_cast<Eigen::Index>(j)) = src.col(model.selected[j]);
        return out;
    };

    const Eigen::MatrixXd x_sel = take_cols(x);
    model.standardizer.fit(x_sel);
    const Eigen::MatrixXd xs = model.standardizer.apply(x_sel);
    if (!xs.allFinite()) input_error("fit: features are non-finite after standardization");

    Eigen::MatrixXd xvs;
    if (x_val.rows() > 0) {
        if (x_val.cols() != x.cols()) input_error("fit: validation dimension mismatch");
        xvs = model.standardizer.apply(take_cols(x_val));
    }

    const std::string cw_mode = str_param(spec.params, "class_weight", "none");
    const Eigen::VectorXd cw = class_weights(y, cw_mode);

    switch (spec.family) {
        case Family::logreg:
            model.payload = fit_logreg(xs, y, cw, num_param(spec.params, "C", 1.0),
                                       str_param(spec.params, "penalty", "l2"));
            break;
        case Family::gaussian_nb:
            model.payload = fit_gnb(xs, y, num_param(spec.params, "var_smoothing", 1e-9));
            break;
        case Family::knn: {
            KnnModel m;
            m.x = xs;
            m.y = y;
            m.k = static_cast<int>(num_param(spec.params, "k", 5));
            m.manhattan = str_param(spec.params, "metric", "euclidean") == "manhattan";
            m.distance_weighted = str_param(spec.params, "weights", "uniform") == "distance";
            if (m.k < 1) input_error("knn: k must be >= 1");
            model.payload = std::move(m);
            break;
        }
        case Family::tree:
            model.payload = fit_tree(xs, y, cw, spec.params);
            break;
        case Family::random_forest:
            model.payload = fit_forest(xs, y, cw, spec.params, spec.seed);
            break;
        case Family::gboost:
            model.payload = fit_gboost(xs, y, spec.params, spec.seed);
            break;
        case Family::adaboost:
            model.payload = fit_adaboost(xs, y, spec.params);
            break;
        case Family::svm_linear:
            model.payload = fit_svm_linear(xs, y, cw, num_param(spec.params, "C", 1.0));
            break;
        case Family::svm_rbf:
            model.payload = fit_svm_rbf(xs, y, cw, num_param(spec.params, "C", 1.0),
                                        str_param(spec.params, "gamma", "scale"));
            break;
        case Family::mlp:
            model.payload = fit_mlp(xs, y, xvs, y_val, spec.params, spec.seed);
            break;
    }
    return model;
}

TrainedModel fit(const ModelSpec& spec, const FeatureMatrix& train, const FeatureMatrix& val) {
    return fit(spec, train.x, train.labels, val.x, val.labels);
}

Eigen::VectorXd TrainedModel::predict_scores(const Eigen::MatrixXd& x) const {
    if (x.cols() != input_dim)
        input_error("predict: feature dimension ", x.cols(), " does not match model (",
                    input_dim, ")");

    Eigen::MatrixXd sel(x.rows(), static_cast<Eigen::Index>(selected.size()));
    for (std::size_t j = 0; j < selected.size(); ++j)
        sel.col(static_cast<Eigen::Index>(j)) = x.col(selected[j]);
    const Eigen::MatrixXd xs = standardizer.apply(sel);

    Eigen::VectorXd scores(x.rows());
    if (const auto* m = std::get_if<LogregModel>(&payload)) {
        scores = ((xs * m->w).array() + m->b)
                     .unaryExpr([](double z) { return sigmoid(z); })
                     .matrix();
    } else if (const auto* m = std::get_if<GnbModel>(&payload)) {
        for (Eigen::Index i = 0; i < xs.rows(); ++i) scores[i] = gnb_score(*m, xs.row(i));
    } else if (const auto* m = std::get_if<KnnModel>(&payload)) {
        for (Eigen::Index i = 0; i < xs.rows(); ++i) scores[i] = knn_score(*m, xs.row(i));
    } else if (const auto* m = std::get_if<TreeModel>(&payload)) {
        for (Eigen::Index i = 0; i < xs.rows(); ++i) scores[i] = m->predict(xs.row(i));
    } else if (const auto* m = std::get_if<ForestModel>(&payload)) {
        for (Eigen::Index i = 0; i < xs.rows(); ++i) {
            double s = 0;
            for (const auto& tree : m->trees) s += tree.predict(xs.row(i));
            scores[i] = m->trees.empty() ? 0.5 : s / static_cast<double>(m->trees.size());
        }
    } else if (const auto* m = std::get_if<GboostModel>(&payload)) {
        for (Eigen::Index i = 0; i < xs.rows(); ++i)
            scores[i] = sigmoid(gboost_margin(*m, xs.row(i)));
    } else if (const auto* m = std::get_if<AdaModel>(&payload)) {
        for (Eigen::Index i = 0; i < xs.rows(); ++i) scores[i] = ada_score(*m, xs.row(i));
    } else if (const auto* m = std::get_if<SvmLinearModel>(&payload)) {
        for (Eigen::Index i = 0; i < xs.rows(); ++i)
            scores[i] = m->platt(xs.row(i) * m->w + m->b);
    } else if (const auto* m = std::get_if<SvmRbfModel>(&payload)) {
        for (Eigen::Index i = 0; i < xs.rows(); ++i) {
            double f = m->b;
            for (Eigen::Index s = 0; s < m->support.rows(); ++s)
                f += m->alpha_y[s] *
                     std::exp(-m->gamma * (xs.row(i) - m->support.row(s)).squaredNorm());
            scores[i] = m->platt(f);
        }
    } else if (const auto* m = std::get_if<MlpModel>(&payload)) {
        scores = mlp_scores(m->arch, m->params, xs);
    }
    // scores are probabilities or calibrated values by construction
    return scores.cwiseMax(0.0).cwiseMin(1.0);
}

std::vector<int> TrainedModel::predict_labels(const Eigen::MatrixXd& x, double threshold) const {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        input_error("prediction threshold must lie in [0, 1], got ", threshold);
    const Eigen::VectorXd scores = predict_scores(x);
    std::vector<int> labels(static_cast<std::size_t>(scores.size()));
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        labels[static_cast<std::size_t>(i)] = scores[i] >= threshold ? 1 : 0;
    return labels;
}

// ===========================================================================
// persistence: versioned text artifact, doubles stored as hexfloat so a
// reloaded model reproduces predictions bitwise
// ===========================================================================

namespace {

using nlohmann::json;

std::string hexd(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double unhexd(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

json vec_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(hexd(v[i]));
    return arr;
}

Eigen::VectorXd json_vec(const json& arr) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = unhexd(arr[i].get<std::string>());
    return v;
}

json mat_json(const Eigen::MatrixXd& m) {
    json obj;
    obj["rows"] = m.rows();
    obj["cols"] = m.cols();
    json data = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) data.push_back(hexd(m(r, c)));
    obj["data"] = std::move(data);
    return obj;
}

Eigen::MatrixXd json_mat(const json& obj) {
    Eigen::MatrixXd m(obj.at("rows").get<Eigen::Index>(), obj.at("cols").get<Eigen::Index>());
    const json& data = obj.at("data");
    std::size_t at = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            m(r, c) = unhexd(data[at++].get<std::string>());
    return m;
}

json tree_json(const TreeModel& t) {
    json nodes = json::array();
    for (const TreeNode& n : t.nodes)
        nodes.push_back({n.feature, hexd(n.threshold), n.left, n.right, hexd(n.value)});
    return nodes;
}

TreeModel json_tree(const json& nodes) {
    TreeModel t;
    for (const auto& n : nodes) {
        TreeNode node;
        node.feature = n[0].get<int>();
        node.threshold = unhexd(n[1].get<std::string>());
        node.left = n[2].get<int>();
        node.right = n[3].get<int>();
        node.value = unhexd(n[4].get<std::string>());
        t.nodes.push_back(node);
    }
    return t;
}

}  // namespace

void TrainedModel::save(const std::string& path) const {
    json doc;
    doc["format"] = "mw-model";
    doc["version"] = 1;
    doc["family"] = to_string(family);
    doc["seed"] = seed;
    doc["input_dim"] = input_dim;
    doc["selected"] = selected;

    json hyper_num = json::object(), hyper_str = json::object();
    for (const auto& [key, value] : hyperparams) {
        if (const double* v = std::get_if<double>(&value))
            hyper_num[key] = hexd(*v);
        else
            hyper_str[key] = std::get<std::string>(value);
    }
    doc["hyper_num"] = hyper_num;
    doc["hyper_str"] = hyper_str;
    doc["standardizer"] = {{"mean", vec_json(standardizer.mean)},
                           {"sd", vec_json(standardizer.sd)}};

    json p;
    if (const auto* m = std::get_if<LogregModel>(&payload)) {
        p = {{"w", vec_json(m->w)}, {"b", hexd(m->b)}};
    } else if (const auto* m = std::get_if<GnbModel>(&payload)) {
        p = {{"mean0", vec_json(m->mean0)}, {"mean1", vec_json(m->mean1)},
             {"var0", vec_json(m->var0)},   {"var1", vec_json(m->var1)},
             {"log_prior0", hexd(m->log_prior0)}, {"log_prior1", hexd(m->log_prior1)}};
    } else if (const auto* m = std::get_if<KnnModel>(&payload)) {
        p = {{"x", mat_json(m->x)},
             {"y", m->y},
             {"k", m->k},
             {"manhattan", m->manhattan},
             {"distance_weighted", m->distance_weighted}};
    } else if (const auto* m = std::get_if<TreeModel>(&payload)) {
        p = {{"nodes", tree_json(*m)}};
    } else if (const auto* m = std::get_if<ForestModel>(&payload)) {
        json trees = json::array();
        for (const auto& t : m->trees) trees.push_back(tree_json(t));
        p = {{"trees", trees}};
    } else if (const auto* m = std::get_if<GboostModel>(&payload)) {
        json trees = json::array();
        for (const auto& t : m->trees) trees.push_back(tree_json(t));
        p = {{"f0", hexd(m->f0)}, {"learning_rate", hexd(m->learning_rate)}, {"trees", trees}};
    } else if (const auto* m = std::get_if<AdaModel>(&payload)) {
        json stumps = json::array();
        for (const auto& s : m->stumps)
            stumps.push_back({s.feature, hexd(s.threshold), s.vote_right});
        json alpha = json::array();
        for (double a : m->alpha) alpha.push_back(hexd(a));
        p = {{"stumps", stumps}, {"alpha", alpha}};
    } else if (const auto* m = std::get_if<SvmLinearModel>(&payload)) {
        p = {{"w", vec_json(m->w)},
             {"b", hexd(m->b)},
             {"platt_a", hexd(m->platt.a)},
             {"platt_b", hexd(m->platt.b)}};
    } else if (const auto* m = std::get_if<SvmRbfModel>(&payload)) {
        p = {{"support", mat_json(m->support)}, {"alpha_y", vec_json(m->alpha_y)},
             {"b", hexd(m->b)},                 {"gamma", hexd(m->gamma)},
             {"platt_a", hexd(m->platt.a)},     {"platt_b", hexd(m->platt.b)}};
    } else if (const auto* m = std::get_if<MlpModel>(&payload)) {
        json w = json::array(), b = json::array(), gamma = json::array(), beta = json::array();
        json rm = json::array(), rv = json::array();
        for (const auto& layer : m->params.w) w.push_back(mat_json(layer));
        for (const auto& v : m->params.b) b.push_back(vec_json(v));
        for (const auto& v : m->params.gamma) gamma.push_back(vec_json(v));
        for (const auto& v : m->params.beta) beta.push_back(vec_json(v));
        for (const auto& v : m->params.run_mean) rm.push_back(vec_json(v));
        for (const auto& v : m->params.run_var) rv.push_back(vec_json(v));
        p = {{"arch",
              {{"input_dim", m->arch.input_dim},
               {"hidden_layers", m->arch.hidden_layers},
               {"hidden_width", m->arch.hidden_width},
               {"dropout", hexd(m->arch.dropout)},
               {"batch_norm", m->arch.batch_norm}}},
             {"w", w},
             {"b", b},
             {"gamma", gamma},
             {"beta", beta},
             {"run_mean", rm},
             {"run_var", rv},
             {"w_out", mat_json(m->params.w_out)},
             {"b_out", vec_json(m->params.b_out)}};
    }
    doc["payload"] = std::move(p);

    std::ofstream out(path);
    if (!out) input_error("cannot write model artifact: ", path);
    out << doc.dump(1) << "\n";
}

TrainedModel TrainedModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) input_error("cannot open model artifact: ", path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        input_error("malformed model artifact ", path, ": ", e.what());
    }
    if (doc.value("format", "") != "mw-model" || doc.value("version", 0) != 1)
        input_error("unsupported model artifact format in ", path);

    TrainedModel model;
    model.family = family_from_string(doc.at("family").get<std::string>());
    model.seed = doc.at("seed").get<std::uint64_t>();
    model.input_dim = doc.at("input_dim").get<Eigen::Index>();
    model.selected = doc.at("selected").get<std::vector<Eigen::Index>>();
    for (auto& [key, value] : doc.at("hyper_num").items())
        model.hyperparams[key] = unhexd(value.get<std::string>());
    for (auto& [key, value] : doc.at("hyper_str").items())
        model.hyperparams[key] = value.get<std::string>();
    model.standardizer.mean = json_vec(doc.at("standardizer").at("mean"));
    model.standardizer.sd = json_vec(doc.at("standardizer").at("sd"));

    const json& p = doc.at("payload");
    switch (model.family) {
        case Family::logreg: {
            LogregModel m;
            m.w = json_vec(p.at("w"));
            m.b = unhexd(p.at("b").get<std::string>());
            model.payload = std::move(m);
            break;
        }
        case Family::gaussian_nb: {
            GnbModel m;
            m.mean0 = json_vec(p.at("mean0"));
            m.mean1 = json_vec(p.at("mean1"));
            m.var0 = json_vec(p.at("var0"));
            m.var1 = json_vec(p.at("var1"));
            m.log_prior0 = unhexd(p.at("log_prior0").get<std::string>());
            m.log_prior1 = unhexd(p.at("log_prior1").get<std::string>());
            model.payload = std::move(m);
            break;
        }
        case Family::knn: {
            KnnModel m;
            m.x = json_mat(p.at("x"));
            m.y = p.at("y").get<std::vector<int>>();
            m.k = p.at("k").get<int>();
            m.manhattan = p.at("manhattan").get<bool>();
            m.distance_weighted = p.at("distance_weighted").get<bool>();
            model.payload = std::move(m);
            break;
        }
        case Family::tree:
            model.payload = json_tree(p.at("nodes"));
            break;
        case Family::random_forest: {
            ForestModel m;
            for (const auto& t : p.at("trees")) m.trees.push_back(json_tree(t));
            model.payload = std::move(m);
            break;
        }
        case Family::gboost: {
            GboostModel m;
            m.f0 = unhexd(p.at("f0").get<std::string>());
            m.learning_rate = unhexd(p.at("learning_rate").get<std::string>());
            for (const auto& t : p.at("trees")) m.trees.push_back(json_tree(t));
            model.payload = std::move(m);
            break;
        }
        case Family::adaboost: {
            AdaModel m;
            for (const auto& s : p.at("stumps")) {
                Stump stump;
                stump.feature = s[0].get<int>();
                stump.threshold = unhexd(s[1].get<std::string>());
                stump.vote_right = s[2].get<int>();
                m.stumps.push_back(stump);
            }
            for (const auto& a : p.at("alpha")) m.alpha.push_back(unhexd(a.get<std::string>()));
            model.payload = std::move(m);
            break;
        }
        case Family::svm_linear: {
            SvmLinearModel m;
            m.w = json_vec(p.at("w"));
            m.b = unhexd(p.at("b").get<std::string>());
            m.platt.a = unhexd(p.at("platt_a").get<std::string>());
            m.platt.b = unhexd(p.at("platt_b").get<std::string>());
            model.payload = std::move(m);
            break;
        }
        case Family::svm_rbf: {
            SvmRbfModel m;
            m.support = json_mat(p.at("support"));
            m.alpha_y = json_vec(p.at("alpha_y"));
            m.b = unhexd(p.at("b").get<std::string>());
            m.gamma = unhexd(p.at("gamma").get<std::string>());
            m.platt.a = unhexd(p.at("platt_a").get<std::string>());
            m.platt.b = unhexd(p.at("platt_b").get<std::string>());
            model.payload = std::move(m);
            break;
        }
        case Family::mlp: {
            MlpModel m;
            const json& arch = p.at("arch");
            m.arch.input_dim = arch.at("input_dim").get<int>();
            m.arch.hidden_layers = arch.at("hidden_layers").get<int>();
            m.arch.hidden_width = arch.at("hidden_width").get<int>();
            m.arch.dropout = unhexd(arch.at("dropout").get<std::string>());
            m.arch.batch_norm = arch.at("batch_norm").get<bool>();
            for (const auto& layer : p.at("w")) m.params.w.push_back(json_mat(layer));
            for (const auto& v : p.at("b")) m.params.b.push_back(json_vec(v));
            for (const auto& v : p.at("gamma")) m.params.gamma.push_back(json_vec(v));
            for (const auto& v : p.at("beta")) m.params.beta.push_back(json_vec(v));
            for (const auto& v : p.at("run_mean")) m.params.run_mean.push_back(json_vec(v));
            for (const auto& v : p.at("run_var")) m.params.run_var.push_back(json_vec(v));
            m.params.w_out = json_mat(p.at("w_out"));
            m.params.b_out = json_vec(p.at("b_out"));
            model.payload = std::move(m);
            break;
        }
    }
    return model;
}

}  // namespace mw::models
