#include "mw/mlp.hpp"

#include <cmath>

#include "mw/error.hpp"
#include "mw/rng.hpp"

namespace mw::models {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

struct LayerCache {
    Eigen::MatrixXd input;   // n x fan_in
    Eigen::MatrixXd z;       // n x width, pre batch-norm
    Eigen::MatrixXd xhat;    // normalized
    Eigen::MatrixXd bn_out;  // gamma * xhat + beta
    Eigen::MatrixXd out;     // after relu (+ dropout)
    Eigen::MatrixXd mask;    // dropout mask (scaled), empty when off
    Eigen::VectorXd mu;
    Eigen::VectorXd var;
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    Eigen::MatrixXd probs;  // n x 2
};

struct MlpGrads {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b, gamma, beta;
    Eigen::MatrixXd w_out;
    Eigen::VectorXd b_out;
};

double forward_train(const MlpArchitecture& arch, MlpParams& params, const Eigen::MatrixXd& x,
                     const std::vector<int>& y, const std::vector<Eigen::MatrixXd>* masks,
                     bool update_running, ForwardCache& cache) {
    const Eigen::Index n = x.rows();
    cache.layers.resize(static_cast<std::size_t>(arch.hidden_layers));

    Eigen::MatrixXd h = x;
    for (int l = 0; l < arch.hidden_layers; ++l) {
        auto& lc = cache.layers[static_cast<std::size_t>(l)];
        const auto lu = static_cast<std::size_t>(l);
        lc.input = h;
        lc.z = (h * params.w[lu].transpose()).rowwise() + params.b[lu].transpose();

        if (arch.batch_norm) {
            lc.mu = lc.z.colwise().mean();
            Eigen::MatrixXd centered = lc.z.rowwise() - lc.mu.transpose();
            lc.var = centered.array().square().colwise().mean().matrix();
            Eigen::VectorXd inv_sd = (lc.var.array() + kBnEps).sqrt().inverse().matrix();
            lc.xhat = centered * inv_sd.asDiagonal();
            lc.bn_out =
                (lc.xhat * params.gamma[lu].asDiagonal()).rowwise() + params.beta[lu].transpose();
            if (update_running) {
                params.run_mean[lu] = kBnMomentum * params.run_mean[lu] +
                                      (1.0 - kBnMomentum) * lc.mu;
                params.run_var[lu] =
                    kBnMomentum * params.run_var[lu] + (1.0 - kBnMomentum) * lc.var;
            }
        } else {
            lc.bn_out = lc.z;
        }

        lc.out = lc.bn_out.cwiseMax(0.0);
        if (masks) {
            lc.mask = (*masks)[lu];
            lc.out = lc.out.cwiseProduct(lc.mask);
        }
        h = lc.out;
    }

    Eigen::MatrixXd logits = (h * params.w_out.transpose()).rowwise() + params.b_out.transpose();
    if (!logits.allFinite()) runtime_error("mlp forward pass produced non-finite values");

    cache.probs.resize(n, 2);
    double loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = std::max(logits(i, 0), logits(i, 1));
        const double e0 = std::exp(logits(i, 0) - m);
        const double e1 = std::exp(logits(i, 1) - m);
        const double z = e0 + e1;
        cache.probs(i, 0) = e0 / z;
        cache.probs(i, 1) = e1 / z;
        loss -= std::log(cache.probs(i, y[static_cast<std::size_t>(i)] == 1 ? 1 : 0));
    }
    return loss / static_cast<double>(n);
}

MlpGrads backward(const MlpArchitecture& arch, const MlpParams& params,
                  const ForwardCache& cache, const std::vector<int>& y) {
    const Eigen::Index n = cache.probs.rows();
    MlpGrads g;
    g.w.resize(static_cast<std::size_t>(arch.hidden_layers));
    g.b.resize(static_cast<std::size_t>(arch.hidden_layers));
    g.gamma.resize(static_cast<std::size_t>(arch.hidden_layers));
    g.beta.resize(static_cast<std::size_t>(arch.hidden_layers));

    // d loss / d logits for mean softmax cross-entropy
    Eigen::MatrixXd dlogits = cache.probs;
    for (Eigen::Index i = 0; i < n; ++i)
        dlogits(i, y[static_cast<std::size_t>(i)] == 1 ? 1 : 0) -= 1.0;
    dlogits /= static_cast<double>(n);

    const Eigen::MatrixXd& last_out = arch.hidden_layers > 0
                                          ? cache.layers.back().out
                                          : cache.layers.front().input;
    g.w_out = dlogits.transpose() * last_out;
    g.b_out = dlogits.colwise().sum();

    Eigen::MatrixXd dh = dlogits * params.w_out;  // grad wrt layer output
    for (int l = arch.hidden_layers - 1; l >= 0; --l) {
        const auto lu = static_cast<std::size_t>(l);
        const LayerCache& lc = cache.layers[lu];

        if (lc.mask.size() > 0) dh = dh.cwiseProduct(lc.mask);
        const Eigen::MatrixXd relu_gate = (lc.bn_out.array() > 0.0).cast<double>().matrix();
        Eigen::MatrixXd dbn = dh.cwiseProduct(relu_gate);

        Eigen::MatrixXd dz;
        if (arch.batch_norm) {
            const double m = static_cast<double>(dbn.rows());
            g.gamma[lu] = dbn.cwiseProduct(lc.xhat).colwise().sum().transpose();
            g.beta[lu] = dbn.colwise().sum().transpose();
            Eigen::VectorXd inv_sd = (lc.var.array() + kBnEps).sqrt().inverse().matrix();
            Eigen::MatrixXd dxhat = dbn * params.gamma[lu].asDiagonal();
            // full batch-norm backward through batch mean and variance
            Eigen::VectorXd sum_dxhat = dxhat.colwise().sum().transpose();
            Eigen::VectorXd sum_dxhat_xhat =
                dxhat.cwiseProduct(lc.xhat).colwise().sum().transpose();
            dz = dxhat;
            dz -= lc.xhat * (sum_dxhat_xhat / m).asDiagonal();
            dz.rowwise() -= (sum_dxhat / m).transpose();
            dz *= inv_sd.asDiagonal();
        } else {
            dz = dbn;
        }

        g.w[lu] = dz.transpose() * lc.input;
        g.b[lu] = dz.colwise().sum();
        if (l > 0) dh = dz * params.w[lu];
    }
    return g;
}

Eigen::VectorXd flatten_grads(const MlpArchitecture& arch, const MlpGrads& g) {
    Eigen::Index total = 0;
    for (int l = 0; l < arch.hidden_layers; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        total += g.w[lu].size() + g.b[lu].size();
        if (arch.batch_norm) total += g.gamma[lu].size() + g.beta[lu].size();
    }
    total += g.w_out.size() + g.b_out.size();

    Eigen::VectorXd flat(total);
    Eigen::Index at = 0;
    auto put_m = [&flat, &at](const Eigen::MatrixXd& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) flat[at++] = m(r, c);
    };
    auto put_v = [&flat, &at](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) flat[at++] = v[i];
    };
    for (int l = 0; l < arch.hidden_layers; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        put_m(g.w[lu]);
        put_v(g.b[lu]);
        if (arch.batch_norm) {
            put_v(g.gamma[lu]);
            put_v(g.beta[lu]);
        }
    }
    put_m(g.w_out);
    put_v(g.b_out);
    return flat;
}

Eigen::MatrixXd forward_eval_hidden(const MlpArchitecture& arch, const MlpParams& params,
                                    const Eigen::MatrixXd& x, bool stop_before_relu) {
    Eigen::MatrixXd h = x;
    for (int l = 0; l < arch.hidden_layers; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        Eigen::MatrixXd z = (h * params.w[lu].transpose()).rowwise() + params.b[lu].transpose();
        if (arch.batch_norm) {
            Eigen::VectorXd inv_sd =
                (params.run_var[lu].array() + kBnEps).sqrt().inverse().matrix();
            z = ((z.rowwise() - params.run_mean[lu].transpose()).array().rowwise() *
                 inv_sd.transpose().array())
                    .rowwise() *
                params.gamma[lu].transpose().array();
            z = z.rowwise() + params.beta[lu].transpose();
        }
        if (stop_before_relu && l == arch.hidden_layers - 1) return z;
        h = z.cwiseMax(0.0);
    }
    return h;
}

}  // namespace

MlpArchitecture MlpArchitecture::for_dim(int input_dim, int hidden_width) {
    MlpArchitecture arch;
    arch.input_dim = input_dim;
    arch.hidden_width = hidden_width;
    if (input_dim <= 16)
        arch.hidden_layers = 1;
    else if (input_dim <= 64)
        arch.hidden_layers = 2;
    else
        arch.hidden_layers = 3;
    return arch;
}

Eigen::VectorXd MlpParams::flatten() const {
    std::vector<double> vals;
    auto put_m = [&vals](const Eigen::MatrixXd& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) vals.push_back(m(r, c));
    };
    auto put_v = [&vals](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) vals.push_back(v[i]);
    };
    for (std::size_t l = 0; l < w.size(); ++l) {
        put_m(w[l]);
        put_v(b[l]);
        if (!gamma.empty()) {
            put_v(gamma[l]);
            put_v(beta[l]);
            put_v(run_mean[l]);
            put_v(run_var[l]);
        }
    }
    put_m(w_out);
    put_v(b_out);
    return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void MlpParams::unflatten(const Eigen::VectorXd& flat) {
    Eigen::Index at = 0;
    auto get_m = [&flat, &at](Eigen::MatrixXd& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = flat[at++];
    };
    auto get_v = [&flat, &at](Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = flat[at++];
    };
    for (std::size_t l = 0; l < w.size(); ++l) {
        get_m(w[l]);
        get_v(b[l]);
        if (!gamma.empty()) {
            get_v(gamma[l]);
            get_v(beta[l]);
            get_v(run_mean[l]);
            get_v(run_var[l]);
        }
    }
    get_m(w_out);
    get_v(b_out);
    if (at != flat.size()) runtime_error("MlpParams::unflatten: size mismatch");
}

Eigen::VectorXd MlpParams::flatten_trainable() const {
    std::vector<double> vals;
    auto put_m = [&vals](const Eigen::MatrixXd& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) vals.push_back(m(r, c));
    };
    auto put_v = [&vals](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) vals.push_back(v[i]);
    };
    for (std::size_t l = 0; l < w.size(); ++l) {
        put_m(w[l]);
        put_v(b[l]);
        if (!gamma.empty()) {
            put_v(gamma[l]);
            put_v(beta[l]);
        }
    }
    put_m(w_out);
    put_v(b_out);
    return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void MlpParams::add_scaled_trainable(const Eigen::VectorXd& direction, double scale) {
    Eigen::Index at = 0;
    auto upd_m = [&](Eigen::MatrixXd& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) += scale * direction[at++];
    };
    auto upd_v = [&](Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += scale * direction[at++];
    };
    for (std::size_t l = 0; l < w.size(); ++l) {
        upd_m(w[l]);
        upd_v(b[l]);
        if (!gamma.empty()) {
            upd_v(gamma[l]);
            upd_v(beta[l]);
        }
    }
    upd_m(w_out);
    upd_v(b_out);
    if (at != direction.size()) runtime_error("MlpParams::add_scaled_trainable: size mismatch");
}

MlpParams mlp_init(const MlpArchitecture& arch, std::uint64_t seed) {
    MlpParams p;
    Rng rng(mix_seed(seed, 0x6d6cULL));
    int fan_in = arch.input_dim;
    for (int l = 0; l < arch.hidden_layers; ++l) {
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
        Eigen::MatrixXd w(arch.hidden_width, fan_in);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.normal(0.0, sd);
        p.w.push_back(std::move(w));
        p.b.push_back(Eigen::VectorXd::Zero(arch.hidden_width));
        if (arch.batch_norm) {
            p.gamma.push_back(Eigen::VectorXd::Ones(arch.hidden_width));
            p.beta.push_back(Eigen::VectorXd::Zero(arch.hidden_width));
            p.run_mean.push_back(Eigen::VectorXd::Zero(arch.hidden_width));
            p.run_var.push_back(Eigen::VectorXd::Ones(arch.hidden_width));
        }
        fan_in = arch.hidden_width;
    }
    const double sd_out = std::sqrt(1.0 / static_cast<double>(fan_in));
    p.w_out.resize(2, fan_in);
    for (Eigen::Index r = 0; r < 2; ++r)
        for (Eigen::Index c = 0; c < fan_in; ++c) p.w_out(r, c) = rng.normal(0.0, sd_out);
    p.b_out = Eigen::VectorXd::Zero(2);
    return p;
}

double mlp_batch_loss(const MlpArchitecture& arch, const MlpParams& params,
                      const Eigen::MatrixXd& x, const std::vector<int>& y) {
    ForwardCache cache;
    MlpParams scratch = params;  // running stats untouched for callers
    return forward_train(arch, scratch, x, y, nullptr, false, cache);
}

Eigen::VectorXd mlp_gradient(const MlpArchitecture& arch, const MlpParams& params,
                             const Eigen::MatrixXd& x, const std::vector<int>& y) {
    if (!x.allFinite()) runtime_error("mlp_gradient: non-finite inputs");
    ForwardCache cache;
    MlpParams scratch = params;
    forward_train(arch, scratch, x, y, nullptr, false, cache);
    return flatten_grads(arch, backward(arch, params, cache, y));
}

double mlp_run_epoch(const MlpArchitecture& arch, MlpParams& params, const Eigen::MatrixXd& x,
                     const std::vector<int>& y, const MlpTrainConfig& cfg, int epoch_index) {
    const Eigen::Index n = x.rows();
    Rng rng(mix_seed(cfg.stream_seed, static_cast<std::uint64_t>(epoch_index)));

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);

    const double keep = 1.0 - arch.dropout;
    double total_loss = 0;
    Eigen::Index done = 0;
    while (done < n) {
        const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n - done);
        Eigen::MatrixXd xb(bs, x.cols());
        std::vector<int> yb(static_cast<std::size_t>(bs));
        for (Eigen::Index i = 0; i < bs; ++i) {
            xb.row(i) = x.row(order[static_cast<std::size_t>(done + i)]);
            yb[static_cast<std::size_t>(i)] =
                y[static_cast<std::size_t>(order[static_cast<std::size_t>(done + i)])];
        }

        std::vector<Eigen::MatrixXd> masks;
        std::vector<Eigen::MatrixXd>* mask_ptr = nullptr;
        if (cfg.use_dropout && arch.dropout > 0.0) {
            masks.resize(static_cast<std::size_t>(arch.hidden_layers));
            for (auto& m : masks) {
                m.resize(bs, arch.hidden_width);
                for (Eigen::Index r = 0; r < bs; ++r)
                    for (Eigen::Index c = 0; c < arch.hidden_width; ++c)
                        m(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
            }
            mask_ptr = &masks;
        }

        ForwardCache cache;
        const double loss = forward_train(arch, params, xb, yb, mask_ptr, true, cache);
        if (!std::isfinite(loss)) runtime_error("mlp training loss became non-finite");
        const MlpGrads grads = backward(arch, params, cache, yb);
        params.add_scaled_trainable(flatten_grads(arch, grads), -cfg.learning_rate);

        total_loss += loss * static_cast<double>(bs);
        done += bs;
    }
    return total_loss / static_cast<double>(n);
}

Eigen::VectorXd mlp_scores(const MlpArchitecture& arch, const MlpParams& params,
                           const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd h = forward_eval_hidden(arch, params, x, false);
    Eigen::MatrixXd logits = (h * params.w_out.transpose()).rowwise() + params.b_out.transpose();
    Eigen::VectorXd scores(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double m = std::max(logits(i, 0), logits(i, 1));
        const double e0 = std::exp(logits(i, 0) - m);
        const double e1 = std::exp(logits(i, 1) - m);
        scores[i] = e1 / (e0 + e1);
    }
    return scores;
}

double mlp_eval_loss(const MlpArchitecture& arch, const MlpParams& params,
                     const Eigen::MatrixXd& x, const std::vector<int>& y) {
    const Eigen::VectorXd s = mlp_scores(arch, params, x);
    double loss = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double p = y[static_cast<std::size_t>(i)] == 1 ? s[i] : 1.0 - s[i];
        loss -= std::log(std::max(p, 1e-300));
    }
    return loss / static_cast<double>(s.size());
}

Eigen::MatrixXd mlp_class_embeddings(const MlpArchitecture& arch, const MlpParams& params,
                                     const Eigen::MatrixXd& x, const std::vector<int>& y,
                                     bool& has_class0, bool& has_class1) {
    const Eigen::MatrixXd pre = forward_eval_hidden(arch, params, x, true);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2, pre.cols());
    double counts[2] = {0, 0};
    for (Eigen::Index i = 0; i < pre.rows(); ++i) {
        const int c = y[static_cast<std::size_t>(i)] == 1 ? 1 : 0;
        out.row(c) += pre.row(i);
        counts[c] += 1.0;
    }
    has_class0 = counts[0] > 0;
    has_class1 = counts[1] > 0;
    for (int c = 0; c < 2; ++c)
        if (counts[c] > 0) out.row(c) /= counts[c];
    return out;
}

}  // namespace mw::models
