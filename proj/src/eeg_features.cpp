#include "mw/eeg_features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "mw/error.hpp"

namespace mw::eeg {

std::vector<BandSpec> standard_bands() {
    return {{"delta", 1.0, 4.0}, {"theta", 4.0, 8.0}, {"alpha", 8.0, 13.0}, {"beta", 13.0, 30.0}};
}

BandSpec band_by_name(const std::string& name) {
    for (const auto& b : standard_bands())
        if (b.name == name) return b;
    input_error("unknown EEG band '", name, "'");
}

namespace {

constexpr double kSymTol = 1e-10;

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

void check_symmetric(const Eigen::MatrixXd& a, const char* who) {
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    const double residual = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (residual > kSymTol * scale) runtime_error(who, ": matrix is not symmetric");
}

// eigendecomposition with a scalar transform of the spectrum
template <typename F>
Eigen::MatrixXd spectral_map(const Eigen::MatrixXd& a, F&& f, const char* who,
                             bool require_positive) {
    check_symmetric(a, who);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(a));
    if (eig.info() != Eigen::Success) runtime_error(who, ": eigendecomposition failed");
    Eigen::VectorXd vals = eig.eigenvalues();
    if (require_positive && vals.minCoeff() <= 0)
        runtime_error(who, ": matrix is not positive definite (min eigenvalue ",
                      vals.minCoeff(), ")");
    for (Eigen::Index i = 0; i < vals.size(); ++i) vals[i] = f(vals[i]);
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

Eigen::MatrixXd spd_log(const Eigen::MatrixXd& a) {
    return spectral_map(a, [](double v) { return std::log(v); }, "spd_log", true);
}

Eigen::MatrixXd spd_exp(const Eigen::MatrixXd& a) {
    return spectral_map(a, [](double v) { return std::exp(v); }, "spd_exp", false);
}

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& a) {
    return spectral_map(a, [](double v) { return std::sqrt(v); }, "spd_sqrt", true);
}

Eigen::MatrixXd spd_inv_sqrt(const Eigen::MatrixXd& a) {
    return spectral_map(a, [](double v) { return 1.0 / std::sqrt(v); }, "spd_inv_sqrt", true);
}

SpdMatrix make_spd(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) runtime_error("make_spd: matrix is not square");
    check_symmetric(m, "make_spd");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(m));
    const double max_ev = eig.eigenvalues().maxCoeff();
    if (eig.eigenvalues().minCoeff() <= 0 ||
        eig.eigenvalues().minCoeff() < 1e-12 * std::max(1.0, max_ev))
        runtime_error("make_spd: matrix is not positive definite (min eigenvalue ",
                      eig.eigenvalues().minCoeff(), ")");
    return SpdMatrix{symmetrize(m)};
}

// ---------------------------------------------------------------------------
// Butterworth band-pass (order-4 low-pass prototype -> 8 poles), realized as
// cascaded biquads and run forward-backward for zero phase.
// ---------------------------------------------------------------------------

namespace {

struct Biquad {
    double b0, b1, b2;  // numerator
    double a1, a2;      // denominator (a0 normalized to 1)
};

std::vector<Biquad> design_bandpass(double lo_hz, double hi_hz, double fs, int order = 4) {
    const double fs2 = 2.0 * fs;
    // bilinear pre-warp
    const double w_lo = fs2 * std::tan(M_PI * lo_hz / fs);
    const double w_hi = fs2 * std::tan(M_PI * hi_hz / fs);
    const double w0 = std::sqrt(w_lo * w_hi);
    const double bw = w_hi - w_lo;

    using cd = std::complex<double>;
    // analog low-pass prototype poles on the unit circle (left half-plane)
    std::vector<cd> proto;
    for (int k = 1; k <= order; ++k) {
        const double theta = M_PI * (2.0 * k + order - 1.0) / (2.0 * order);
        proto.emplace_back(std::cos(theta), std::sin(theta));
    }

    // low-pass -> band-pass: each pole splits in two; N zeros appear at s=0
    std::vector<cd> poles;
    for (const cd& p : proto) {
        const cd pb = p * (bw / 2.0);
        const cd disc = std::sqrt(pb * pb - cd(w0 * w0, 0.0));
        poles.push_back(pb + disc);
        poles.push_back(pb - disc);
    }
    const double gain_analog = std::pow(bw, order);

    // bilinear transform; analog zeros at s=0 map to z=1, the remaining
    // degree deficit contributes zeros at z=-1
    std::vector<cd> zpoles;
    cd denom_prod(1.0, 0.0);
    for (const cd& p : poles) {
        zpoles.push_back((cd(fs2, 0) + p) / (cd(fs2, 0) - p));
        denom_prod *= (cd(fs2, 0) - p);
    }
    // numerator product over analog zeros (order zeros at 0): prod(fs2 - 0) = fs2^order
    const double num_prod = std::pow(fs2, order);
    const double gain = gain_analog * (num_prod / denom_prod.real());

    // pair conjugate poles into biquads; digital zeros are (z-1)(z+1) per section
    std::vector<cd> upper;
    for (const cd& p : zpoles)
        if (p.imag() > 0) upper.push_back(p);
    if (upper.size() != static_cast<std::size_t>(order))
        runtime_error("band-pass design: unexpected pole layout");
    std::sort(upper.begin(), upper.end(),
              [](const cd& a, const cd& b) { return std::abs(a) < std::abs(b); });

    std::vector<Biquad> sections;
    for (const cd& p : upper) {
        Biquad s{};
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;  // zeros at +1 and -1
        s.a1 = -2.0 * p.real();
        s.a2 = std::norm(p);
        sections.push_back(s);
    }
    // overall gain into the first section
    sections.front().b0 *= gain;
    sections.front().b1 *= gain;
    sections.front().b2 *= gain;
    return sections;
}

// steady-state DF2T state for a unit-step input (transient suppression at edges)
void steady_state(const Biquad& s, double& z1, double& z2) {
    const double h1 = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    z2 = s.b2 - s.a2 * h1;
    z1 = s.b1 - s.a1 * h1 + z2;
}

void sos_filter(const std::vector<Biquad>& sections, std::vector<double>& x) {
    for (const Biquad& s : sections) {
        double zi1, zi2;
        steady_state(s, zi1, zi2);
        double z1 = zi1 * x.front(), z2 = zi2 * x.front();
        for (double& v : x) {
            const double y = s.b0 * v + z1;
            z1 = s.b1 * v - s.a1 * y + z2;
            z2 = s.b2 * v - s.a2 * y;
            v = y;
        }
    }
}

std::vector<double> filtfilt(const std::vector<Biquad>& sections,
                             const std::vector<double>& signal) {
    const std::size_t n = signal.size();
    const std::size_t padlen = std::min(n - 1, 3 * (2 * sections.size() + 1));

    // odd extension at both ends
    std::vector<double> work;
    work.reserve(n + 2 * padlen);
    for (std::size_t i = padlen; i >= 1; --i) work.push_back(2.0 * signal.front() - signal[i]);
    work.insert(work.end(), signal.begin(), signal.end());
    for (std::size_t i = 1; i <= padlen; ++i)
        work.push_back(2.0 * signal.back() - signal[n - 1 - i]);

    sos_filter(sections, work);
    std::reverse(work.begin(), work.end());
    sos_filter(sections, work);
    std::reverse(work.begin(), work.end());

    return {work.begin() + static_cast<std::ptrdiff_t>(padlen),
            work.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

}  // namespace

corpus::EegEpoch band_decompose(const corpus::EegEpoch& epoch, const BandSpec& band) {
    if (!(band.lo_hz > 0) || !(band.lo_hz < band.hi_hz))
        input_error("band ", band.name, ": need 0 < lo < hi");
    if (!(band.hi_hz < epoch.rate / 2.0))
        input_error("band ", band.name, " (", band.lo_hz, "-", band.hi_hz,
                    " Hz) exceeds Nyquist for rate ", epoch.rate, " Hz");
    if (!epoch.samples.allFinite()) runtime_error("band_decompose: non-finite EEG input");
    if (epoch.sample_count() < 2) runtime_error("band_decompose: epoch too short");

    const auto sections = design_bandpass(band.lo_hz, band.hi_hz, epoch.rate);
    corpus::EegEpoch out = epoch;
    std::vector<double> channel(static_cast<std::size_t>(epoch.sample_count()));
    for (Eigen::Index c = 0; c < epoch.channel_count(); ++c) {
        for (Eigen::Index i = 0; i < epoch.sample_count(); ++i)
            channel[static_cast<std::size_t>(i)] = epoch.samples(c, i);
        const auto filtered = filtfilt(sections, channel);
        for (Eigen::Index i = 0; i < epoch.sample_count(); ++i)
            out.samples(c, i) = filtered[static_cast<std::size_t>(i)];
    }
    return out;
}

SpdMatrix spatial_covariance(const corpus::EegEpoch& epoch, double shrinkage) {
    // the closed interval admits the full-shrinkage limit (tr C / n) I
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0))
        input_error("shrinkage must lie in [0, 1], got ", shrinkage);
    const Eigen::Index n = epoch.channel_count();
    const Eigen::Index t = epoch.sample_count();
    if (shrinkage == 0.0 && t <= n)
        runtime_error("spatial_covariance: need more samples than channels (T=", t, ", n=", n,
                      ") when unregularized");
    if (!epoch.samples.allFinite()) runtime_error("spatial_covariance: non-finite input");

    Eigen::MatrixXd centered = epoch.samples;
    for (Eigen::Index r = 0; r < n; ++r) centered.row(r).array() -= centered.row(r).mean();

    Eigen::MatrixXd c =
        centered * centered.transpose() / static_cast<double>(std::max<Eigen::Index>(t - 1, 1));
    if (shrinkage > 0.0) {
        const double mu = c.trace() / static_cast<double>(n);
        c = (1.0 - shrinkage) * c +
            shrinkage * mu * Eigen::MatrixXd::Identity(n, n);
    }
    return make_spd(c);
}

SpdMatrix karcher_mean(const std::vector<SpdMatrix>& matrices, double tol, int max_iter) {
    if (matrices.empty()) input_error("karcher_mean: empty input");
    const Eigen::Index n = matrices.front().size();
    for (const auto& m : matrices)
        if (m.size() != n) input_error("karcher_mean: inconsistent matrix sizes");
    if (matrices.size() == 1) return matrices.front();

    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, n);
    for (const auto& m : matrices) mean += m.m;
    mean /= static_cast<double>(matrices.size());

    double residual = 0;
    for (int iter = 0; iter < max_iter; ++iter) {
        const Eigen::MatrixXd root = spd_sqrt(mean);
        const Eigen::MatrixXd inv_root = spd_inv_sqrt(mean);
        Eigen::MatrixXd tangent = Eigen::MatrixXd::Zero(n, n);
        for (const auto& m : matrices)
            tangent += spd_log(symmetrize(inv_root * m.m * inv_root));
        tangent /= static_cast<double>(matrices.size());
        residual = tangent.norm();
        if (residual < tol) return make_spd(mean);
        mean = symmetrize(root * spd_exp(tangent) * root);
    }
    runtime_error("karcher_mean: no convergence after ", max_iter,
                  " iterations (residual ", residual, ")");
}

Eigen::VectorXd tangent_project(const SpdMatrix& c, const SpdMatrix& ref) {
    if (c.size() != ref.size()) input_error("tangent_project: size mismatch");
    const Eigen::MatrixXd inv_root = spd_inv_sqrt(ref.m);
    const Eigen::MatrixXd s = spd_log(symmetrize(inv_root * c.m * inv_root));

    const Eigen::Index n = s.rows();
    Eigen::VectorXd v(n * (n + 1) / 2);
    Eigen::Index at = 0;
    const double root2 = std::sqrt(2.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[at++] = s(i, i);
        for (Eigen::Index j = i + 1; j < n; ++j) v[at++] = root2 * s(i, j);
    }
    return v;
}

double riemannian_distance(const SpdMatrix& c, const SpdMatrix& r) {
    const Eigen::MatrixXd inv_root = spd_inv_sqrt(r.m);
    return spd_log(symmetrize(inv_root * c.m * inv_root)).norm();
}

Eigen::VectorXd eeg_feature_vector(const corpus::EegEpoch& epoch,
                                   const std::vector<BandSpec>& bands,
                                   const std::vector<SpdMatrix>& refs, double shrinkage) {
    if (bands.empty()) input_error("eeg_feature_vector: no bands requested");
    if (bands.size() != refs.size())
        input_error("eeg_feature_vector: ", bands.size(), " bands but ", refs.size(),
                    " reference matrices");

    const Eigen::Index n = epoch.channel_count();
    const Eigen::Index per_band = n * (n + 1) / 2;
    Eigen::VectorXd out(per_band * static_cast<Eigen::Index>(bands.size()));
    for (std::size_t b = 0; b < bands.size(); ++b) {
        const corpus::EegEpoch filtered = band_decompose(epoch, bands[b]);
        const SpdMatrix cov = spatial_covariance(filtered, shrinkage);
        out.segment(static_cast<Eigen::Index>(b) * per_band, per_band) =
            tangent_project(cov, refs[b]);
    }
    return out;
}

}  // namespace mw::eeg
