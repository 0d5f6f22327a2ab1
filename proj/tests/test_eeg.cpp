#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mw/eeg_features.hpp"
#include "mw/error.hpp"
#include "mw/rng.hpp"

using namespace mw;

namespace {

corpus::EegEpoch tone_epoch(double freq_hz, double rate, int channels, double seconds) {
    corpus::EegEpoch e;
    e.rate = rate;
    const auto t = static_cast<Eigen::Index>(rate * seconds);
    e.samples.resize(channels, t);
    for (int c = 0; c < channels; ++c)
        for (Eigen::Index i = 0; i < t; ++i)
            e.samples(c, i) =
                std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / rate + 0.3 * c);
    return e;
}

double rms(const Eigen::MatrixXd& m) { return std::sqrt(m.array().square().mean()); }

eeg::SpdMatrix random_spd(Rng& rng, int n) {
    Eigen::MatrixXd a(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a(r, c) = rng.normal();
    return eeg::make_spd(a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n));
}

}  // namespace

TEST_CASE("band decomposition") {
    SUBCASE("alpha tone passes the alpha band nearly unchanged") {
        const auto in = tone_epoch(10.0, 256.0, 2, 4.0);
        const auto out = eeg::band_decompose(in, eeg::band_by_name("alpha"));
        CHECK(out.samples.rows() == in.samples.rows());
        CHECK(out.samples.cols() == in.samples.cols());
        CHECK(rms(out.samples) / rms(in.samples) > 0.9);
    }

    SUBCASE("alpha tone is crushed by the theta band") {
        const auto in = tone_epoch(10.0, 256.0, 2, 4.0);
        const auto out = eeg::band_decompose(in, eeg::band_by_name("theta"));
        CHECK(rms(out.samples) / rms(in.samples) < 0.1);
    }

    SUBCASE("DC vanishes in every band") {
        corpus::EegEpoch in;
        in.rate = 256.0;
        in.samples = Eigen::MatrixXd::Constant(3, 1024, 5.0);
        for (const auto& band : eeg::standard_bands()) {
            const auto out = eeg::band_decompose(in, band);
            CHECK(rms(out.samples) < 1e-6 * 5.0);
        }
    }

    SUBCASE("band above Nyquist is rejected") {
        const auto in = tone_epoch(10.0, 256.0, 2, 1.0);
        CHECK_THROWS_WITH_AS(eeg::band_decompose(in, {"wide", 30.0, 130.0}),
                             doctest::Contains("Nyquist"), Error);
    }
}

TEST_CASE("spatial covariance") {
    SUBCASE("hand-computed 2x4 example") {
        corpus::EegEpoch e;
        e.rate = 256.0;
        e.samples.resize(2, 4);
        e.samples << 1, -1, 1, -1, 1, 1, -1, -1;
        const auto c = eeg::spatial_covariance(e, 0.0);
        CHECK(c.m(0, 0) == doctest::Approx(4.0 / 3.0));
        CHECK(c.m(1, 1) == doctest::Approx(4.0 / 3.0));
        CHECK(c.m(0, 1) == doctest::Approx(0.0));
    }

    SUBCASE("full shrinkage yields the scaled identity exactly") {
        Rng rng(1);
        corpus::EegEpoch e;
        e.rate = 256.0;
        e.samples.resize(3, 100);
        for (Eigen::Index r = 0; r < 3; ++r)
            for (Eigen::Index c = 0; c < 100; ++c) e.samples(r, c) = rng.normal();
        const auto c0 = eeg::spatial_covariance(e, 0.0);
        const double mu = c0.m.trace() / 3.0;

        const auto full = eeg::spatial_covariance(e, 1.0);
        CHECK((full.m - mu * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);

        const auto half = eeg::spatial_covariance(e, 0.5);
        const Eigen::MatrixXd expect =
            0.5 * c0.m + 0.5 * mu * Eigen::MatrixXd::Identity(3, 3);
        CHECK((half.m - expect).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("rank-deficient input without shrinkage is rejected") {
        corpus::EegEpoch e;
        e.rate = 256.0;
        e.samples = Eigen::MatrixXd::Zero(2, 50);
        for (Eigen::Index i = 0; i < 50; ++i) e.samples(0, i) = std::sin(0.3 * i);
        CHECK_THROWS_WITH_AS(eeg::spatial_covariance(e, 0.0),
                             doctest::Contains("not positive definite"), Error);
    }

    SUBCASE("T <= n without shrinkage is rejected") {
        corpus::EegEpoch e;
        e.rate = 256.0;
        e.samples = Eigen::MatrixXd::Random(4, 4);
        CHECK_THROWS_AS(eeg::spatial_covariance(e, 0.0), Error);
    }

    SUBCASE("shrinkage keeps any nonzero-trace input positive definite") {
        Rng rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            corpus::EegEpoch e;
            e.rate = 256.0;
            e.samples = Eigen::MatrixXd::Zero(4, 30);
            for (Eigen::Index i = 0; i < 30; ++i) e.samples(0, i) = rng.normal();
            const auto c = eeg::spatial_covariance(e, 0.05);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.m);
            CHECK(eig.eigenvalues().minCoeff() > 0);
        }
    }
}

TEST_CASE("karcher mean") {
    Rng rng(42);

    SUBCASE("singleton and idempotence") {
        const auto a = random_spd(rng, 3);
        const auto one = eeg::karcher_mean({a});
        CHECK((one.m - a.m).norm() < 1e-12);
        const auto two = eeg::karcher_mean({a, a});
        CHECK((two.m - a.m).norm() < 1e-8);
    }

    SUBCASE("commuting pair reduces to the elementwise geometric mean") {
        eeg::SpdMatrix a{Eigen::Vector2d(1, 4).asDiagonal()};
        eeg::SpdMatrix b{Eigen::Vector2d(4, 1).asDiagonal()};
        const auto mean = eeg::karcher_mean({a, b}, 1e-8, 50);
        CHECK(mean.m(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(mean.m(1, 1) == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(std::abs(mean.m(0, 1)) < 1e-9);
    }

    SUBCASE("converged mean has a near-zero tangent-space mean") {
        std::vector<eeg::SpdMatrix> mats;
        for (int i = 0; i < 6; ++i) mats.push_back(random_spd(rng, 4));
        const auto mean = eeg::karcher_mean(mats, 1e-8, 100);
        const Eigen::MatrixXd inv_root = eeg::spd_inv_sqrt(mean.m);
        Eigen::MatrixXd tangent = Eigen::MatrixXd::Zero(4, 4);
        for (const auto& m : mats)
            tangent += eeg::spd_log(0.5 * (inv_root * m.m * inv_root +
                                           (inv_root * m.m * inv_root).transpose()));
        tangent /= 6.0;
        CHECK(tangent.norm() < 1e-7);
    }
}

TEST_CASE("tangent projection") {
    Rng rng(9);

    SUBCASE("projection of the reference onto itself is zero") {
        const auto r = random_spd(rng, 5);
        CHECK(eeg::tangent_project(r, r).cwiseAbs().maxCoeff() < 1e-10);
    }

    SUBCASE("8 channels give 36 features per band, 144 over four bands") {
        const auto r = random_spd(rng, 8);
        const auto c = random_spd(rng, 8);
        CHECK(eeg::tangent_project(c, r).size() == 36);

        corpus::EegEpoch e;
        e.rate = 256.0;
        e.samples.resize(8, 512);
        for (Eigen::Index i = 0; i < e.samples.size(); ++i)
            e.samples.data()[i] = rng.normal();
        std::vector<eeg::SpdMatrix> refs(4, r);
        const auto v = eeg::eeg_feature_vector(e, eeg::standard_bands(), refs, 0.05);
        CHECK(v.size() == 144);
        const auto v1 = eeg::eeg_feature_vector(e, {eeg::band_by_name("alpha")}, {r}, 0.05);
        CHECK(v1.size() == 36);
    }

    SUBCASE("scaled reference: 4*ref maps to log(4) on the diagonal slots") {
        const auto r = random_spd(rng, 4);
        const eeg::SpdMatrix c{4.0 * r.m};
        const auto v = eeg::tangent_project(c, r);
        // S = log(4 I): diagonal entries log 4, off-diagonals 0
        CHECK(v.norm() == doctest::Approx(std::sqrt(4.0) * std::log(4.0)).epsilon(1e-9));
    }

    SUBCASE("norm equals the affine-invariant distance") {
        for (int trial = 0; trial < 20; ++trial) {
            const auto c = random_spd(rng, 4);
            const auto r = random_spd(rng, 4);
            CHECK(eeg::tangent_project(c, r).norm() ==
                  doctest::Approx(eeg::riemannian_distance(c, r)).epsilon(1e-8));
        }
    }

    SUBCASE("congruence invariance of the tangent norm") {
        for (int trial = 0; trial < 100; ++trial) {
            const auto c = random_spd(rng, 4);
            const auto r = random_spd(rng, 4);
            Eigen::MatrixXd w(4, 4);
            for (Eigen::Index i = 0; i < 16; ++i) w.data()[i] = rng.normal();
            if (std::abs(w.determinant()) < 1e-3) continue;
            const eeg::SpdMatrix cw{0.5 * (w * c.m * w.transpose() +
                                           (w * c.m * w.transpose()).transpose())};
            const eeg::SpdMatrix rw{0.5 * (w * r.m * w.transpose() +
                                           (w * r.m * w.transpose()).transpose())};
            const double a = eeg::tangent_project(c, r).norm();
            const double b = eeg::tangent_project(cw, rw).norm();
            CHECK(a == doctest::Approx(b).epsilon(1e-8));
        }
    }
}
