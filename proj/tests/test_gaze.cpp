#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mw/error.hpp"
#include "mw/gaze_features.hpp"
#include "mw/rng.hpp"

using namespace mw;
using gaze::GazeEvent;
using gaze::GazeEventKind;

namespace {

std::vector<corpus::GazeSample> stationary(double x, double y, std::int64_t t0,
                                           std::int64_t duration_ms, std::int64_t step_ms) {
    std::vector<corpus::GazeSample> s;
    for (std::int64_t t = t0; t < t0 + duration_ms; t += step_ms)
        s.push_back({t, x, y, true});
    return s;
}

// Independent re-derivation of the event rules: label every inter-sample
// interval by thresholding the central-difference speed, group runs, dissolve
// sub-minimum fixations, merge near-coincident fixations, emit events with the
// final-run hold.
std::vector<GazeEvent> brute_force_ivt(const gaze::KinematicsSeries& series, double threshold,
                                       double min_fix_ms, double merge_gap_ms,
                                       double merge_dist) {
    std::vector<GazeEvent> all;
    for (const auto& seg : series.segments) {
        const std::size_t n_int = seg.speed.size();
        std::vector<int> label(n_int);  // 1 = fixation interval
        for (std::size_t k = 0; k < n_int; ++k) label[k] = seg.speed[k] < threshold ? 1 : 0;

        struct R {
            int fix;
            std::size_t a, b;
        };
        std::vector<R> runs;
        for (std::size_t k = 0; k < n_int; ++k) {
            if (!runs.empty() && runs.back().fix == label[k])
                runs.back().b = k;
            else
                runs.push_back({label[k], k, k});
        }

        std::vector<R> stage2;
        for (const R& r : runs) {
            R cur = r;
            if (cur.fix == 1 &&
                static_cast<double>(seg.t[cur.b + 1] - seg.t[cur.a]) < min_fix_ms) {
                if (runs.size() == 1) continue;
                cur.fix = 0;
            }
            if (!stage2.empty() && stage2.back().fix == cur.fix)
                stage2.back().b = cur.b;
            else
                stage2.push_back(cur);
        }

        auto centroid = [&seg](const R& r, double& cx, double& cy) {
            double sx = 0, sy = 0;
            for (std::size_t i = r.a; i <= r.b + 1; ++i) {
                sx += seg.x[i];
                sy += seg.y[i];
            }
            cx = sx / static_cast<double>(r.b + 2 - r.a);
            cy = sy / static_cast<double>(r.b + 2 - r.a);
        };

        std::vector<R> stage3;
        for (const R& r : stage2) {
            if (r.fix == 1 && stage3.size() >= 2 && stage3.back().fix == 0 &&
                stage3[stage3.size() - 2].fix == 1) {
                const R& gap = stage3.back();
                const R& prev = stage3[stage3.size() - 2];
                double ax, ay, bx, by;
                centroid(prev, ax, ay);
                centroid(r, bx, by);
                if (static_cast<double>(seg.t[gap.b + 1] - seg.t[gap.a]) < merge_gap_ms &&
                    std::hypot(bx - ax, by - ay) < merge_dist) {
                    R joined{1, prev.a, r.b};
                    stage3.pop_back();
                    stage3.pop_back();
                    stage3.push_back(joined);
                    continue;
                }
            }
            stage3.push_back(r);
        }

        for (const R& r : stage3) {
            GazeEvent e;
            e.kind = r.fix ? GazeEventKind::fixation : GazeEventKind::saccade;
            e.t_start = seg.t[r.a];
            e.t_end = seg.t[r.b + 1];
            if (r.b + 2 == seg.t.size())
                e.t_end += seg.t[seg.t.size() - 1] - seg.t[seg.t.size() - 2];
            if (r.fix) {
                centroid(r, e.centroid_x, e.centroid_y);
            } else {
                e.amplitude = std::hypot(seg.x[r.b + 1] - seg.x[r.a], seg.y[r.b + 1] - seg.y[r.a]);
            }
            all.push_back(e);
        }
    }
    return all;
}

bool events_equal(const std::vector<GazeEvent>& a, const std::vector<GazeEvent>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].kind != b[i].kind || a[i].t_start != b[i].t_start || a[i].t_end != b[i].t_end)
            return false;
        if (a[i].amplitude != b[i].amplitude) return false;
        if (a[i].centroid_x != b[i].centroid_x || a[i].centroid_y != b[i].centroid_y)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("kinematics central differences") {
    gaze::GazeConfig cfg;

    SUBCASE("constant position has zero speed everywhere") {
        const auto series = gaze::kinematics(stationary(100, 200, 0, 1000, 4), cfg);
        REQUIRE(series.segments.size() == 1);
        for (double v : series.segments[0].speed) CHECK(v == 0.0);
    }

    SUBCASE("collinear displacement gives the hand-computed interior speed") {
        // 5 px per 10 ms steps: central difference spans 10 px over 20 ms
        std::vector<corpus::GazeSample> s = {{0, 0, 0, true}, {10, 5, 0, true}, {20, 10, 0, true}};
        const auto series = gaze::kinematics(s, cfg);
        REQUIRE(series.segments.size() == 1);
        REQUIRE(series.segments[0].speed.size() == 2);
        CHECK(series.segments[0].speed[1] == doctest::Approx(500.0));
        CHECK(series.segments[0].speed[0] == series.segments[0].speed[1]);
    }

    SUBCASE("fewer than 3 valid samples is an error") {
        std::vector<corpus::GazeSample> s = {{0, 0, 0, true}, {10, 1, 1, true},
                                             {20, 2, 2, false}};
        CHECK_THROWS_WITH_AS(gaze::kinematics(s, cfg), doctest::Contains("3 valid samples"),
                             Error);
    }

    SUBCASE("short invalid gaps are bridged, long gaps split the series") {
        auto s = stationary(0, 0, 0, 200, 10);
        s[5].valid = false;  // 20 ms gap between valid neighbors: bridged
        const auto bridged = gaze::kinematics(s, cfg);
        CHECK(bridged.segments.size() == 1);
        CHECK(bridged.segments[0].t.size() == s.size());

        auto split = stationary(0, 0, 0, 400, 10);
        for (std::size_t i = 10; i < 20; ++i) split[i].valid = false;  // 110 ms gap
        const auto two = gaze::kinematics(split, cfg);
        CHECK(two.segments.size() == 2);
        CHECK(two.invalid_fraction() == doctest::Approx(0.25));
    }
}

TEST_CASE("ivt detection") {
    gaze::GazeConfig cfg;

    SUBCASE("one second of stationary gaze is exactly one fixation") {
        const auto series = gaze::kinematics(stationary(400, 300, 0, 1000, 4), cfg);
        const auto events = gaze::ivt_detect(series, 1000.0, 60.0, cfg);
        REQUIRE(events.size() == 1);
        CHECK(events[0].kind == GazeEventKind::fixation);
        CHECK(events[0].duration_ms() == 1000);
    }

    SUBCASE("dwell, jump, dwell gives two fixations and a 500 px saccade") {
        std::vector<corpus::GazeSample> s;
        for (std::int64_t t = 0; t < 100; t += 4) s.push_back({t, 0, 0, true});
        for (std::int64_t t = 100; t < 200; t += 4) s.push_back({t, 500, 0, true});
        const auto series = gaze::kinematics(s, cfg);
        const auto events = gaze::ivt_detect(series, 1000.0, 60.0, cfg);

        int fixations = 0, saccades = 0;
        double amplitude = 0;
        for (const auto& e : events) {
            if (e.kind == GazeEventKind::fixation)
                ++fixations;
            else {
                ++saccades;
                amplitude = e.amplitude;
            }
        }
        CHECK(fixations == 2);
        CHECK(saccades == 1);
        CHECK(amplitude == doctest::Approx(500.0));

        // and it agrees with the step-by-step oracle
        const auto oracle = brute_force_ivt(series, 1000.0, 60.0, cfg.merge_max_gap_ms,
                                            cfg.merge_max_dist_px);
        CHECK(events_equal(events, oracle));
    }

    SUBCASE("translation leaves kinds, durations and amplitudes unchanged") {
        std::vector<corpus::GazeSample> s;
        Rng rng(5);
        double x = 0, y = 0;
        for (std::int64_t t = 0; t < 2000; t += 4) {
            if (rng.uniform() < 0.01) {
                x += rng.uniform(-300, 300);
                y += rng.uniform(-300, 300);
            }
            s.push_back({t, x + rng.normal(0, 0.5), y + rng.normal(0, 0.5), true});
        }
        auto moved = s;
        for (auto& p : moved) {
            p.x += 300;
            p.y += 300;
        }
        const auto a = gaze::ivt_detect(gaze::kinematics(s, cfg), 1000.0, 60.0, cfg);
        const auto b = gaze::ivt_detect(gaze::kinematics(moved, cfg), 1000.0, 60.0, cfg);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].kind == b[i].kind);
            CHECK(a[i].t_start == b[i].t_start);
            CHECK(a[i].t_end == b[i].t_end);
            CHECK(a[i].amplitude == doctest::Approx(b[i].amplitude).epsilon(1e-12));
        }
    }
}

TEST_CASE("ivt equals the brute-force oracle on random synthetic traces") {
    gaze::GazeConfig cfg;
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<corpus::GazeSample> s;
        double x = rng.uniform(0, 1000), y = rng.uniform(0, 1000);
        std::int64_t t = 0;
        const std::int64_t step = 2 + static_cast<std::int64_t>(rng.below(6));
        while (t < 3000) {
            // dwell
            const auto dwell = static_cast<std::int64_t>(20 + rng.below(300));
            for (std::int64_t end = t + dwell; t < end; t += step)
                s.push_back({t, x + rng.normal(0, 1.0), y + rng.normal(0, 1.0),
                             rng.uniform() < 0.97});
            // jump (sometimes slow drift instead)
            const double nx = rng.uniform(0, 1000);
            const double ny = rng.uniform(0, 1000);
            if (rng.uniform() < 0.3) {
                const auto drift = static_cast<std::int64_t>(40 + rng.below(80));
                for (std::int64_t end = t + drift; t < end; t += step) {
                    const double f = 1.0 - static_cast<double>(end - t) /
                                                static_cast<double>(drift);
                    s.push_back({t, x + f * (nx - x), y + f * (ny - y), true});
                }
            }
            x = nx;
            y = ny;
        }
        gaze::KinematicsSeries series;
        try {
            series = gaze::kinematics(s, cfg);
        } catch (const Error&) {
            continue;
        }
        const double threshold = 200.0 + rng.uniform() * 2000.0;
        const double min_fix = 20.0 + rng.uniform() * 80.0;
        const auto got = gaze::ivt_detect(series, threshold, min_fix, cfg);
        const auto want =
            brute_force_ivt(series, threshold, min_fix, cfg.merge_max_gap_ms,
                            cfg.merge_max_dist_px);
        REQUIRE(events_equal(got, want));
    }
}

TEST_CASE("gaze feature vector") {
    gaze::GazeConfig cfg;

    SUBCASE("single 10 s fixation") {
        windowing::LabeledWindow w{"p1", 0, 10000, 1, Provenance::pre_probe};
        const auto samples = stationary(512, 384, 0, 10000, 4);
        const auto v = gaze::extract_window_features(samples, w, cfg);
        CHECK(v.values[0] == doctest::Approx(0.1));      // fixation rate
        CHECK(v.values[1] == doctest::Approx(10000.0));  // mean duration
        CHECK(v.values[2] == 0.0);                       // sd of one duration
        CHECK(v.values[3] == 0.0);                       // saccade rate
        CHECK(v.values[4] == 0.0);                       // saccade amplitude
        CHECK(v.values[5] == doctest::Approx(0.0));      // mean speed
        CHECK(v.values[6] == 0.0);                       // invalid fraction
        CHECK(!v.degraded);
    }

    SUBCASE("all-invalid window degrades to the flagged zero vector") {
        windowing::LabeledWindow w{"p1", 0, 1000, 0, Provenance::negative};
        auto samples = stationary(0, 0, 0, 1000, 10);
        for (auto& s : samples) s.valid = false;
        const auto v = gaze::extract_window_features(samples, w, cfg);
        CHECK(v.degraded);
        CHECK(v.values[6] == 1.0);
        for (int i = 0; i < 6; ++i) CHECK(v.values[i] == 0.0);
    }

    SUBCASE("identical inputs give identical vectors") {
        windowing::LabeledWindow w{"p1", 0, 5000, 1, Provenance::pre_probe};
        Rng rng(3);
        std::vector<corpus::GazeSample> s;
        for (std::int64_t t = 0; t < 5000; t += 4)
            s.push_back({t, rng.uniform(0, 800), rng.uniform(0, 600), true});
        const auto a = gaze::extract_window_features(s, w, cfg);
        const auto b = gaze::extract_window_features(s, w, cfg);
        CHECK(a.values == b.values);
    }

    SUBCASE("translation invariance of the full vector") {
        windowing::LabeledWindow w{"p1", 0, 3000, 1, Provenance::pre_probe};
        Rng rng(11);
        std::vector<corpus::GazeSample> s;
        double x = 100, y = 100;
        for (std::int64_t t = 0; t < 3000; t += 4) {
            if (rng.uniform() < 0.02) {
                x = rng.uniform(0, 500);
                y = rng.uniform(0, 500);
            }
            s.push_back({t, x, y, true});
        }
        auto moved = s;
        for (auto& p : moved) {
            p.x += 321;
            p.y += 321;
        }
        const auto a = gaze::extract_window_features(s, w, cfg);
        const auto b = gaze::extract_window_features(moved, w, cfg);
        for (int i = 0; i < 7; ++i) CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-9));
    }

    SUBCASE("event durations never exceed the window span") {
        gaze::GazeConfig c2;
        Rng rng(77);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<corpus::GazeSample> s;
            double x = 0;
            for (std::int64_t t = 0; t < 4000; t += 4) {
                if (rng.uniform() < 0.01) x += 400;
                s.push_back({t, x, 0, rng.uniform() < 0.95});
            }
            gaze::KinematicsSeries series;
            try {
                series = gaze::kinematics(s, c2);
            } catch (const Error&) {
                continue;
            }
            const auto events = gaze::ivt_detect(series, 1000.0, 60.0, c2);
            std::int64_t total = 0;
            for (const auto& e : events) total += e.duration_ms();
            CHECK(total <= 4000);
        }
    }
}

TEST_CASE("degrees conversion uses screen geometry") {
    gaze::GazeConfig cfg;
    cfg.geometry = corpus::ScreenGeometry{1920, 1080, 600, 0.25};
    CHECK(cfg.unit() == gaze::SpeedUnit::deg_per_s);
    // small angle: 0.25mm/600mm per px
    CHECK(cfg.deg_per_px() == doctest::Approx(0.25 / 600.0 * 180.0 / M_PI));
    CHECK(cfg.resolved_threshold() == 30.0);

    gaze::GazeConfig no_geom;
    CHECK(no_geom.unit() == gaze::SpeedUnit::px_per_s);
    CHECK(no_geom.resolved_threshold() == 1000.0);
}
