#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "mw/corpus.hpp"
#include "mw/error.hpp"
#include "mw/rng.hpp"

namespace fs = std::filesystem;
using namespace mw;

namespace {

fs::path make_tmp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("mw_corpus_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

std::string two_participant_manifest(const std::string& second_id,
                                     const std::string& second_gaze) {
    return std::string(R"({
  "dataset_id": "toy",
  "modality": "gaze",
  "window_duration_s": 10.0,
  "label_mode": "self_caught",
  "sampling_rate_hz": {"gaze": 100.0},
  "participants": [
    {"id": "p1", "streams": {"gaze": "p1_gaze.csv", "events": "p1_events.csv"}},
    {"id": ")") +
           second_id + R"(", "streams": {"gaze": ")" + second_gaze +
           R"(", "events": "p1_events.csv"}}
  ]
})";
}

}  // namespace

TEST_CASE("manifest round trip and invariants") {
    const fs::path dir = make_tmp_dir("manifest");
    write_file(dir / "p1_gaze.csv", "t_ms,x_px,y_px,valid\n0,1,1,1\n10,2,2,1\n20,3,3,1\n");
    write_file(dir / "p2_gaze.csv", "t_ms,x_px,y_px,valid\n0,1,1,1\n10,2,2,1\n");
    write_file(dir / "p1_events.csv", "t_ms,kind,label\n15,self_report,1\n");

    SUBCASE("valid manifest loads with both participants") {
        write_file(dir / "manifest.json", two_participant_manifest("p2", "p2_gaze.csv"));
        const auto m = corpus::load_manifest((dir / "manifest.json").string());
        CHECK(m.participants.size() == 2);
        CHECK(m.modality == corpus::Modality::gaze);
        CHECK(m.window_duration_s == 10.0);
    }

    SUBCASE("duplicate participant id is rejected") {
        write_file(dir / "manifest.json", two_participant_manifest("p1", "p2_gaze.csv"));
        CHECK_THROWS_WITH_AS(corpus::load_manifest((dir / "manifest.json").string()),
                             doctest::Contains("duplicate participant ID 'p1'"), Error);
    }

    SUBCASE("missing stream file is rejected with its path") {
        write_file(dir / "manifest.json", two_participant_manifest("p3", "p3_gaze.csv"));
        CHECK_THROWS_WITH_AS(corpus::load_manifest((dir / "manifest.json").string()),
                             doctest::Contains("p3_gaze.csv"), Error);
    }

    SUBCASE("malformed json is a parse error") {
        write_file(dir / "manifest.json", "{not json");
        CHECK_THROWS_WITH_AS(corpus::load_manifest((dir / "manifest.json").string()),
                             doctest::Contains("malformed manifest"), Error);
    }
}

TEST_CASE("session loading") {
    const fs::path dir = make_tmp_dir("session");
    std::string gaze = "t_ms,x_px,y_px,valid\n";
    for (int i = 0; i < 1000; ++i)
        gaze += std::to_string(i * 10) + ",1.0,2.0,1\n";
    write_file(dir / "p1_gaze.csv", gaze);
    write_file(dir / "p1_events.csv",
               "t_ms,kind,label\n100,probe,1\n2000,probe,0\n5000,self_report,1\n");
    write_file(dir / "manifest.json", R"({
  "dataset_id": "toy", "modality": "gaze", "window_duration_s": 1.0,
  "label_mode": "probe_caught",
  "participants": [{"id": "p1", "streams": {"gaze": "p1_gaze.csv", "events": "p1_events.csv"}}]
})");
    const auto manifest = corpus::load_manifest((dir / "manifest.json").string());

    SUBCASE("counts preserved") {
        const auto session = corpus::load_session(manifest, "p1");
        CHECK(session.gaze.size() == 1000);
        CHECK(session.events.size() == 3);
        CHECK(session.discarded_events == 0);
        CHECK(session.t_start == 0);
        CHECK(session.t_end == 9990);
    }

    SUBCASE("non-monotone gaze timestamps rejected with row index") {
        write_file(dir / "p1_gaze.csv", "t_ms,x_px,y_px,valid\n0,1,1,1\n10,1,1,1\n5,1,1,1\n");
        CHECK_THROWS_WITH_AS(corpus::load_session(manifest, "p1"),
                             doctest::Contains("row index 2"), Error);
    }

    SUBCASE("unanswered probe labels are discarded and counted") {
        write_file(dir / "p1_events.csv", "t_ms,kind,label\n100,probe,1\n200,probe,na\n");
        const auto session = corpus::load_session(manifest, "p1");
        CHECK(session.events.size() == 1);
        CHECK(session.discarded_events == 1);
    }

    SUBCASE("unknown participant") {
        CHECK_THROWS_WITH_AS(corpus::load_session(manifest, "p9"),
                             doctest::Contains("unknown participant"), Error);
    }
}

TEST_CASE("ragged EEG epoch rows are rejected") {
    const fs::path dir = make_tmp_dir("eeg");
    fs::create_directories(dir / "epochs");
    write_file(dir / "epochs/epoch_0000.csv", "1,2,3\n4,5\n");
    write_file(dir / "epochs/epoch_0000.meta.json",
               R"({"rate_hz": 256, "t_start_ms": 0, "t_end_ms": 1000, "alignment": "pre"})");
    write_file(dir / "events.csv", "t_ms,kind,label\n500,probe,1\n");
    write_file(dir / "manifest.json", R"({
  "dataset_id": "eeg_toy", "modality": "eeg", "window_duration_s": 1.0,
  "label_mode": "probe_caught",
  "participants": [{"id": "p1", "streams": {"eeg_epochs": "epochs", "events": "events.csv"}}]
})");
    const auto manifest = corpus::load_manifest((dir / "manifest.json").string());
    CHECK_THROWS_WITH_AS(corpus::load_session(manifest, "p1"), doctest::Contains("ragged"),
                         Error);
}

TEST_CASE("person_split sizes and determinism") {
    auto ids = [](int n) {
        std::vector<std::string> out;
        for (int i = 0; i < n; ++i) out.push_back("p" + std::to_string(100 + i));
        return out;
    };

    SUBCASE("10 participants split 8/1/1") {
        for (std::uint64_t seed : {0ULL, 1ULL, 17ULL}) {
            const auto split = corpus::person_split(ids(10), seed);
            CHECK(split.train.size() == 8);
            CHECK(split.val.size() == 1);
            CHECK(split.test.size() == 1);
        }
    }

    SUBCASE("7 participants borrow to 5/1/1") {
        const auto split = corpus::person_split(ids(7), 3);
        CHECK(split.train.size() == 5);
        CHECK(split.val.size() == 1);
        CHECK(split.test.size() == 1);
    }

    SUBCASE("3 participants give 1/1/1") {
        const auto split = corpus::person_split(ids(3), 0);
        CHECK(split.train.size() == 1);
        CHECK(split.val.size() == 1);
        CHECK(split.test.size() == 1);
    }

    SUBCASE("identical inputs give identical splits") {
        const auto a = corpus::person_split(ids(12), 42);
        const auto b = corpus::person_split(ids(12), 42);
        CHECK(a.train == b.train);
        CHECK(a.val == b.val);
        CHECK(a.test == b.test);
    }

    SUBCASE("input permutation does not change the split") {
        auto shuffled = ids(12);
        Rng rng(9);
        rng.shuffle(shuffled);
        const auto a = corpus::person_split(ids(12), 5);
        const auto b = corpus::person_split(shuffled, 5);
        CHECK(a.train == b.train);
        CHECK(a.test == b.test);
    }

    SUBCASE("fewer than 3 participants is an error") {
        CHECK_THROWS_AS(corpus::person_split(ids(2), 0), Error);
    }
}

TEST_CASE("person_split partition property over random cohorts") {
    Rng rng(123);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 3 + static_cast<int>(rng.below(60));
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
        const auto split = corpus::person_split(ids, rng.next_u64());

        std::set<std::string> seen;
        for (const auto* part : {&split.train, &split.val, &split.test})
            for (const auto& id : *part) CHECK(seen.insert(id).second);
        CHECK(seen.size() == ids.size());
        CHECK(!split.train.empty());
        CHECK(!split.val.empty());
        CHECK(!split.test.empty());
    }
}

TEST_CASE("fuse_features") {
    auto part = [](Eigen::Index rows, Eigen::Index cols) {
        FeatureMatrix m;
        m.x = Eigen::MatrixXd::Constant(rows, cols, 1.0);
        m.labels.assign(static_cast<std::size_t>(rows), 1);
        m.labels[0] = 0;
        m.participants.assign(static_cast<std::size_t>(rows), "p1");
        m.provenance.assign(static_cast<std::size_t>(rows), Provenance::pre_probe);
        return m;
    };

    SUBCASE("widths add up per the multimodal layout") {
        const auto fused = corpus::fuse_features({part(4, 804), part(4, 155), part(4, 108)});
        CHECK(fused.cols() == 1067);
        CHECK(fused.rows() == 4);
    }

    SUBCASE("single input is the identity") {
        const auto a = part(5, 7);
        const auto fused = corpus::fuse_features({a});
        CHECK(fused.x == a.x);
    }

    SUBCASE("row mismatch is rejected") {
        CHECK_THROWS_WITH_AS(corpus::fuse_features({part(5, 3), part(6, 3)}),
                             doctest::Contains("row-count mismatch"), Error);
    }
}
