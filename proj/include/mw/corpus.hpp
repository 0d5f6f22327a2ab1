#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mw/types.hpp"

namespace mw::corpus {

enum class Modality { gaze, eeg, frame_table, multimodal };
enum class LabelMode { self_caught, probe_caught };

const char* to_string(Modality m);
const char* to_string(LabelMode m);

struct ScreenGeometry {
    double width_px = 0;
    double height_px = 0;
    double distance_mm = 0;
    double pixel_pitch_mm = 0;
};

struct ParticipantEntry {
    std::string id;
    // stream name -> path (relative paths resolve against the manifest directory).
    // Known streams: "gaze", "events", "eeg_epochs" (directory), and any number
    // of frame tables ("video", "physio", ...).
    std::map<std::string, std::string> streams;
};

struct SamplingConfig {
    double negative_target_ratio = 0.5;  // positives/(positives+negatives) target
    double min_gap_s = 10.0;
    double post_offset_s = 0.0;
};

struct DatasetManifest {
    std::string dataset_id;
    Modality modality = Modality::gaze;
    std::vector<ParticipantEntry> participants;
    double window_duration_s = 10.0;
    LabelMode label_mode = LabelMode::probe_caught;
    std::map<std::string, double> sampling_rate_hz;  // per-stream nominal rate
    std::optional<ScreenGeometry> screen_geometry;
    std::vector<std::string> eeg_channels;  // explicit; never guessed
    SamplingConfig sampling;
    std::vector<std::string> fusion_order;  // frame/gaze stream order for early fusion
    std::string base_dir;                   // directory of the manifest file

    std::string resolve(const std::string& path) const;
    const ParticipantEntry& participant(const std::string& id) const;
};

struct GazeSample {
    std::int64_t t = 0;  // ms since session start
    double x = 0;
    double y = 0;
    bool valid = true;
};

struct EegEpoch {
    Eigen::MatrixXd samples;  // channels x T, microvolts
    double rate = 256.0;      // Hz, 256 or 512
    std::int64_t t_start = 0;
    std::int64_t t_end = 0;  // event-aligned timestamp
    std::vector<std::string> channels;
    std::string alignment = "pre";  // "pre": t_end at event; "post": t_start at event

    Eigen::Index channel_count() const { return samples.rows(); }
    Eigen::Index sample_count() const { return samples.cols(); }
};

struct FrameFeatureTable {
    std::vector<std::int64_t> t;      // ms per row, non-decreasing
    std::vector<double> confidence;   // unit interval per row
    std::vector<std::string> columns; // feature column names
    Eigen::MatrixXd values;           // rows x columns
    double retained_fraction = 1.0;   // set by filter_rows

    std::size_t row_count() const { return t.size(); }
};

enum class EventKind { probe, self_report };

struct ReportEvent {
    std::int64_t t = 0;
    EventKind kind = EventKind::probe;
    int label = 0;  // 1 = mind wandering
};

struct Session {
    std::string participant;
    std::vector<GazeSample> gaze;
    std::vector<EegEpoch> eeg_epochs;
    std::map<std::string, FrameFeatureTable> frame_tables;
    std::vector<ReportEvent> events;
    std::int64_t t_start = 0;
    std::int64_t t_end = 0;
    int discarded_events = 0;  // events without a binary label, dropped and counted
};

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
    double ratios[3] = {0.8, 0.1, 0.1};
};

DatasetManifest load_manifest(const std::string& path);
void validate_manifest(const DatasetManifest& manifest);  // invariant checks incl. file existence

Session load_session(const DatasetManifest& manifest, const std::string& participant_id);

// Deterministic person-independent split: sort ids, seeded Fisher-Yates, slice
// floor(r0*n)/floor(r1*n)/remainder, then borrow so no nonzero-ratio part is empty.
Split person_split(const std::vector<std::string>& participants,
                   const double (&ratios)[3], std::uint64_t seed);
Split person_split(const std::vector<std::string>& participants, std::uint64_t seed);

// Early fusion: column-wise concatenation over identical window lists.
FeatureMatrix fuse_features(const std::vector<FeatureMatrix>& parts);

}  // namespace mw::corpus
