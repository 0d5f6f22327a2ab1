#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mw/corpus.hpp"
#include "mw/eeg_features.hpp"
#include "mw/frame_features.hpp"
#include "mw/gaze_features.hpp"
#include "mw/types.hpp"
#include "mw/windowing.hpp"

namespace mw::pipeline {

struct FeatureConfig {
    gaze::GazeConfig gaze;
    frames::AggregationSpec frames;
    double eeg_shrinkage = 0.05;
    std::vector<eeg::BandSpec> bands = eeg::standard_bands();
};

struct DatasetFeatures {
    FeatureMatrix features;
    std::vector<windowing::LabeledWindow> windows;
    corpus::Split split;
    std::vector<eeg::SpdMatrix> eeg_refs;  // per band, fit on the train partition only
    bool negatives_exhausted = false;
    int skipped_events = 0;
    int discarded_events = 0;
};

// Sessions -> windows -> per-modality features. EEG tangent references come
// from training-partition windows of the person split; gaze geometry and
// per-stream rates come from the manifest. With participant_errors non-null,
// per-participant load failures are collected there and the participant is
// skipped instead of aborting the dataset.
DatasetFeatures extract_features(const corpus::DatasetManifest& manifest,
                                 windowing::SamplingMode mode, std::uint64_t window_seed,
                                 std::uint64_t split_seed, const FeatureConfig& config = {},
                                 std::vector<std::string>* participant_errors = nullptr);

// row projections of a split
FeatureMatrix rows_for_participants(const FeatureMatrix& all,
                                    const std::vector<std::string>& participants);

void write_feature_csv(const std::string& path, const FeatureMatrix& m);
FeatureMatrix read_feature_csv(const std::string& path);

void write_eeg_refs(const std::string& path, const std::vector<eeg::BandSpec>& bands,
                    const std::vector<eeg::SpdMatrix>& refs);

}  // namespace mw::pipeline
