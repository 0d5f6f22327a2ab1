#pragma once

#include <cstdint>
#include <string>

#include "mw/corpus.hpp"

namespace mw::synth {

// Deterministic synthetic dataset generator: the acceptance substrate standing
// in for the private benchmark datasets. Mind-wandering windows carry longer
// fixations and lower saccade rates (gaze), a rotated/scaled spatial
// covariance (EEG), and shifted column means (frame tables), each by
// effect_size standard deviations of the base behavior.
struct SynthSpec {
    std::string out_dir;
    std::string dataset_id = "synth";
    corpus::Modality modality = corpus::Modality::gaze;
    int participants = 40;
    int events_per_participant = 30;
    double effect_size = 2.0;
    double post_effect_size = -1.0;  // < 0: same as effect_size
    double window_s = 10.0;
    std::uint64_t seed = 0;

    // self_caught: every event is a report (label 1), negatives are sampled.
    // probe_caught: event labels are mixed at mw_event_fraction.
    corpus::LabelMode label_mode = corpus::LabelMode::self_caught;
    double mw_event_fraction = 0.5;
    double negative_ratio = 0.5;  // positives/(positives+negatives) target

    double gaze_rate_hz = 50.0;
    int eeg_channels = 8;
    double eeg_rate_hz = 256.0;
    int frame_columns = 6;
    double frame_rate_hz = 30.0;
};

// Writes streams + manifest under spec.out_dir; returns the manifest path.
std::string generate(const SynthSpec& spec);

}  // namespace mw::synth
