#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mw/corpus.hpp"

namespace mw::windowing {

struct LabeledWindow {
    std::string participant;
    std::int64_t t_start = 0;
    std::int64_t t_end = 0;  // half-open [t_start, t_end)
    int label = 0;
    Provenance provenance = Provenance::negative;
};

// Positive sampling mode: pre-probe windows (standard) or post-probe windows
// (re-engagement ablation). Negatives are shared between the two.
enum class SamplingMode { pre, post };
const char* to_string(SamplingMode m);
SamplingMode sampling_mode_from_string(const std::string& s);

LabeledWindow extract_pre_probe(const corpus::Session& session,
                                const corpus::ReportEvent& event, double duration_s);

LabeledWindow extract_post_probe(const corpus::Session& session,
                                 const corpus::ReportEvent& event, double duration_s,
                                 double offset_s);

struct NegativeSample {
    std::vector<LabeledWindow> windows;
    bool exhausted = false;  // fewer eligible slots than requested
};

// Seeded draw of negative windows on a 1 s start grid, keeping min_gap_s away
// from every positive event; count targets positives/(positives+negatives)
// ~= target_ratio.
NegativeSample sample_negatives(const corpus::Session& session,
                                const std::vector<corpus::ReportEvent>& events,
                                double duration_s, double target_ratio, double min_gap_s,
                                std::uint64_t seed);

struct WindowSet {
    std::vector<LabeledWindow> windows;
    bool negatives_exhausted = false;
    int skipped_events = 0;  // events whose window would cross session bounds
};

// Full per-session extraction honoring label mode and sampling mode.
WindowSet build_windows(const corpus::Session& session, const corpus::DatasetManifest& manifest,
                        SamplingMode mode, std::uint64_t seed);

void write_window_index(const std::string& path, const std::vector<LabeledWindow>& windows);

}  // namespace mw::windowing
