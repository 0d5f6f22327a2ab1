#pragma once

#include <string>
#include <vector>

#include "mw/corpus.hpp"
#include "mw/types.hpp"
#include "mw/windowing.hpp"

namespace mw::frames {

enum class Stat { mean, sd, min, max, slope };

Stat stat_from_string(const std::string& s);
const char* to_string(Stat s);

struct AggregationSpec {
    double confidence_min = 0.75;
    double target_hz = 10.0;
    std::vector<Stat> stats = {Stat::mean, Stat::sd, Stat::min, Stat::max, Stat::slope};
};

// Drop rows under the confidence threshold; records the retained fraction.
corpus::FrameFeatureTable filter_rows(const corpus::FrameFeatureTable& table,
                                      double confidence_min);

// Nearest-timestamp selection on a uniform grid anchored at window_start_ms;
// row count becomes floor(window_duration_s * target_hz).
corpus::FrameFeatureTable downsample_rows(const corpus::FrameFeatureTable& table,
                                          double target_hz, std::int64_t window_start_ms,
                                          double window_duration_s, double source_hz);

// Per-column statistics in spec order, columns in header order; slope is the
// least-squares fit of value against time in seconds.
FeatureVector aggregate_window(const corpus::FrameFeatureTable& table,
                               const windowing::LabeledWindow& window,
                               const AggregationSpec& spec);

// window slice + filter + downsample + aggregate
FeatureVector extract_window_features(const corpus::FrameFeatureTable& table,
                                      const windowing::LabeledWindow& window,
                                      const AggregationSpec& spec, double source_hz);

}  // namespace mw::frames
