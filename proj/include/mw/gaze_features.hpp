#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mw/corpus.hpp"
#include "mw/types.hpp"
#include "mw/windowing.hpp"

namespace mw::gaze {

enum class SpeedUnit { px_per_s, deg_per_s };

struct GazeConfig {
    std::optional<double> ivt_threshold;  // default: 30 deg/s with geometry, else 1000 px/s
    double min_fixation_ms = 60.0;
    double merge_max_gap_ms = 20.0;
    double merge_max_dist_px = 20.0;
    double merge_max_dist_deg = 0.5;
    double bridge_max_gap_ms = 75.0;  // invalid gaps longer than this split the series
    std::optional<corpus::ScreenGeometry> geometry;

    double resolved_threshold() const;
    SpeedUnit unit() const;
    double deg_per_px() const;  // small-angle approximation; 0 without geometry
};

// One gap-free stretch of gaze: m points and the m-1 inter-sample speeds
// (central differences, first entry clamped to the second).
struct KinematicsSegment {
    std::vector<std::int64_t> t;  // ms, per point
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> speed;  // per interval (t[k], t[k+1]), px/s or deg/s
    std::vector<double> accel;  // forward difference of speed, size speed.size()-1
};

struct KinematicsSeries {
    std::vector<KinematicsSegment> segments;
    SpeedUnit unit = SpeedUnit::px_per_s;
    std::size_t total_samples = 0;
    std::size_t valid_samples = 0;

    double invalid_fraction() const {
        return total_samples == 0
                   ? 0.0
                   : 1.0 - static_cast<double>(valid_samples) / static_cast<double>(total_samples);
    }
};

enum class GazeEventKind { fixation, saccade };

struct GazeEvent {
    GazeEventKind kind = GazeEventKind::fixation;
    std::int64_t t_start = 0;
    std::int64_t t_end = 0;
    double centroid_x = 0;  // fixations
    double centroid_y = 0;
    double amplitude = 0;  // saccades: start-to-end displacement, px or deg

    std::int64_t duration_ms() const { return t_end - t_start; }
};

// Central-difference speeds with invalid samples linearly bridged (gap <=
// bridge_max_gap_ms) or the series split at longer gaps.
KinematicsSeries kinematics(const std::vector<corpus::GazeSample>& samples,
                            const GazeConfig& config);

// Velocity-threshold event detection: below-threshold intervals group into
// fixations, above into saccades; sub-minimum fixations merge into adjacent
// saccades; near-coincident fixations merge across tiny gaps.
std::vector<GazeEvent> ivt_detect(const KinematicsSeries& series, double threshold,
                                  double min_fixation_ms, const GazeConfig& config);

// Fixed 7-feature window summary:
//   0 fixation rate [1/s]        3 saccade rate [1/s]
//   1 mean fixation duration [ms] 4 mean saccade amplitude [px|deg]
//   2 sd fixation duration [ms]   5 mean speed [px/s|deg/s]
//   6 invalid-sample fraction
FeatureVector gaze_feature_vector(const std::vector<GazeEvent>& events,
                                  const std::vector<corpus::GazeSample>& samples,
                                  const windowing::LabeledWindow& window,
                                  const GazeConfig& config);

// window slice + kinematics + ivt + aggregate in one call
FeatureVector extract_window_features(const std::vector<corpus::GazeSample>& samples,
                                      const windowing::LabeledWindow& window,
                                      const GazeConfig& config);

void write_event_dump(const std::string& path, const std::vector<GazeEvent>& events);

}  // namespace mw::gaze
