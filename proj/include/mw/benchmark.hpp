#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mw/evaluation.hpp"
#include "mw/pipeline.hpp"
#include "mw/windowing.hpp"

namespace mw::bench {

// 13 model names: the ten core families plus the xgboost gboost variant and
// the two federated strategies.
extern const std::vector<std::string> kAllFamilies;
bool known_family(const std::string& name);

struct BenchmarkConfig {
    std::vector<std::string> manifests;
    std::vector<std::string> families = {"logreg"};
    std::vector<windowing::SamplingMode> modes = {windowing::SamplingMode::pre};
    std::vector<long long> seeds = {0, 1, 2, 3, 4};
    bool tuning = true;
    std::uint64_t split_seed = 0;
    std::uint64_t window_seed = 0;
    int jobs = 1;
    std::size_t federated_budget = 20;
    double window_duration_s = -1;  // > 0 overrides every manifest
    double post_offset_s = -1;      // >= 0 overrides every manifest
    pipeline::FeatureConfig features;
    std::string out_dir;  // records.csv, aggregates.csv, summary.txt
};

BenchmarkConfig load_run_config(const std::string& path);
void apply_config_defaults(BenchmarkConfig& config);
void validate_config(const BenchmarkConfig& config);

eval::BenchmarkReport run_benchmark(const BenchmarkConfig& config);

// writes records/aggregates/summary into config.out_dir
void write_report(const BenchmarkConfig& config, const eval::BenchmarkReport& report);

}  // namespace mw::bench
