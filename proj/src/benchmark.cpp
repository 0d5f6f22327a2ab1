#include "mw/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include <json.hpp>

#include "mw/error.hpp"
#include "mw/federated.hpp"
#include "mw/model_zoo.hpp"
#include "mw/tuning.hpp"

namespace fs = std::filesystem;

namespace mw::bench {

const std::vector<std::string> kAllFamilies = {
    "logreg",   "gaussian_nb", "knn",        "tree",    "random_forest",
    "gboost",   "xgboost",     "adaboost",   "svm_linear", "svm_rbf",
    "mlp",      "fedavg",      "turbosvm"};

bool known_family(const std::string& name) {
    return std::find(kAllFamilies.begin(), kAllFamilies.end(), name) != kAllFamilies.end();
}

BenchmarkConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) input_error("cannot open run config: ", path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        input_error("malformed run config ", path, ": ", e.what());
    }

    BenchmarkConfig config;
    try {
        config.manifests = doc.at("manifests").get<std::vector<std::string>>();
        if (doc.contains("families"))
            config.families = doc["families"].get<std::vector<std::string>>();
        if (doc.contains("sampling_modes")) {
            config.modes.clear();
            for (const auto& m : doc["sampling_modes"])
                config.modes.push_back(
                    windowing::sampling_mode_from_string(m.get<std::string>()));
        }
        if (doc.contains("seeds")) config.seeds = doc["seeds"].get<std::vector<long long>>();
        config.tuning = doc.value("tuning", config.tuning);
        config.split_seed = doc.value("split_seed", config.split_seed);
        config.window_seed = doc.value("window_seed", config.window_seed);
        config.jobs = doc.value("jobs", config.jobs);
        config.federated_budget = doc.value("federated_budget", config.federated_budget);
        config.window_duration_s = doc.value("window_duration_s", config.window_duration_s);
        config.post_offset_s = doc.value("post_offset_s", config.post_offset_s);
        config.out_dir = doc.value("out_dir", config.out_dir);
        if (doc.contains("features")) {
            const auto& f = doc["features"];
            config.features.eeg_shrinkage =
                f.value("eeg_shrinkage", config.features.eeg_shrinkage);
            config.features.frames.confidence_min =
                f.value("confidence_min", config.features.frames.confidence_min);
            config.features.frames.target_hz =
                f.value("target_hz", config.features.frames.target_hz);
            if (f.contains("ivt_threshold"))
                config.features.gaze.ivt_threshold = f["ivt_threshold"].get<double>();
            config.features.gaze.min_fixation_ms =
                f.value("min_fixation_ms", config.features.gaze.min_fixation_ms);
        }
    } catch (const nlohmann::json::exception& e) {
        input_error("malformed run config ", path, ": ", e.what());
    }
    return config;
}

void apply_config_defaults(BenchmarkConfig& config) {
    if (config.families.size() == 1 && config.families[0] == "all")
        config.families = kAllFamilies;
    if (config.jobs < 1) config.jobs = 1;
}

void validate_config(const BenchmarkConfig& config) {
    if (config.manifests.empty()) input_error("run config lists no manifests");
    if (config.families.empty()) input_error("run config lists no model families");
    if (config.seeds.empty()) input_error("run config lists no seeds");
    for (const auto& f : config.families)
        if (!known_family(f)) input_error("unknown model family '", f, "' in run config");
    for (const auto& m : config.manifests)
        if (!fs::exists(m)) input_error("manifest not found: ", m);
}

namespace {

struct DatasetCache {
    corpus::DatasetManifest manifest;
    std::map<std::string, pipeline::DatasetFeatures> by_mode;  // "pre"/"post"
};

models::HyperParams default_params(const std::string& family) {
    models::HyperParams p;
    if (family == "xgboost") {
        p["colsample"] = 0.8;
        p["subsample"] = 0.8;
    }
    return p;
}

fed::RoundConfig default_round_config(long long seed) {
    fed::RoundConfig cfg;
    cfg.rounds = 20;
    cfg.client_fraction = 1.0;
    cfg.local_epochs = 5;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    cfg.server_lr = 0.5;
    cfg.logits_lr = 1e-4;
    cfg.seed = static_cast<std::uint64_t>(seed);
    return cfg;
}

struct GroupTask {
    std::string dataset;
    std::string family;
    windowing::SamplingMode mode;
    const pipeline::DatasetFeatures* data;
};

}  // namespace

eval::BenchmarkReport run_benchmark(const BenchmarkConfig& config) {
    validate_config(config);

    // features once per (dataset, mode)
    std::vector<DatasetCache> caches;
    for (const auto& path : config.manifests) {
        DatasetCache cache;
        cache.manifest = corpus::load_manifest(path);
        if (config.window_duration_s > 0) cache.manifest.window_duration_s = config.window_duration_s;
        if (config.post_offset_s >= 0) cache.manifest.sampling.post_offset_s = config.post_offset_s;
        for (const auto mode : config.modes)
            cache.by_mode[windowing::to_string(mode)] = pipeline::extract_features(
                cache.manifest, mode, config.window_seed, config.split_seed, config.features);
        caches.push_back(std::move(cache));
    }

    std::vector<GroupTask> tasks;
    for (const auto& cache : caches)
        for (const auto mode : config.modes)
            for (const auto& family : config.families)
                tasks.push_back({cache.manifest.dataset_id, family, mode,
                                 &cache.by_mode.at(windowing::to_string(mode))});

    std::vector<std::vector<eval::MetricRecord>> results(tasks.size());
    std::vector<std::vector<double>> chances(tasks.size());

    auto run_group = [&config](const GroupTask& task, std::vector<eval::MetricRecord>& records,
                               std::vector<double>& chance_list) {
        const pipeline::DatasetFeatures& data = *task.data;
        const FeatureMatrix train =
            pipeline::rows_for_participants(data.features, data.split.train);
        const FeatureMatrix val = pipeline::rows_for_participants(data.features, data.split.val);
        const FeatureMatrix test =
            pipeline::rows_for_participants(data.features, data.split.test);
        const tune::TrainValView view(data.features, data.split);

        const bool federated = task.family == "fedavg" || task.family == "turbosvm";
        const bool xgboost = task.family == "xgboost";
        const std::string core_family = xgboost ? "gboost" : task.family;

        // tuned once per group, shared across seeds
        models::HyperParams tuned = default_params(task.family);
        fed::RoundConfig round_cfg = default_round_config(0);
        std::string tune_error;
        bool tuned_ok = true;
        if (config.tuning) {
            try {
                if (federated) {
                    const auto res = tune::federated_search(
                        tune::FederatedSpace{}, config.federated_budget, 0, view,
                        fed::strategy_from_string(task.family));
                    round_cfg = res.best;
                } else if (core_family == "mlp") {
                    tuned = tune::nn_grid_search(
                                tune::default_grid(models::Family::mlp, false), view)
                                .best;
                } else {
                    tuned = tune::grid_search_cv(
                                tune::default_grid(models::family_from_string(core_family),
                                                   true, xgboost),
                                view)
                                .best;
                }
            } catch (const Error& e) {
                tuned_ok = false;
                tune_error = e.what();
            }
        }

        for (const long long seed : config.seeds) {
            eval::MetricRecord record;
            record.dataset = task.dataset;
            record.family = task.family;
            record.mode = windowing::to_string(task.mode);
            record.seed = seed;
            double chance = 0.5;
            try {
                if (!tuned_ok) runtime_error("tuning failed: ", tune_error);

                Eigen::VectorXd scores;
                if (federated) {
                    fed::RoundConfig cfg = round_cfg;
                    cfg.seed = static_cast<std::uint64_t>(seed);
                    const auto run = fed::run_federated(
                        train, val, cfg, fed::strategy_from_string(task.family));
                    scores = run.model.predict_scores(test.x);
                    if (!config.out_dir.empty()) {
                        const fs::path log_dir = fs::path(config.out_dir) / "round_logs";
                        fs::create_directories(log_dir);
                        fed::write_round_log(
                            (log_dir / (task.dataset + "_" + task.family + "_" +
                                        windowing::to_string(task.mode) + "_seed" +
                                        std::to_string(seed) + ".csv"))
                                .string(),
                            run.log);
                    }
                } else {
                    models::ModelSpec spec;
                    spec.family = models::family_from_string(core_family);
                    spec.params = tuned;
                    spec.seed = static_cast<std::uint64_t>(seed);
                    const models::TrainedModel model = models::fit(spec, train, val);
                    scores = model.predict_scores(test.x);
                }

                std::vector<int> pred(static_cast<std::size_t>(scores.size()));
                for (Eigen::Index i = 0; i < scores.size(); ++i)
                    pred[static_cast<std::size_t>(i)] = scores[i] >= 0.5 ? 1 : 0;
                const auto cm = eval::confusion_metrics(test.labels, pred);

                double pos = 0;
                for (int v : test.labels) pos += v == 1 ? 1.0 : 0.0;
                chance = eval::chance_f1(pos / static_cast<double>(test.labels.size()));

                record.f1_mw = cm.f1;
                record.ac = eval::above_chance(cm.f1, chance);
                record.precision = cm.precision;
                record.recall = cm.recall;
                record.auc = eval::auc(
                    test.labels,
                    std::vector<double>(scores.data(), scores.data() + scores.size()));
                record.accuracy = cm.accuracy;
            } catch (const std::exception& e) {
                record.failed = true;
                record.error = e.what();
            }
            records.push_back(record);
            chance_list.push_back(chance);
        }
    };

    const int jobs = std::max(1, config.jobs);
    if (jobs == 1 || tasks.size() <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i)
            run_group(tasks[i], results[i], chances[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(jobs),
                                                     tasks.size());
        for (std::size_t w = 0; w < n_workers; ++w) {
            workers.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= tasks.size()) return;
                    run_group(tasks[i], results[i], chances[i]);
                }
            });
        }
        for (auto& t : workers) t.join();
    }

    eval::BenchmarkReport report;
    std::vector<double> chance_by_record;
    std::vector<std::size_t> order(tasks.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&tasks](std::size_t a, std::size_t b) {
        const GroupTask& ta = tasks[a];
        const GroupTask& tb = tasks[b];
        if (ta.dataset != tb.dataset) return ta.dataset < tb.dataset;
        if (ta.family != tb.family) return ta.family < tb.family;
        return windowing::to_string(ta.mode) < std::string(windowing::to_string(tb.mode));
    });
    for (std::size_t i : order) {
        for (std::size_t r = 0; r < results[i].size(); ++r) {
            report.records.push_back(results[i][r]);
            chance_by_record.push_back(chances[i][r]);
            if (results[i][r].failed) ++report.failed_cells;
        }
    }
    report.aggregates = eval::aggregate_records(report.records, chance_by_record);
    return report;
}

void write_report(const BenchmarkConfig& config, const eval::BenchmarkReport& report) {
    if (config.out_dir.empty()) input_error("benchmark: no output directory configured");
    fs::create_directories(config.out_dir);
    eval::write_records_csv((fs::path(config.out_dir) / "records.csv").string(),
                            report.records);
    eval::write_aggregates_csv((fs::path(config.out_dir) / "aggregates.csv").string(),
                               report.aggregates);
    std::ofstream summary(fs::path(config.out_dir) / "summary.txt");
    summary << eval::format_summary(report);
}

}  // namespace mw::bench
