#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <map>
#include <iostream>

#include <json.hpp>

#include "mw/benchmark.hpp"
#include "mw/corpus.hpp"
#include "mw/csv.hpp"
#include "mw/gaze_features.hpp"
#include "mw/error.hpp"
#include "mw/federated.hpp"
#include "mw/model_zoo.hpp"
#include "mw/pipeline.hpp"
#include "mw/synth.hpp"
#include "mw/tuning.hpp"
#include "mw/windowing.hpp"

namespace fs = std::filesystem;
using namespace mw;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitPartial = 3;

int cmd_validate(const std::vector<std::string>& manifests) {
    int violations = 0;
    for (const auto& path : manifests) {
        try {
            const corpus::DatasetManifest manifest = corpus::load_manifest(path);
            for (const auto& p : manifest.participants) {
                const corpus::Session session = corpus::load_session(manifest, p.id);
                if (session.discarded_events > 0)
                    std::cout << path << ": participant " << p.id << ": discarded "
                              << session.discarded_events << " event(s) without a binary label\n";
            }
            std::cout << path << ": OK (" << manifest.participants.size() << " participants, "
                      << corpus::to_string(manifest.modality) << ")\n";
        } catch (const Error& e) {
            std::cout << path << ": INVALID: " << e.what() << "\n";
            ++violations;
        }
    }
    return violations == 0 ? kExitOk : kExitInput;
}

struct FeatureArgs {
    std::string manifest;
    std::string sampling = "pre";
    std::string out;
    std::uint64_t seed = 0;
    std::uint64_t split_seed = 0;
    bool dump_events = false;
};

int cmd_features(const FeatureArgs& args) {
    const corpus::DatasetManifest manifest = corpus::load_manifest(args.manifest);
    const auto mode = windowing::sampling_mode_from_string(args.sampling);
    std::vector<std::string> participant_errors;
    const pipeline::DatasetFeatures data = pipeline::extract_features(
        manifest, mode, args.seed, args.split_seed, {}, &participant_errors);
    for (const auto& line : participant_errors) std::cout << "participant failed: " << line << "\n";

    fs::create_directories(args.out);
    windowing::write_window_index((fs::path(args.out) / "windows.csv").string(), data.windows);
    pipeline::write_feature_csv((fs::path(args.out) / "features.csv").string(), data.features);
    if (!data.eeg_refs.empty())
        pipeline::write_eeg_refs((fs::path(args.out) / "eeg_refs.json").string(),
                                 pipeline::FeatureConfig{}.bands, data.eeg_refs);

    if (args.dump_events) {
        // per-window gaze event dump for visual audit
        const fs::path dir = fs::path(args.out) / "events";
        fs::create_directories(dir);
        gaze::GazeConfig gaze_cfg;
        gaze_cfg.geometry = manifest.screen_geometry;
        std::map<std::string, corpus::Session> sessions;
        for (const auto& w : data.windows) {
            auto it = sessions.find(w.participant);
            if (it == sessions.end())
                it = sessions.emplace(w.participant,
                                      corpus::load_session(manifest, w.participant)).first;
            if (it->second.gaze.empty()) continue;
            std::vector<corpus::GazeSample> in_window;
            for (const auto& s : it->second.gaze)
                if (s.t >= w.t_start && s.t < w.t_end) in_window.push_back(s);
            std::vector<gaze::GazeEvent> events;
            try {
                const auto series = gaze::kinematics(in_window, gaze_cfg);
                events = gaze::ivt_detect(series, gaze_cfg.resolved_threshold(),
                                          gaze_cfg.min_fixation_ms, gaze_cfg);
            } catch (const Error&) {
                // low-quality window: empty dump
            }
            gaze::write_event_dump(
                (dir / (w.participant + "_" + std::to_string(w.t_start) + ".csv")).string(),
                events);
        }
    }

    std::cout << "dataset " << manifest.dataset_id << ": " << data.features.rows()
              << " windows x " << data.features.cols() << " features";
    if (data.skipped_events > 0) std::cout << ", skipped events: " << data.skipped_events;
    if (data.discarded_events > 0)
        std::cout << ", discarded unlabeled events: " << data.discarded_events;
    if (data.negatives_exhausted) std::cout << ", negatives exhausted";
    std::cout << "\n";
    return participant_errors.empty() ? kExitOk : kExitPartial;
}

struct SynthArgs {
    synth::SynthSpec spec;
    std::string modality = "gaze";
    std::string label_mode = "self_caught";
};

int cmd_synth(SynthArgs& args) {
    args.spec.modality = [&]() {
        if (args.modality == "gaze") return corpus::Modality::gaze;
        if (args.modality == "eeg") return corpus::Modality::eeg;
        if (args.modality == "frame_table") return corpus::Modality::frame_table;
        if (args.modality == "multimodal") return corpus::Modality::multimodal;
        input_error("unknown modality '", args.modality, "'");
    }();
    args.spec.label_mode = args.label_mode == "self_caught" ? corpus::LabelMode::self_caught
                                                            : corpus::LabelMode::probe_caught;
    const std::string manifest = synth::generate(args.spec);
    std::cout << "wrote " << manifest << "\n";
    return kExitOk;
}

struct TuneArgs {
    std::string manifest;
    std::string family = "logreg";
    std::string sampling = "pre";
    std::string out;
    std::uint64_t split_seed = 0;
    std::uint64_t window_seed = 0;
    std::size_t budget = 20;
};

int cmd_tune(const TuneArgs& args) {
    if (!bench::known_family(args.family)) input_error("unknown model family '", args.family, "'");
    const corpus::DatasetManifest manifest = corpus::load_manifest(args.manifest);
    const auto mode = windowing::sampling_mode_from_string(args.sampling);
    const pipeline::DatasetFeatures data =
        pipeline::extract_features(manifest, mode, args.window_seed, args.split_seed);
    const tune::TrainValView view(data.features, data.split);

    fs::create_directories(args.out);
    nlohmann::ordered_json best;
    std::vector<tune::TuneTrace> trace;

    if (args.family == "fedavg" || args.family == "turbosvm") {
        const auto res = tune::federated_search(tune::FederatedSpace{}, args.budget, 0, view,
                                                fed::strategy_from_string(args.family));
        trace = res.trace;
        best = {{"rounds", res.best.rounds},
                {"client_fraction", res.best.client_fraction},
                {"local_epochs", res.best.local_epochs},
                {"batch_size", res.best.batch_size},
                {"learning_rate", res.best.learning_rate},
                {"server_lr", res.best.server_lr},
                {"logits_lr", res.best.logits_lr},
                {"metric", res.best_metric}};
    } else {
        const bool xgboost = args.family == "xgboost";
        const auto family =
            models::family_from_string(xgboost ? "gboost" : args.family);
        const tune::Grid grid = tune::default_grid(
            family, family != models::Family::mlp, xgboost);
        const tune::TuneResult res = family == models::Family::mlp
                                         ? tune::nn_grid_search(grid, view)
                                         : tune::grid_search_cv(grid, view);
        trace = res.trace;
        nlohmann::ordered_json params;
        for (const auto& [key, value] : res.best) {
            if (const double* v = std::get_if<double>(&value))
                params[key] = *v;
            else
                params[key] = std::get<std::string>(value);
        }
        best = {{"family", args.family}, {"params", params}, {"metric", res.best_metric}};
    }

    tune::write_tuning_trace((fs::path(args.out) / "tuning_trace.csv").string(), trace);
    std::ofstream bout(fs::path(args.out) / "best.json");
    bout << best.dump(1) << "\n";
    std::cout << "tuned " << args.family << " on " << manifest.dataset_id << ": best written to "
              << (fs::path(args.out) / "best.json").string() << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string manifest;
    std::string family = "logreg";
    std::string sampling = "pre";
    std::string params_json;  // optional best.json from tune
    std::string out;
    std::uint64_t seed = 0;
    std::uint64_t split_seed = 0;
    std::uint64_t window_seed = 0;
};

int cmd_train(const TrainArgs& args) {
    if (args.family == "fedavg" || args.family == "turbosvm")
        input_error("train fits centralized families; use benchmark for federated runs");
    const corpus::DatasetManifest manifest = corpus::load_manifest(args.manifest);
    const auto mode = windowing::sampling_mode_from_string(args.sampling);
    const pipeline::DatasetFeatures data =
        pipeline::extract_features(manifest, mode, args.window_seed, args.split_seed);

    models::ModelSpec spec;
    const bool xgboost = args.family == "xgboost";
    spec.family = models::family_from_string(xgboost ? "gboost" : args.family);
    spec.seed = args.seed;
    if (xgboost) spec.params["colsample"] = 0.8;
    if (!args.params_json.empty()) {
        std::ifstream in(args.params_json);
        if (!in) input_error("cannot open params file: ", args.params_json);
        nlohmann::json doc;
        in >> doc;
        for (auto& [key, value] : doc.at("params").items()) {
            if (value.is_number())
                spec.params[key] = value.get<double>();
            else
                spec.params[key] = value.get<std::string>();
        }
    }

    const FeatureMatrix train = pipeline::rows_for_participants(data.features, data.split.train);
    const FeatureMatrix val = pipeline::rows_for_participants(data.features, data.split.val);
    const FeatureMatrix test = pipeline::rows_for_participants(data.features, data.split.test);

    const models::TrainedModel model = models::fit(spec, train, val);
    fs::create_directories(args.out);
    const std::string model_path = (fs::path(args.out) / "model.json").string();
    model.save(model_path);
    if (!data.eeg_refs.empty())
        pipeline::write_eeg_refs((fs::path(args.out) / "eeg_refs.json").string(),
                                 pipeline::FeatureConfig{}.bands, data.eeg_refs);

    const auto cm = eval::confusion_metrics(test.labels, model.predict_labels(test.x));
    std::cout << "trained " << args.family << " on " << manifest.dataset_id << " seed "
              << args.seed << ": test F1=" << cm.f1 << " acc=" << cm.accuracy << ", model at "
              << model_path << "\n";
    return kExitOk;
}

struct BenchArgs {
    std::string config_path;
    std::string out_override;
    std::string sampling_override;
    int jobs_override = -1;
    long long seed_override = -1;
};

int cmd_benchmark(const BenchArgs& args) {
    bench::BenchmarkConfig config = bench::load_run_config(args.config_path);
    if (!args.out_override.empty()) config.out_dir = args.out_override;
    if (!args.sampling_override.empty())
        config.modes = {windowing::sampling_mode_from_string(args.sampling_override)};
    if (args.jobs_override > 0) config.jobs = args.jobs_override;
    if (args.seed_override >= 0) config.split_seed = static_cast<std::uint64_t>(args.seed_override);
    bench::apply_config_defaults(config);
    bench::validate_config(config);

    const eval::BenchmarkReport report = bench::run_benchmark(config);
    bench::write_report(config, report);
    std::cout << eval::format_summary(report);
    if (report.failed_cells > 0) {
        std::cout << "benchmark finished with " << report.failed_cells << " failed cell(s)\n";
        return kExitPartial;
    }
    return kExitOk;
}

struct ReportArgs {
    std::string records;
    std::string out;
};

int cmd_report(const ReportArgs& args) {
    const CsvTable table = read_csv(args.records);
    std::vector<eval::MetricRecord> records;
    const int cols[10] = {table.column("dataset"), table.column("family"),
                          table.column("mode"),    table.column("seed"),
                          table.column("f1_mw"),   table.column("ac"),
                          table.column("precision"), table.column("recall"),
                          table.column("auc"),     table.column("accuracy")};
    for (int c : cols)
        if (c < 0) input_error("records file ", args.records, ": missing expected column");
    const int status = table.column("status");
    for (const auto& row : table.rows) {
        eval::MetricRecord r;
        r.dataset = row[cols[0]];
        r.family = row[cols[1]];
        r.mode = row[cols[2]];
        r.seed = parse_int(row[cols[3]], args.records);
        r.f1_mw = parse_double(row[cols[4]], args.records);
        r.ac = parse_double(row[cols[5]], args.records);
        r.precision = parse_double(row[cols[6]], args.records);
        r.recall = parse_double(row[cols[7]], args.records);
        r.auc = parse_double(row[cols[8]], args.records);
        r.accuracy = parse_double(row[cols[9]], args.records);
        if (status >= 0 && row[status] != "ok") r.failed = true;
        records.push_back(r);
    }

    eval::BenchmarkReport report;
    report.records = records;
    for (const auto& r : records) report.failed_cells += r.failed ? 1 : 0;
    report.aggregates = eval::aggregate_records(records, {});
    // chance is affine in F1, so the mean per-seed AC equals AC of the mean F1
    for (auto& a : report.aggregates) a.ac_of_mean_f1 = a.mean[1];

    fs::create_directories(args.out);
    eval::write_aggregates_csv((fs::path(args.out) / "aggregates.csv").string(),
                               report.aggregates);
    std::ofstream summary(fs::path(args.out) / "summary.txt");
    summary << eval::format_summary(report);
    std::cout << eval::format_summary(report);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mind-wandering detection benchmarking toolkit"};
    app.require_subcommand(1);

    // validate
    auto* validate = app.add_subcommand("validate", "Check manifests and session files");
    std::vector<std::string> validate_manifests;
    validate->add_option("manifests", validate_manifests, "Manifest paths")->required();

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
    SynthArgs synth_args;
    synth_cmd->add_option("--out", synth_args.spec.out_dir, "Output directory")->required();
    synth_cmd->add_option("--dataset-id", synth_args.spec.dataset_id, "Dataset identifier");
    synth_cmd->add_option("--participants", synth_args.spec.participants, "Participant count");
    synth_cmd->add_option("--events", synth_args.spec.events_per_participant,
                          "Events per participant");
    synth_cmd->add_option("--effect", synth_args.spec.effect_size, "Pre-probe effect size (SDs)");
    synth_cmd->add_option("--post-effect", synth_args.spec.post_effect_size,
                          "Post-probe effect size (default: same as --effect)");
    synth_cmd->add_option("--window", synth_args.spec.window_s, "Window duration [s]");
    synth_cmd->add_option("--seed", synth_args.spec.seed, "Generator seed");
    synth_cmd->add_option("--modality", synth_args.modality,
                          "gaze | eeg | frame_table | multimodal");
    synth_cmd->add_option("--label-mode", synth_args.label_mode, "self_caught | probe_caught");
    synth_cmd->add_option("--mw-fraction", synth_args.spec.mw_event_fraction,
                          "Positive fraction of probe events");
    synth_cmd->add_option("--negative-ratio", synth_args.spec.negative_ratio,
                          "Target positives/(positives+negatives)");
    synth_cmd->add_option("--gaze-rate", synth_args.spec.gaze_rate_hz, "Gaze sampling rate [Hz]");
    synth_cmd->add_option("--eeg-rate", synth_args.spec.eeg_rate_hz, "EEG rate (256 or 512)");
    synth_cmd->add_option("--eeg-channels", synth_args.spec.eeg_channels, "EEG channel count");

    // features
    auto* features = app.add_subcommand("features", "Extract windows and feature matrices");
    FeatureArgs feature_args;
    features->add_option("--manifest", feature_args.manifest, "Dataset manifest")->required();
    features->add_option("--sampling", feature_args.sampling, "pre | post");
    features->add_option("--out", feature_args.out, "Output directory")->required();
    features->add_option("--seed", feature_args.seed, "Window sampling seed");
    features->add_option("--split-seed", feature_args.split_seed, "Person split seed");
    features->add_flag("--dump-events", feature_args.dump_events,
                       "Write per-window gaze event CSVs");

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "Hyperparameter search for one family");
    TuneArgs tune_args;
    tune_cmd->add_option("--manifest", tune_args.manifest, "Dataset manifest")->required();
    tune_cmd->add_option("--family", tune_args.family, "Model family")->required();
    tune_cmd->add_option("--sampling", tune_args.sampling, "pre | post");
    tune_cmd->add_option("--out", tune_args.out, "Output directory")->required();
    tune_cmd->add_option("--split-seed", tune_args.split_seed, "Person split seed");
    tune_cmd->add_option("--seed", tune_args.window_seed, "Window sampling seed");
    tune_cmd->add_option("--budget", tune_args.budget, "Random-search budget (federated)");

    // train
    auto* train_cmd = app.add_subcommand("train", "Fit one model and save the artifact");
    TrainArgs train_args;
    train_cmd->add_option("--manifest", train_args.manifest, "Dataset manifest")->required();
    train_cmd->add_option("--family", train_args.family, "Model family")->required();
    train_cmd->add_option("--sampling", train_args.sampling, "pre | post");
    train_cmd->add_option("--params", train_args.params_json, "best.json from tune");
    train_cmd->add_option("--out", train_args.out, "Output directory")->required();
    train_cmd->add_option("--seed", train_args.seed, "Model seed");
    train_cmd->add_option("--split-seed", train_args.split_seed, "Person split seed");

    // benchmark
    auto* bench_cmd = app.add_subcommand("benchmark", "Run the full benchmark sweep");
    BenchArgs bench_args;
    bench_cmd->add_option("--config", bench_args.config_path, "Run config JSON")->required();
    bench_cmd->add_option("--out", bench_args.out_override, "Output directory override");
    bench_cmd->add_option("--sampling", bench_args.sampling_override, "Sampling mode override");
    bench_cmd->add_option("--jobs", bench_args.jobs_override, "Parallel benchmark cells");
    bench_cmd->add_option("--seed", bench_args.seed_override, "Split seed override");

    // report
    auto* report_cmd = app.add_subcommand("report", "Re-aggregate a records.csv");
    ReportArgs report_args;
    report_cmd->add_option("--records", report_args.records, "records.csv path")->required();
    report_cmd->add_option("--out", report_args.out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(validate_manifests);
        if (synth_cmd->parsed()) return cmd_synth(synth_args);
        if (features->parsed()) return cmd_features(feature_args);
        if (tune_cmd->parsed()) return cmd_tune(tune_args);
        if (train_cmd->parsed()) return cmd_train(train_args);
        if (bench_cmd->parsed()) return cmd_benchmark(bench_args);
        if (report_cmd->parsed()) return cmd_report(report_args);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == Error::Kind::input ? kExitInput : kExitPartial;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
