#include "mw/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mw/error.hpp"
#include "mw/rng.hpp"

namespace fs = std::filesystem;

namespace mw::synth {

namespace {

struct Schedule {
    std::vector<corpus::ReportEvent> events;
    std::int64_t session_end = 0;
};

// One event per cycle of 3.5 window lengths: [pre window | event | post
// window | slack]. Negative windows sampled with min_gap = window_s land in
// the slack, clear of pre and post regions.
Schedule make_schedule(const SynthSpec& spec, Rng& rng) {
    Schedule s;
    const auto w = static_cast<std::int64_t>(std::llround(spec.window_s * 1000.0));
    const std::int64_t cycle = w * 7 / 2;

    std::vector<int> labels(static_cast<std::size_t>(spec.events_per_participant), 1);
    if (spec.label_mode == corpus::LabelMode::probe_caught) {
        const auto positives = static_cast<std::size_t>(std::llround(
            spec.mw_event_fraction * static_cast<double>(spec.events_per_participant)));
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i < positives ? 1 : 0;
        rng.shuffle(labels);
    }

    for (int i = 0; i < spec.events_per_participant; ++i) {
        corpus::ReportEvent e;
        e.t = cycle * static_cast<std::int64_t>(i + 1);
        e.kind = spec.label_mode == corpus::LabelMode::self_caught
                     ? corpus::EventKind::self_report
                     : corpus::EventKind::probe;
        e.label = labels[static_cast<std::size_t>(i)];
        s.events.push_back(e);
    }
    s.session_end = cycle * static_cast<std::int64_t>(spec.events_per_participant + 1);
    return s;
}

// effect size at time t: pre regions of positive events carry effect_size,
// post regions carry post_effect_size, everything else is baseline
double effect_at(const Schedule& s, std::int64_t t, std::int64_t window_ms, double pre_eff,
                 double post_eff) {
    for (const auto& e : s.events) {
        if (e.label != 1) continue;
        if (t >= e.t - window_ms && t < e.t) return pre_eff;
        if (t >= e.t && t < e.t + window_ms) return post_eff;
    }
    return 0.0;
}

void write_events(const std::string& path, const std::vector<corpus::ReportEvent>& events) {
    std::ofstream out(path);
    out << "t_ms,kind,label\n";
    for (const auto& e : events)
        out << e.t << ',' << (e.kind == corpus::EventKind::probe ? "probe" : "self_report")
            << ',' << e.label << '\n';
}

void generate_gaze(const SynthSpec& spec, const Schedule& sched, Rng& rng,
                   const std::string& path) {
    const auto window_ms = static_cast<std::int64_t>(std::llround(spec.window_s * 1000.0));
    const double post_eff = spec.post_effect_size < 0 ? spec.effect_size : spec.post_effect_size;

    struct Piece {
        std::int64_t t0, t1;
        double x0, y0, x1, y1;
        bool fixation;
    };
    std::vector<Piece> pieces;

    double cx = 960, cy = 540;
    std::int64_t t = 0;
    while (t < sched.session_end) {
        const double eff = effect_at(sched, t, window_ms, spec.effect_size, post_eff);
        const double fix_ms = std::max(80.0, rng.normal(250.0 + 50.0 * eff, 50.0));
        const double angle = rng.uniform(0.0, 6.2831853071795864769);
        const double amp = std::max(20.0, rng.normal(150.0, 30.0));
        double nx = std::clamp(cx + amp * std::cos(angle), 40.0, 1880.0);
        double ny = std::clamp(cy + amp * std::sin(angle), 40.0, 1040.0);

        const auto fix_end = t + static_cast<std::int64_t>(std::llround(fix_ms));
        pieces.push_back({t, fix_end, cx, cy, cx, cy, true});
        pieces.push_back({fix_end, fix_end + 30, cx, cy, nx, ny, false});
        t = fix_end + 30;
        cx = nx;
        cy = ny;
    }

    std::ofstream out(path);
    out << "t_ms,x_px,y_px,valid\n";
    const auto step_ms = 1000.0 / spec.gaze_rate_hz;
    std::size_t piece_at = 0;
    char line[128];
    for (double ts = 0; ts < static_cast<double>(sched.session_end); ts += step_ms) {
        const auto tms = static_cast<std::int64_t>(std::llround(ts));
        while (piece_at + 1 < pieces.size() && tms >= pieces[piece_at].t1) ++piece_at;
        const Piece& p = pieces[piece_at];
        double x, y;
        if (p.fixation) {
            x = p.x0 + rng.normal(0.0, 1.0);
            y = p.y0 + rng.normal(0.0, 1.0);
        } else {
            const double f = p.t1 > p.t0
                                 ? static_cast<double>(tms - p.t0) /
                                       static_cast<double>(p.t1 - p.t0)
                                 : 0.0;
            x = p.x0 + f * (p.x1 - p.x0);
            y = p.y0 + f * (p.y1 - p.y0);
        }
        const int valid = rng.uniform() < 0.98 ? 1 : 0;
        std::snprintf(line, sizeof(line), "%lld,%.2f,%.2f,%d\n",
                      static_cast<long long>(tms), x, y, valid);
        out << line;
    }
}

void generate_frames(const SynthSpec& spec, const Schedule& sched, Rng& rng,
                     const Eigen::VectorXd& direction, const std::string& path,
                     const char* prefix) {
    const auto window_ms = static_cast<std::int64_t>(std::llround(spec.window_s * 1000.0));
    const double post_eff = spec.post_effect_size < 0 ? spec.effect_size : spec.post_effect_size;

    std::ofstream out(path);
    out << "t_ms,confidence";
    for (int c = 0; c < spec.frame_columns; ++c) out << ',' << prefix << c;
    out << '\n';

    const auto step_ms = 1000.0 / spec.frame_rate_hz;
    char cell[48];
    for (double ts = 0; ts < static_cast<double>(sched.session_end); ts += step_ms) {
        const auto tms = static_cast<std::int64_t>(std::llround(ts));
        const double eff = effect_at(sched, tms, window_ms, spec.effect_size, post_eff);
        const double conf = rng.uniform(0.55, 1.0);
        std::snprintf(cell, sizeof(cell), "%lld,%.3f", static_cast<long long>(tms), conf);
        out << cell;
        for (int c = 0; c < spec.frame_columns; ++c) {
            const double v = rng.normal(eff * direction[c], 1.0);
            std::snprintf(cell, sizeof(cell), ",%.5f", v);
            out << cell;
        }
        out << '\n';
    }
}

void generate_eeg(const SynthSpec& spec, const Schedule& sched, Rng& rng,
                  const Eigen::MatrixXd& base_mixing, const std::string& dir) {
    const auto window_ms = static_cast<std::int64_t>(std::llround(spec.window_s * 1000.0));
    const double post_eff = spec.post_effect_size < 0 ? spec.effect_size : spec.post_effect_size;
    const int n = spec.eeg_channels;
    const auto samples =
        static_cast<Eigen::Index>(std::llround(spec.window_s * spec.eeg_rate_hz));

    // mind-wandering mixing: base rotated in the (0,1) channel plane and scaled
    auto mixing_for = [&](double eff) {
        Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(n, n);
        const double theta = 0.15 * eff;
        rot(0, 0) = std::cos(theta);
        rot(0, 1) = -std::sin(theta);
        rot(1, 0) = std::sin(theta);
        rot(1, 1) = std::cos(theta);
        return Eigen::MatrixXd((1.0 + 0.05 * eff) * rot * base_mixing);
    };

    fs::create_directories(dir);
    int epoch_id = 0;
    auto emit = [&](std::int64_t t_start, std::int64_t t_end, const std::string& alignment,
                    double eff) {
        const Eigen::MatrixXd mixing = mixing_for(eff);
        Eigen::MatrixXd white(n, samples);
        for (Eigen::Index c = 0; c < samples; ++c)
            for (int r = 0; r < n; ++r) white(r, c) = rng.normal();
        const Eigen::MatrixXd x = mixing * white;

        char name[64];
        std::snprintf(name, sizeof(name), "epoch_%04d.csv", epoch_id);
        std::ofstream out(fs::path(dir) / name);
        char cell[40];
        for (int r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < samples; ++c) {
                std::snprintf(cell, sizeof(cell), c ? ",%.6g" : "%.6g", x(r, c));
                out << cell;
            }
            out << '\n';
        }

        nlohmann::json meta;
        meta["rate_hz"] = spec.eeg_rate_hz;
        meta["t_start_ms"] = t_start;
        meta["t_end_ms"] = t_end;
        meta["alignment"] = alignment;
        std::vector<std::string> channels;
        for (int r = 0; r < n; ++r) channels.push_back("ch" + std::to_string(r));
        meta["channels"] = channels;
        std::snprintf(name, sizeof(name), "epoch_%04d.meta.json", epoch_id);
        std::ofstream mout(fs::path(dir) / name);
        mout << meta.dump(1) << '\n';
        ++epoch_id;
    };

    for (const auto& e : sched.events) {
        emit(e.t - window_ms, e.t, "pre", e.label == 1 ? spec.effect_size : 0.0);
        if (e.label == 1) emit(e.t, e.t + window_ms, "post", post_eff);
    }
}

}  // namespace

std::string generate(const SynthSpec& spec) {
    if (spec.effect_size < 0) input_error("synth: effect size must be >= 0");
    if (spec.participants < 1) input_error("synth: need at least one participant");
    fs::create_directories(spec.out_dir);

    const bool gaze = spec.modality == corpus::Modality::gaze ||
                      spec.modality == corpus::Modality::multimodal;
    const bool frames = spec.modality == corpus::Modality::frame_table ||
                        spec.modality == corpus::Modality::multimodal;
    const bool eeg = spec.modality == corpus::Modality::eeg;

    // dataset-level structure shared by all participants
    Rng dataset_rng(mix_seed(spec.seed, 0xda7aULL));
    Eigen::VectorXd video_dir(spec.frame_columns), physio_dir(spec.frame_columns);
    for (int c = 0; c < spec.frame_columns; ++c) {
        video_dir[c] = dataset_rng.uniform() < 0.5 ? -1.0 : 1.0;
        video_dir[c] *= dataset_rng.uniform(0.3, 1.0);
        physio_dir[c] = dataset_rng.uniform() < 0.5 ? -1.0 : 1.0;
        physio_dir[c] *= dataset_rng.uniform(0.3, 1.0);
    }
    Eigen::MatrixXd base_mixing =
        Eigen::MatrixXd::Identity(spec.eeg_channels, spec.eeg_channels);
    for (int r = 0; r < spec.eeg_channels; ++r)
        for (int c = 0; c < spec.eeg_channels; ++c)
            base_mixing(r, c) += 0.3 * dataset_rng.normal() /
                                 std::sqrt(static_cast<double>(spec.eeg_channels));

    nlohmann::ordered_json manifest;
    manifest["dataset_id"] = spec.dataset_id;
    manifest["modality"] = corpus::to_string(spec.modality);
    manifest["window_duration_s"] = spec.window_s;
    manifest["label_mode"] = corpus::to_string(spec.label_mode);
    nlohmann::ordered_json rates;
    if (gaze) rates["gaze"] = spec.gaze_rate_hz;
    if (frames) {
        rates["video"] = spec.frame_rate_hz;
        rates["physio"] = spec.frame_rate_hz;
    }
    if (eeg) rates["eeg_epochs"] = spec.eeg_rate_hz;
    manifest["sampling_rate_hz"] = rates;
    manifest["sampling"] = {{"negative_target_ratio", spec.negative_ratio},
                            {"min_gap_s", spec.window_s},
                            {"post_offset_s", 0.0}};
    if (spec.modality == corpus::Modality::multimodal)
        manifest["fusion_order"] = {"video", "gaze", "physio"};
    if (eeg) {
        std::vector<std::string> channels;
        for (int r = 0; r < spec.eeg_channels; ++r) channels.push_back("ch" + std::to_string(r));
        manifest["eeg_channels"] = channels;
    }
    manifest["participants"] = nlohmann::ordered_json::array();

    for (int p = 0; p < spec.participants; ++p) {
        char pid[16];
        std::snprintf(pid, sizeof(pid), "p%03d", p);
        const fs::path pdir = fs::path(spec.out_dir) / pid;
        fs::create_directories(pdir);

        Rng rng(mix_seed(spec.seed, 0x9000ULL + static_cast<std::uint64_t>(p)));
        const Schedule sched = make_schedule(spec, rng);
        write_events((pdir / "events.csv").string(), sched.events);

        nlohmann::ordered_json entry;
        entry["id"] = pid;
        nlohmann::ordered_json streams;
        streams["events"] = std::string(pid) + "/events.csv";
        if (gaze) {
            generate_gaze(spec, sched, rng, (pdir / "gaze.csv").string());
            streams["gaze"] = std::string(pid) + "/gaze.csv";
        }
        if (frames) {
            generate_frames(spec, sched, rng, video_dir, (pdir / "video.csv").string(), "v");
            streams["video"] = std::string(pid) + "/video.csv";
            if (spec.modality == corpus::Modality::multimodal) {
                generate_frames(spec, sched, rng, physio_dir, (pdir / "physio.csv").string(),
                                "ph");
                streams["physio"] = std::string(pid) + "/physio.csv";
            }
        }
        if (eeg) {
            generate_eeg(spec, sched, rng, base_mixing, (pdir / "epochs").string());
            streams["eeg_epochs"] = std::string(pid) + "/epochs";
        }
        entry["streams"] = streams;
        manifest["participants"].push_back(entry);
    }

    const std::string manifest_path = (fs::path(spec.out_dir) / "manifest.json").string();
    std::ofstream out(manifest_path);
    out << manifest.dump(1) << '\n';
    return manifest_path;
}

}  // namespace mw::synth
