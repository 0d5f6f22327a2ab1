#include "mw/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include <fstream>

#include "mw/csv.hpp"
#include "mw/error.hpp"

namespace mw::pipeline {

namespace {

double stream_rate(const corpus::DatasetManifest& manifest, const std::string& stream,
                   const corpus::FrameFeatureTable& table) {
    const auto it = manifest.sampling_rate_hz.find(stream);
    if (it != manifest.sampling_rate_hz.end()) return it->second;
    if (table.t.size() > 1) {
        const double span_s =
            static_cast<double>(table.t.back() - table.t.front()) / 1000.0;
        if (span_s > 0) return static_cast<double>(table.t.size() - 1) / span_s;
    }
    return 0.0;
}

// modality parts fuse in manifest order when given, else sorted stream names
std::vector<std::string> fusion_streams(const corpus::DatasetManifest& manifest,
                                        const corpus::Session& session) {
    if (!manifest.fusion_order.empty()) return manifest.fusion_order;
    std::vector<std::string> names;
    for (const auto& [name, table] : session.frame_tables) {
        (void)table;
        names.push_back(name);
    }
    if (!session.gaze.empty()) names.push_back("gaze");
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace

FeatureMatrix rows_for_participants(const FeatureMatrix& all,
                                    const std::vector<std::string>& participants) {
    const std::set<std::string> wanted(participants.begin(), participants.end());
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < all.rows(); ++i)
        if (wanted.count(all.participants[static_cast<std::size_t>(i)])) idx.push_back(i);
    return all.select_rows(idx);
}

DatasetFeatures extract_features(const corpus::DatasetManifest& manifest,
                                 windowing::SamplingMode mode, std::uint64_t window_seed,
                                 std::uint64_t split_seed, const FeatureConfig& config,
                                 std::vector<std::string>* participant_errors) {
    DatasetFeatures out;

    std::vector<std::string> ids;
    for (const auto& p : manifest.participants) ids.push_back(p.id);
    out.split = corpus::person_split(ids, split_seed);

    gaze::GazeConfig gaze_cfg = config.gaze;
    gaze_cfg.geometry = manifest.screen_geometry;

    struct PerWindow {
        windowing::LabeledWindow window;
        const corpus::Session* session;
        const corpus::EegEpoch* epoch;  // EEG only
    };
    std::vector<PerWindow> per_window;
    std::map<std::string, corpus::Session> sessions;

    for (const std::string& id : ids) {
        corpus::Session session;
        try {
            session = corpus::load_session(manifest, id);
        } catch (const Error& e) {
            if (!participant_errors) throw;
            participant_errors->push_back(id + ": " + e.what());
            continue;
        }
        out.discarded_events += session.discarded_events;
        auto [it, inserted] = sessions.emplace(id, std::move(session));
        (void)inserted;
        const corpus::Session& s = it->second;

        const windowing::WindowSet set = windowing::build_windows(s, manifest, mode, window_seed);
        out.negatives_exhausted |= set.negatives_exhausted;
        out.skipped_events += set.skipped_events;
        for (const auto& w : set.windows) {
            const corpus::EegEpoch* epoch = nullptr;
            if (!s.eeg_epochs.empty()) {
                for (const auto& e : s.eeg_epochs)
                    if (e.t_start == w.t_start && e.t_end == w.t_end) {
                        epoch = &e;
                        break;
                    }
                if (!epoch)
                    runtime_error("no epoch backs window [", w.t_start, ", ", w.t_end,
                                  ") of participant ", id);
            }
            per_window.push_back({w, &s, epoch});
            out.windows.push_back(w);
        }
    }
    if (per_window.empty())
        runtime_error("dataset ", manifest.dataset_id, ": no usable windows");

    const auto rows = static_cast<Eigen::Index>(per_window.size());
    FeatureMatrix& fm = out.features;
    fm.labels.reserve(per_window.size());
    for (const auto& pw : per_window) {
        fm.labels.push_back(pw.window.label);
        fm.participants.push_back(pw.window.participant);
        fm.provenance.push_back(pw.window.provenance);
    }

    if (manifest.modality == corpus::Modality::eeg) {
        // band covariances per window, references from train windows only
        const std::size_t n_bands = config.bands.size();
        std::vector<std::vector<eeg::SpdMatrix>> covs(n_bands);
        for (const auto& pw : per_window) {
            for (std::size_t b = 0; b < n_bands; ++b) {
                const corpus::EegEpoch filtered = eeg::band_decompose(*pw.epoch, config.bands[b]);
                covs[b].push_back(eeg::spatial_covariance(filtered, config.eeg_shrinkage));
            }
        }
        const std::set<std::string> train_ids(out.split.train.begin(), out.split.train.end());
        for (std::size_t b = 0; b < n_bands; ++b) {
            std::vector<eeg::SpdMatrix> train_covs;
            for (std::size_t i = 0; i < per_window.size(); ++i)
                if (train_ids.count(per_window[i].window.participant))
                    train_covs.push_back(covs[b][i]);
            if (train_covs.empty())
                runtime_error("dataset ", manifest.dataset_id,
                              ": no training windows to fit EEG references");
            out.eeg_refs.push_back(eeg::karcher_mean(train_covs));
        }

        const Eigen::Index n_ch = covs[0][0].size();
        const Eigen::Index per_band = n_ch * (n_ch + 1) / 2;
        fm.x.resize(rows, per_band * static_cast<Eigen::Index>(n_bands));
        for (std::size_t i = 0; i < per_window.size(); ++i)
            for (std::size_t b = 0; b < n_bands; ++b)
                fm.x.row(static_cast<Eigen::Index>(i))
                    .segment(static_cast<Eigen::Index>(b) * per_band, per_band) =
                    eeg::tangent_project(covs[b][i], out.eeg_refs[b]).transpose();
        return out;
    }

    // signal modalities: per-stream vectors fused column-wise
    std::vector<Eigen::VectorXd> fused(per_window.size());
    for (std::size_t i = 0; i < per_window.size(); ++i) {
        const PerWindow& pw = per_window[i];
        const auto streams = fusion_streams(manifest, *pw.session);
        std::vector<Eigen::VectorXd> parts;
        for (const std::string& stream : streams) {
            if (stream == "gaze") {
                parts.push_back(
                    gaze::extract_window_features(pw.session->gaze, pw.window, gaze_cfg).values);
            } else {
                const auto it = pw.session->frame_tables.find(stream);
                if (it == pw.session->frame_tables.end())
                    runtime_error("participant ", pw.window.participant, " lacks stream '",
                                  stream, "'");
                parts.push_back(frames::extract_window_features(
                                    it->second, pw.window, config.frames,
                                    stream_rate(manifest, stream, it->second))
                                    .values);
            }
        }
        Eigen::Index width = 0;
        for (const auto& p : parts) width += p.size();
        Eigen::VectorXd row(width);
        Eigen::Index at = 0;
        for (const auto& p : parts) {
            row.segment(at, p.size()) = p;
            at += p.size();
        }
        fused[i] = std::move(row);
    }
    fm.x.resize(rows, fused.front().size());
    for (std::size_t i = 0; i < fused.size(); ++i) {
        if (fused[i].size() != fm.x.cols())
            runtime_error("inconsistent feature width across windows");
        fm.x.row(static_cast<Eigen::Index>(i)) = fused[i].transpose();
    }
    return out;
}

void write_feature_csv(const std::string& path, const FeatureMatrix& m) {
    std::ofstream out(path);
    if (!out) input_error("cannot write feature file: ", path);
    out << "participant,label,provenance";
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ",f_" << c;
    out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out << m.participants[static_cast<std::size_t>(r)] << ','
            << m.labels[static_cast<std::size_t>(r)] << ','
            << to_string(m.provenance[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << format_double(m.x(r, c));
        out << '\n';
    }
}

FeatureMatrix read_feature_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header.size() < 4 || table.header[0] != "participant" ||
        table.header[1] != "label" || table.header[2] != "provenance")
        input_error("feature file ", path, ": unexpected header");

    FeatureMatrix m;
    const auto cols = static_cast<Eigen::Index>(table.header.size() - 3);
    m.x.resize(static_cast<Eigen::Index>(table.rows.size()), cols);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size())
            input_error("feature file ", path, ": ragged row ", r);
        m.participants.push_back(row[0]);
        m.labels.push_back(static_cast<int>(parse_int(row[1], path)));
        m.provenance.push_back(provenance_from_string(row[2]));
        for (Eigen::Index c = 0; c < cols; ++c)
            m.x(static_cast<Eigen::Index>(r), c) =
                parse_double(row[static_cast<std::size_t>(c) + 3], path);
    }
    return m;
}

void write_eeg_refs(const std::string& path, const std::vector<eeg::BandSpec>& bands,
                    const std::vector<eeg::SpdMatrix>& refs) {
    nlohmann::ordered_json doc;
    doc["bands"] = nlohmann::ordered_json::array();
    for (std::size_t b = 0; b < bands.size(); ++b) {
        nlohmann::ordered_json entry;
        entry["name"] = bands[b].name;
        entry["lo_hz"] = bands[b].lo_hz;
        entry["hi_hz"] = bands[b].hi_hz;
        std::vector<std::vector<double>> m;
        for (Eigen::Index r = 0; r < refs[b].m.rows(); ++r) {
            std::vector<double> row;
            for (Eigen::Index c = 0; c < refs[b].m.cols(); ++c) row.push_back(refs[b].m(r, c));
            m.push_back(std::move(row));
        }
        entry["reference"] = m;
        doc["bands"].push_back(entry);
    }
    std::ofstream out(path);
    if (!out) input_error("cannot write EEG reference file: ", path);
    out << doc.dump(1) << '\n';
}

}  // namespace mw::pipeline
