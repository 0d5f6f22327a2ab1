#include "mw/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "mw/csv.hpp"
#include "mw/error.hpp"
#include "mw/rng.hpp"

namespace fs = std::filesystem;

namespace mw::corpus {

const char* to_string(Modality m) {
    switch (m) {
        case Modality::gaze: return "gaze";
        case Modality::eeg: return "eeg";
        case Modality::frame_table: return "frame_table";
        case Modality::multimodal: return "multimodal";
    }
    return "?";
}

const char* to_string(LabelMode m) {
    return m == LabelMode::self_caught ? "self_caught" : "probe_caught";
}

std::string DatasetManifest::resolve(const std::string& path) const {
    fs::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / p).string();
}

const ParticipantEntry& DatasetManifest::participant(const std::string& id) const {
    for (const auto& p : participants)
        if (p.id == id) return p;
    input_error("unknown participant '", id, "' in dataset ", dataset_id);
}

namespace {

Modality modality_from_string(const std::string& s) {
    if (s == "gaze") return Modality::gaze;
    if (s == "eeg") return Modality::eeg;
    if (s == "frame_table") return Modality::frame_table;
    if (s == "multimodal") return Modality::multimodal;
    input_error("unknown modality '", s, "'");
}

LabelMode label_mode_from_string(const std::string& s) {
    if (s == "self_caught") return LabelMode::self_caught;
    if (s == "probe_caught") return LabelMode::probe_caught;
    input_error("unknown label_mode '", s, "'");
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) input_error("cannot open manifest: ", path);
    nlohmann::ordered_json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        input_error("malformed manifest ", path, ": ", e.what());
    }

    DatasetManifest m;
    m.base_dir = fs::path(path).parent_path().string();
    try {
        m.dataset_id = doc.at("dataset_id").get<std::string>();
        m.modality = modality_from_string(doc.at("modality").get<std::string>());
        m.window_duration_s = doc.at("window_duration_s").get<double>();
        m.label_mode = label_mode_from_string(doc.at("label_mode").get<std::string>());
        if (doc.contains("sampling_rate_hz"))
            for (auto& [key, val] : doc["sampling_rate_hz"].items())
                m.sampling_rate_hz[key] = val.get<double>();
        if (doc.contains("screen_geometry")) {
            const auto& g = doc["screen_geometry"];
            m.screen_geometry = ScreenGeometry{
                g.at("width_px").get<double>(), g.at("height_px").get<double>(),
                g.at("distance_mm").get<double>(), g.at("pixel_pitch_mm").get<double>()};
        }
        if (doc.contains("eeg_channels"))
            m.eeg_channels = doc["eeg_channels"].get<std::vector<std::string>>();
        if (doc.contains("sampling")) {
            const auto& s = doc["sampling"];
            m.sampling.negative_target_ratio =
                s.value("negative_target_ratio", m.sampling.negative_target_ratio);
            m.sampling.min_gap_s = s.value("min_gap_s", m.sampling.min_gap_s);
            m.sampling.post_offset_s = s.value("post_offset_s", m.sampling.post_offset_s);
        }
        if (doc.contains("fusion_order"))
            m.fusion_order = doc["fusion_order"].get<std::vector<std::string>>();
        for (const auto& entry : doc.at("participants")) {
            ParticipantEntry p;
            p.id = entry.at("id").get<std::string>();
            for (auto& [key, val] : entry.at("streams").items())
                p.streams[key] = val.get<std::string>();
            m.participants.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        input_error("malformed manifest ", path, ": ", e.what());
    }

    validate_manifest(m);
    return m;
}

void validate_manifest(const DatasetManifest& m) {
    if (m.dataset_id.empty()) input_error("manifest has empty dataset_id");
    if (!(m.window_duration_s > 0))
        input_error("dataset ", m.dataset_id, ": window_duration_s must be > 0");
    if (m.participants.empty()) input_error("dataset ", m.dataset_id, ": no participants");

    std::set<std::string> ids;
    for (const auto& p : m.participants) {
        if (!ids.insert(p.id).second)
            input_error("dataset ", m.dataset_id, ": duplicate participant ID '", p.id, "'");
        if (p.streams.empty())
            input_error("dataset ", m.dataset_id, ": participant '", p.id, "' has no streams");
        for (const auto& [name, rel] : p.streams) {
            const std::string full = m.resolve(rel);
            if (!fs::exists(full))
                input_error("dataset ", m.dataset_id, ": missing file '", full,
                            "' (stream '", name, "' of participant '", p.id, "')");
        }
    }
}

namespace {

std::vector<GazeSample> load_gaze_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    const int c_t = table.column("t_ms");
    const int c_x = table.column("x_px");
    const int c_y = table.column("y_px");
    const int c_v = table.column("valid");
    if (c_t < 0 || c_x < 0 || c_y < 0 || c_v < 0)
        input_error("gaze file ", path, ": expected header t_ms,x_px,y_px,valid");

    std::vector<GazeSample> samples;
    samples.reserve(table.rows.size());
    std::int64_t prev_t = 0;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        GazeSample s;
        s.t = parse_int(row[c_t], path);
        s.x = parse_double(row[c_x], path);
        s.y = parse_double(row[c_y], path);
        s.valid = parse_int(row[c_v], path) != 0;
        if (!samples.empty() && s.t <= prev_t)
            input_error("gaze file ", path, ": non-monotone timestamp at row index ", i);
        prev_t = s.t;
        samples.push_back(s);
    }
    return samples;
}

std::vector<ReportEvent> load_events_csv(const std::string& path, int& discarded) {
    const CsvTable table = read_csv(path);
    const int c_t = table.column("t_ms");
    const int c_k = table.column("kind");
    const int c_l = table.column("label");
    if (c_t < 0 || c_k < 0 || c_l < 0)
        input_error("events file ", path, ": expected header t_ms,kind,label");

    std::vector<ReportEvent> events;
    for (const auto& row : table.rows) {
        ReportEvent e;
        e.t = parse_int(row[c_t], path);
        const std::string& kind = row[c_k];
        if (kind == "probe")
            e.kind = EventKind::probe;
        else if (kind == "self_report")
            e.kind = EventKind::self_report;
        else
            input_error("events file ", path, ": unknown event kind '", kind, "'");
        const std::string& label = row[c_l];
        if (label == "0") {
            e.label = 0;
        } else if (label == "1") {
            e.label = 1;
        } else {
            // unanswered or ambiguous response: discard, never impute
            ++discarded;
            continue;
        }
        events.push_back(e);
    }
    return events;
}

FrameFeatureTable load_frame_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    const int c_t = table.column("t_ms");
    const int c_c = table.column("confidence");
    if (c_t != 0 || c_c != 1)
        input_error("frame table ", path, ": expected header t_ms,confidence,<features...>");
    const std::size_t width = table.header.size();
    if (width < 3) input_error("frame table ", path, ": no feature columns");

    FrameFeatureTable t;
    t.columns.assign(table.header.begin() + 2, table.header.end());
    t.t.reserve(table.rows.size());
    t.confidence.reserve(table.rows.size());
    t.values.resize(static_cast<Eigen::Index>(table.rows.size()),
                    static_cast<Eigen::Index>(width - 2));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row.size() != width)
            input_error("frame table ", path, ": row ", i, " has ", row.size(),
                        " cells, expected ", width);
        const std::int64_t ts = parse_int(row[0], path);
        if (!t.t.empty() && ts < t.t.back())
            input_error("frame table ", path, ": decreasing timestamp at row ", i);
        t.t.push_back(ts);
        t.confidence.push_back(parse_double(row[1], path));
        for (std::size_t c = 2; c < width; ++c)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c - 2)) =
                parse_double(row[c], path);
    }
    return t;
}

EegEpoch load_eeg_epoch(const std::string& csv_path) {
    const fs::path meta_path = fs::path(csv_path).replace_extension(".meta.json");
    std::ifstream meta_in(meta_path);
    if (!meta_in) input_error("missing EEG sidecar: ", meta_path.string());
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        input_error("malformed EEG sidecar ", meta_path.string(), ": ", e.what());
    }

    EegEpoch epoch;
    epoch.rate = meta.at("rate_hz").get<double>();
    if (epoch.rate != 256.0 && epoch.rate != 512.0)
        input_error("EEG epoch ", csv_path, ": rate must be 256 or 512 Hz, got ", epoch.rate);
    epoch.t_end = meta.at("t_end_ms").get<std::int64_t>();
    epoch.t_start = meta.value("t_start_ms", std::int64_t{0});
    epoch.channels = meta.value("channels", std::vector<std::string>{});
    epoch.alignment = meta.value("alignment", std::string("pre"));

    std::ifstream in(csv_path);
    if (!in) input_error("cannot open EEG epoch: ", csv_path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t comma = line.find(',', pos);
            const std::string cell =
                line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            row.push_back(parse_double(cell, csv_path));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            input_error("EEG epoch ", csv_path, ": ragged rows (row ", rows.size(), " has ",
                        row.size(), " samples, expected ", rows.front().size(), ")");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) input_error("EEG epoch ", csv_path, ": empty file");

    epoch.samples.resize(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            epoch.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    if (!epoch.channels.empty() &&
        epoch.channels.size() != static_cast<std::size_t>(epoch.samples.rows()))
        input_error("EEG epoch ", csv_path, ": channel name count does not match row count");
    return epoch;
}

}  // namespace

Session load_session(const DatasetManifest& manifest, const std::string& participant_id) {
    const ParticipantEntry& entry = manifest.participant(participant_id);
    Session session;
    session.participant = participant_id;

    bool have_bounds = false;
    auto extend_bounds = [&session, &have_bounds](std::int64_t lo, std::int64_t hi) {
        if (!have_bounds) {
            session.t_start = lo;
            session.t_end = hi;
            have_bounds = true;
        } else {
            session.t_start = std::min(session.t_start, lo);
            session.t_end = std::max(session.t_end, hi);
        }
    };

    for (const auto& [name, rel] : entry.streams) {
        const std::string path = manifest.resolve(rel);
        if (name == "gaze") {
            session.gaze = load_gaze_csv(path);
            if (!session.gaze.empty())
                extend_bounds(session.gaze.front().t, session.gaze.back().t);
        } else if (name == "events") {
            session.events = load_events_csv(path, session.discarded_events);
        } else if (name == "eeg_epochs") {
            if (!fs::is_directory(path))
                input_error("eeg_epochs stream must be a directory: ", path);
            std::vector<std::string> files;
            for (const auto& e : fs::directory_iterator(path))
                if (e.path().extension() == ".csv") files.push_back(e.path().string());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                EegEpoch epoch = load_eeg_epoch(f);
                extend_bounds(epoch.t_start, epoch.t_end);
                session.eeg_epochs.push_back(std::move(epoch));
            }
        } else {
            FrameFeatureTable table = load_frame_csv(path);
            if (!table.t.empty()) extend_bounds(table.t.front(), table.t.back());
            session.frame_tables[name] = std::move(table);
        }
    }

    for (const ReportEvent& e : session.events)
        if (have_bounds && (e.t < session.t_start || e.t > session.t_end))
            input_error("participant ", participant_id, ": event at t=", e.t,
                        " ms outside session bounds [", session.t_start, ", ", session.t_end, "]");
    return session;
}

Split person_split(const std::vector<std::string>& participants,
                   const double (&ratios)[3], std::uint64_t seed) {
    if (participants.size() < 3)
        input_error("person_split needs at least 3 participants, got ", participants.size());

    std::vector<std::string> ids = participants;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 3)
        input_error("person_split needs at least 3 distinct participants, got ", ids.size());

    Rng rng(mix_seed(seed, 0x5171ULL));
    rng.shuffle(ids);

    const std::size_t n = ids.size();
    std::size_t sizes[3];
    sizes[0] = static_cast<std::size_t>(std::floor(ratios[0] * static_cast<double>(n)));
    sizes[1] = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n)));
    sizes[2] = n - sizes[0] - sizes[1];

    // Borrow rule: an empty nonzero-ratio part takes one ID from the donor
    // that is most over-allocated relative to its target and still has >= 2.
    for (int pass = 0; pass < 3; ++pass) {
        for (int part = 0; part < 3; ++part) {
            if (ratios[part] <= 0 || sizes[part] > 0) continue;
            int donor = -1;
            double best_excess = -1e300;
            for (int d = 0; d < 3; ++d) {
                if (d == part || sizes[d] < 2) continue;
                const double excess =
                    static_cast<double>(sizes[d]) - ratios[d] * static_cast<double>(n);
                if (excess > best_excess) {
                    best_excess = excess;
                    donor = d;
                }
            }
            if (donor < 0) input_error("person_split: cannot make all parts non-empty");
            --sizes[donor];
            ++sizes[part];
        }
    }

    Split split;
    split.seed = seed;
    for (int i = 0; i < 3; ++i) split.ratios[i] = ratios[i];
    auto it = ids.begin();
    split.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
    it += static_cast<std::ptrdiff_t>(sizes[0]);
    split.val.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
    it += static_cast<std::ptrdiff_t>(sizes[1]);
    split.test.assign(it, ids.end());
    return split;
}

Split person_split(const std::vector<std::string>& participants, std::uint64_t seed) {
    const double ratios[3] = {0.8, 0.1, 0.1};
    return person_split(participants, ratios, seed);
}

FeatureMatrix fuse_features(const std::vector<FeatureMatrix>& parts) {
    if (parts.empty()) input_error("fuse_features: no inputs");
    const FeatureMatrix& first = parts.front();
    Eigen::Index width = 0;
    for (const auto& part : parts) {
        if (part.rows() != first.rows())
            input_error("fuse_features: row-count mismatch (", part.rows(), " vs ",
                        first.rows(), ")");
        width += part.cols();
    }
    for (const auto& part : parts) {
        if (part.labels != first.labels || part.participants != first.participants)
            input_error("fuse_features: inputs are not aligned to the same window list");
    }

    FeatureMatrix fused;
    fused.labels = first.labels;
    fused.participants = first.participants;
    fused.provenance = first.provenance;
    fused.x.resize(first.rows(), width);
    Eigen::Index at = 0;
    for (const auto& part : parts) {
        fused.x.middleCols(at, part.cols()) = part.x;
        at += part.cols();
    }
    return fused;
}

}  // namespace mw::corpus
