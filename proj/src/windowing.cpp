#include "mw/windowing.hpp"

#include <algorithm>
#include <cmath>

#include "mw/csv.hpp"
#include "mw/error.hpp"
#include "mw/rng.hpp"

namespace mw::windowing {

const char* to_string(SamplingMode m) { return m == SamplingMode::pre ? "pre" : "post"; }

SamplingMode sampling_mode_from_string(const std::string& s) {
    if (s == "pre") return SamplingMode::pre;
    if (s == "post") return SamplingMode::post;
    input_error("unknown sampling mode '", s, "' (expected pre or post)");
}

namespace {

std::int64_t to_ms(double seconds) { return std::llround(seconds * 1000.0); }

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

LabeledWindow extract_pre_probe(const corpus::Session& session,
                                const corpus::ReportEvent& event, double duration_s) {
    const std::int64_t dur = to_ms(duration_s);
    if (event.t - dur < session.t_start)
        runtime_error("insufficient signal before event at t=", event.t, " ms (window needs ",
                      dur, " ms, session starts at ", session.t_start, ")");
    LabeledWindow w;
    w.participant = session.participant;
    w.t_start = event.t - dur;
    w.t_end = event.t;
    w.label = event.label;
    w.provenance = event.label ? Provenance::pre_probe : Provenance::probe_negative;
    return w;
}

LabeledWindow extract_post_probe(const corpus::Session& session,
                                 const corpus::ReportEvent& event, double duration_s,
                                 double offset_s) {
    if (event.label != 1)
        runtime_error("extract_post_probe called on a negative event at t=", event.t);
    const std::int64_t dur = to_ms(duration_s);
    const std::int64_t off = to_ms(offset_s);
    if (event.t + off + dur > session.t_end)
        runtime_error("insufficient signal after event at t=", event.t, " ms (window needs ",
                      off + dur, " ms, session ends at ", session.t_end, ")");
    LabeledWindow w;
    w.participant = session.participant;
    w.t_start = event.t + off;
    w.t_end = event.t + off + dur;
    w.label = 1;
    w.provenance = Provenance::post_probe;
    return w;
}

NegativeSample sample_negatives(const corpus::Session& session,
                                const std::vector<corpus::ReportEvent>& events,
                                double duration_s, double target_ratio, double min_gap_s,
                                std::uint64_t seed) {
    if (!(target_ratio > 0.0 && target_ratio < 1.0))
        input_error("target_ratio must lie in (0, 1), got ", target_ratio);

    const std::int64_t dur = to_ms(duration_s);
    const std::int64_t gap = to_ms(min_gap_s);

    std::size_t positives = 0;
    std::vector<std::int64_t> positive_times;
    for (const auto& e : events)
        if (e.label == 1) {
            ++positives;
            positive_times.push_back(e.t);
        }

    NegativeSample result;
    const std::size_t requested = static_cast<std::size_t>(std::llround(
        static_cast<double>(positives) * (1.0 - target_ratio) / target_ratio));
    if (requested == 0) return result;

    // candidate starts on a 1 s grid, window fully inside the session and
    // clear of [t - gap, t + gap] around every positive event
    std::vector<std::int64_t> eligible;
    for (std::int64_t s = session.t_start; s + dur <= session.t_end; s += 1000) {
        bool clear = true;
        for (std::int64_t t : positive_times) {
            if (s <= t + gap && s + dur - 1 >= t - gap) {
                clear = false;
                break;
            }
        }
        if (clear) eligible.push_back(s);
    }

    Rng rng(mix_seed(seed, 0x6e65ULL));
    rng.shuffle(eligible);
    const std::size_t take = std::min(requested, eligible.size());
    result.exhausted = take < requested;

    std::vector<std::int64_t> starts(eligible.begin(),
                                     eligible.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(starts.begin(), starts.end());
    for (std::int64_t s : starts) {
        LabeledWindow w;
        w.participant = session.participant;
        w.t_start = s;
        w.t_end = s + dur;
        w.label = 0;
        w.provenance = Provenance::negative;
        result.windows.push_back(w);
    }
    return result;
}

namespace {

// Epoch-backed sessions (EEG): windows are the original epochs, matched back
// to events by their event-aligned timestamps.
WindowSet build_epoch_windows(const corpus::Session& session,
                              const corpus::DatasetManifest& manifest, SamplingMode mode) {
    WindowSet set;
    const std::int64_t off = to_ms(manifest.sampling.post_offset_s);
    const char* want = mode == SamplingMode::pre ? "pre" : "post";

    for (const auto& event : session.events) {
        if (mode == SamplingMode::post && event.label != 1) {
            // negatives stay the standard pre-aligned ones in post mode
            const auto* negative = [&]() -> const corpus::EegEpoch* {
                for (const auto& epoch : session.eeg_epochs)
                    if (epoch.alignment == "pre" && epoch.t_end == event.t) return &epoch;
                return nullptr;
            }();
            if (!negative) {
                ++set.skipped_events;
                continue;
            }
            set.windows.push_back({session.participant, negative->t_start, negative->t_end, 0,
                                   Provenance::probe_negative});
            continue;
        }

        const corpus::EegEpoch* match = nullptr;
        for (const auto& epoch : session.eeg_epochs) {
            if (epoch.alignment != want) continue;
            const std::int64_t anchor =
                mode == SamplingMode::pre ? epoch.t_end : epoch.t_start - off;
            const auto tol = static_cast<std::int64_t>(std::ceil(1000.0 / epoch.rate));
            if (std::llabs(anchor - event.t) <= tol) {
                match = &epoch;
                break;
            }
        }
        if (!match) {
            ++set.skipped_events;
            continue;
        }
        LabeledWindow w;
        w.participant = session.participant;
        w.t_start = match->t_start;
        w.t_end = match->t_end;
        w.label = event.label;
        if (mode == SamplingMode::post)
            w.provenance = Provenance::post_probe;
        else
            w.provenance = event.label ? Provenance::pre_probe : Provenance::probe_negative;
        set.windows.push_back(w);
    }
    return set;
}

}  // namespace

WindowSet build_windows(const corpus::Session& session, const corpus::DatasetManifest& manifest,
                        SamplingMode mode, std::uint64_t seed) {
    if (!session.eeg_epochs.empty()) return build_epoch_windows(session, manifest, mode);

    WindowSet set;
    const double dur = manifest.window_duration_s;
    for (const auto& event : session.events) {
        try {
            if (event.label == 1) {
                set.windows.push_back(
                    mode == SamplingMode::pre
                        ? extract_pre_probe(session, event, dur)
                        : extract_post_probe(session, event, dur,
                                             manifest.sampling.post_offset_s));
            } else if (manifest.label_mode == corpus::LabelMode::probe_caught &&
                       event.kind == corpus::EventKind::probe) {
                set.windows.push_back(extract_pre_probe(session, event, dur));
            }
        } catch (const Error&) {
            ++set.skipped_events;
        }
    }

    if (manifest.label_mode == corpus::LabelMode::self_caught) {
        auto negatives =
            sample_negatives(session, session.events, dur, manifest.sampling.negative_target_ratio,
                             manifest.sampling.min_gap_s, mix_seed(seed, fnv1a(session.participant)));
        set.negatives_exhausted = negatives.exhausted;
        set.windows.insert(set.windows.end(), negatives.windows.begin(), negatives.windows.end());
    }

    std::sort(set.windows.begin(), set.windows.end(),
              [](const LabeledWindow& a, const LabeledWindow& b) {
                  return a.t_start != b.t_start ? a.t_start < b.t_start : a.t_end < b.t_end;
              });
    return set;
}

void write_window_index(const std::string& path, const std::vector<LabeledWindow>& windows) {
    CsvTable table;
    table.header = {"participant", "t_start_ms", "t_end_ms", "label", "provenance"};
    for (const auto& w : windows)
        table.rows.push_back({w.participant, std::to_string(w.t_start), std::to_string(w.t_end),
                              std::to_string(w.label), to_string(w.provenance)});
    write_csv(path, table);
}

}  // namespace mw::windowing
