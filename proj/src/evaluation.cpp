#include "mw/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "mw/csv.hpp"
#include "mw/error.hpp"

namespace mw::eval {

ConfusionMetrics confusion_metrics(const std::vector<int>& y_true,
                                   const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size())
        input_error("confusion_metrics: length mismatch (", y_true.size(), " vs ",
                    y_pred.size(), ")");
    if (y_true.empty()) input_error("confusion_metrics: empty input");

    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool t = y_true[i] == 1;
        const bool p = y_pred[i] == 1;
        if (t && p)
            ++tp;
        else if (!t && p)
            ++fp;
        else if (t && !p)
            ++fn;
        else
            ++tn;
    }

    ConfusionMetrics m;
    m.accuracy = (tp + tn) / static_cast<double>(y_true.size());
    if (tp + fp > 0)
        m.precision = tp / (tp + fp);
    else
        m.flagged = true;
    if (tp + fn > 0)
        m.recall = tp / (tp + fn);
    else
        m.flagged = true;
    if (m.precision + m.recall > 0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else
        m.flagged = true;
    return m;
}

double auc(const std::vector<int>& y_true, const std::vector<double>& scores) {
    if (y_true.size() != scores.size()) input_error("auc: length mismatch");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < y_true.size(); ++i)
        (y_true[i] == 1 ? pos : neg).push_back(scores[i]);
    if (pos.empty() || neg.empty()) input_error("auc needs both classes present");

    // rank-based O((m+n) log) formulation of the pairwise count
    struct Item {
        double score;
        bool positive;
    };
    std::vector<Item> items;
    items.reserve(y_true.size());
    for (double s : pos) items.push_back({s, true});
    for (double s : neg) items.push_back({s, false});
    std::sort(items.begin(), items.end(),
              [](const Item& a, const Item& b) { return a.score < b.score; });

    double won = 0;  // positive-over-negative pairs, ties at 1/2
    std::size_t i = 0;
    double neg_below = 0;
    while (i < items.size()) {
        std::size_t j = i;
        double tie_pos = 0, tie_neg = 0;
        while (j < items.size() && items[j].score == items[i].score) {
            (items[j].positive ? tie_pos : tie_neg) += 1;
            ++j;
        }
        won += tie_pos * neg_below + 0.5 * tie_pos * tie_neg;
        neg_below += tie_neg;
        i = j;
    }
    return won / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double chance_f1(double prevalence) {
    if (!(prevalence > 0.0 && prevalence < 1.0))
        input_error("chance_f1: prevalence must lie strictly inside (0, 1), got ", prevalence);
    // random predictor at rate p: precision = recall = p, so F1 = p
    return prevalence;
}

double above_chance(double actual, double chance, double perfect) {
    if (!(chance < perfect))
        input_error("above_chance: chance (", chance, ") must be below perfect (", perfect, ")");
    return (actual - chance) / (perfect - chance);
}

std::vector<Aggregate> aggregate_records(const std::vector<MetricRecord>& records,
                                         const std::vector<double>& chance_by_record) {
    if (!chance_by_record.empty() && chance_by_record.size() != records.size())
        input_error("aggregate_records: chance list size mismatch");

    std::map<std::tuple<std::string, std::string, std::string>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].failed) continue;
        cells[{records[i].dataset, records[i].family, records[i].mode}].push_back(i);
    }

    std::vector<Aggregate> out;
    for (const auto& [key, idx] : cells) {
        Aggregate a;
        a.dataset = std::get<0>(key);
        a.family = std::get<1>(key);
        a.mode = std::get<2>(key);
        a.runs = static_cast<int>(idx.size());
        auto field = [&records](std::size_t i, int f) -> double {
            const MetricRecord& r = records[i];
            switch (f) {
                case 0: return r.f1_mw;
                case 1: return r.ac;
                case 2: return r.precision;
                case 3: return r.recall;
                case 4: return r.auc;
                default: return r.accuracy;
            }
        };
        for (int f = 0; f < 6; ++f) {
            double mean = 0;
            for (std::size_t i : idx) mean += field(i, f);
            mean /= static_cast<double>(idx.size());
            double ss = 0;
            for (std::size_t i : idx) ss += (field(i, f) - mean) * (field(i, f) - mean);
            a.mean[f] = mean;
            a.sd[f] = idx.size() > 1 ? std::sqrt(ss / static_cast<double>(idx.size() - 1)) : 0.0;
        }
        if (!chance_by_record.empty()) {
            const double chance = chance_by_record[idx.front()];
            a.ac_of_mean_f1 = above_chance(a.mean[0], chance);
        }
        out.push_back(a);
    }
    return out;
}

void write_records_csv(const std::string& path, const std::vector<MetricRecord>& records) {
    CsvTable table;
    table.header = {"dataset", "family",    "mode", "seed",     "f1_mw", "ac",
                    "precision", "recall", "auc",  "accuracy", "status"};
    for (const auto& r : records) {
        table.rows.push_back({r.dataset, r.family, r.mode, std::to_string(r.seed),
                              format_double(r.f1_mw), format_double(r.ac),
                              format_double(r.precision), format_double(r.recall),
                              format_double(r.auc), format_double(r.accuracy),
                              r.failed ? "failed: " + r.error : "ok"});
    }
    write_csv(path, table);
}

void write_aggregates_csv(const std::string& path, const std::vector<Aggregate>& aggregates) {
    CsvTable table;
    table.header = {"dataset",   "family",  "mode",    "runs",   "f1_mean", "f1_sd",
                    "ac_mean",   "ac_sd",   "prec_mean", "prec_sd", "rec_mean", "rec_sd",
                    "auc_mean",  "auc_sd",  "acc_mean", "acc_sd", "ac_of_mean_f1"};
    for (const auto& a : aggregates) {
        std::vector<std::string> row = {a.dataset, a.family, a.mode, std::to_string(a.runs)};
        for (int f = 0; f < 6; ++f) {
            row.push_back(format_double(a.mean[f]));
            row.push_back(format_double(a.sd[f]));
        }
        row.push_back(format_double(a.ac_of_mean_f1));
        table.rows.push_back(row);
    }
    write_csv(path, table);
}

namespace {

std::string pct(double v, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f+-%.1f", v * 100.0, sd * 100.0);
    return buf;
}

}  // namespace

std::string format_summary(const BenchmarkReport& report) {
    std::ostringstream os;
    os << "dataset          mode  model         F1[%]        AC[%]  Prec.[%]     Rec.[%]      "
          "AUC[%]       Acc.[%]\n";

    // best family per (dataset, mode) by mean F1
    std::map<std::pair<std::string, std::string>, const Aggregate*> best;
    for (const auto& a : report.aggregates) {
        auto& slot = best[{a.dataset, a.mode}];
        if (!slot || a.mean[0] > slot->mean[0]) slot = &a;
    }
    for (const auto& a : report.aggregates) {
        const bool is_best = best[{a.dataset, a.mode}] == &a;
        char line[256];
        std::snprintf(line, sizeof(line), "%-16s %-5s %-12s%1s %-12s %5.1f  %-12s %-12s %-12s %-12s\n",
                      a.dataset.c_str(), a.mode.c_str(), a.family.c_str(), is_best ? "*" : "",
                      pct(a.mean[0], a.sd[0]).c_str(), a.ac_of_mean_f1 * 100.0,
                      pct(a.mean[2], a.sd[2]).c_str(), pct(a.mean[3], a.sd[3]).c_str(),
                      pct(a.mean[4], a.sd[4]).c_str(), pct(a.mean[5], a.sd[5]).c_str());
        os << line;
    }
    if (report.failed_cells > 0) os << "failed cells: " << report.failed_cells << "\n";
    return os.str();
}

}  // namespace mw::eval
