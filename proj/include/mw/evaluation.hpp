#pragma once

#include <string>
#include <vector>

namespace mw::eval {

struct ConfusionMetrics {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    bool flagged = false;  // a 0/0 case was defined as 0
};

// Positive class is mind wandering (label 1).
ConfusionMetrics confusion_metrics(const std::vector<int>& y_true,
                                   const std::vector<int>& y_pred);

// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
// ties counted 1/2.
double auc(const std::vector<int>& y_true, const std::vector<double>& scores);

// Expected F1 of a random predictor emitting positives at the prevalence rate.
double chance_f1(double prevalence);

// (actual - chance) / (perfect - chance); negative below chance.
double above_chance(double actual, double chance, double perfect = 1.0);

struct MetricRecord {
    std::string dataset;
    std::string family;
    std::string mode;  // pre | post
    long long seed = 0;
    double f1_mw = 0;
    double ac = 0;
    double precision = 0;
    double recall = 0;
    double auc = 0;
    double accuracy = 0;
    bool failed = false;
    std::string error;
};

struct Aggregate {
    std::string dataset;
    std::string family;
    std::string mode;
    int runs = 0;
    // mean and sample sd over seeds for each metric, in record field order
    double mean[6] = {0, 0, 0, 0, 0, 0};
    double sd[6] = {0, 0, 0, 0, 0, 0};
    double ac_of_mean_f1 = 0;  // AC recomputed from the mean F1, chance from the test split
};

struct BenchmarkReport {
    std::vector<MetricRecord> records;
    std::vector<Aggregate> aggregates;
    int failed_cells = 0;
};

// mean +/- sample sd per (dataset, family, mode), sorted; failed records are
// excluded from aggregation but kept in the report
std::vector<Aggregate> aggregate_records(const std::vector<MetricRecord>& records,
                                         const std::vector<double>& chance_by_record);

void write_records_csv(const std::string& path, const std::vector<MetricRecord>& records);
void write_aggregates_csv(const std::string& path, const std::vector<Aggregate>& aggregates);
std::string format_summary(const BenchmarkReport& report);

}  // namespace mw::eval
