#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mw {

// Where a labeled window came from. probe_negative marks probe answers of
// "not wandering"; negative marks synthetically sampled off-event segments.
enum class Provenance { pre_probe, post_probe, negative, probe_negative };

const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct FeatureVector {
    Eigen::VectorXd values;
    bool degraded = false;  // stats fell back to zeros (empty events, all-invalid input, ...)
};

// Windows stacked row-wise with their labels and owners.
struct FeatureMatrix {
    Eigen::MatrixXd x;
    std::vector<int> labels;
    std::vector<std::string> participants;
    std::vector<Provenance> provenance;

    Eigen::Index rows() const { return x.rows(); }
    Eigen::Index cols() const { return x.cols(); }

    FeatureMatrix select_rows(const std::vector<Eigen::Index>& idx) const;
};

}  // namespace mw
