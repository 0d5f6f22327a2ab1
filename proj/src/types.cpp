#include "mw/types.hpp"

#include "mw/error.hpp"

namespace mw {

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::pre_probe: return "pre_probe";
        case Provenance::post_probe: return "post_probe";
        case Provenance::negative: return "negative";
        case Provenance::probe_negative: return "probe_negative";
    }
    return "?";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "pre_probe") return Provenance::pre_probe;
    if (s == "post_probe") return Provenance::post_probe;
    if (s == "negative") return Provenance::negative;
    if (s == "probe_negative") return Provenance::probe_negative;
    input_error("unknown provenance '", s, "'");
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<Eigen::Index>& idx) const {
    FeatureMatrix out;
    out.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
    out.labels.reserve(idx.size());
    out.participants.reserve(idx.size());
    out.provenance.reserve(idx.size());
    Eigen::Index r = 0;
    for (Eigen::Index i : idx) {
        out.x.row(r++) = x.row(i);
        out.labels.push_back(labels[static_cast<std::size_t>(i)]);
        out.participants.push_back(participants[static_cast<std::size_t>(i)]);
        out.provenance.push_back(provenance[static_cast<std::size_t>(i)]);
    }
    return out;
}

}  // namespace mw
