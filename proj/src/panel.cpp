#include "marketdyn/panel.hpp"

#include <cmath>
#include <unordered_set>

namespace marketdyn::ingest {

void PricePanel::validate() const {
    if (asset_ids.empty()) throw ValidationError("panel '" + collection_label + "' has no assets");
    if (dates.empty()) throw ValidationError("panel '" + collection_label + "' has no dates");
    if (prices.rows() != n_dates() || prices.cols() != n_assets())
        throw ValidationError("panel '" + collection_label + "' price matrix shape mismatch");

    std::unordered_set<std::string> seen;
    for (const auto& id : asset_ids) {
        if (id.empty()) throw ValidationError("panel '" + collection_label + "' has an empty asset id");
        if (!seen.insert(id).second)
            throw ValidationError("panel '" + collection_label + "' has duplicate asset id: " + id);
    }
    for (std::size_t i = 1; i < dates.size(); ++i) {
        if (!(dates[i - 1] < dates[i]))
            throw ValidationError("panel '" + collection_label + "' dates not strictly increasing at " +
                                  dates[i].to_string());
    }
    for (Eigen::Index t = 0; t < prices.rows(); ++t) {
        for (Eigen::Index j = 0; j < prices.cols(); ++j) {
            const double p = prices(t, j);
            if (!std::isfinite(p) || p <= 0.0)
                throw ValidationError("panel '" + collection_label + "': non-positive or non-finite price for asset " +
                                      asset_ids[static_cast<std::size_t>(j)] + " on " +
                                      dates[static_cast<std::size_t>(t)].to_string());
        }
    }
}

const PeriodSegment* PeriodPartition::find(const std::string& label) const {
    for (const auto& s : segments)
        if (s.label == label) return &s;
    return nullptr;
}

}  // namespace marketdyn::ingest
