#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "marketdyn/common.hpp"
#include "marketdyn/dates.hpp"

namespace marketdyn::ingest {

/// Date-aligned matrix of closing prices for one named collection of assets.
/// Immutable after construction; safe to share across concurrent readers.
struct PricePanel {
    std::vector<std::string> asset_ids;
    std::vector<Date> dates;      // strictly increasing
    Eigen::MatrixXd prices;       // T x M, strictly positive
    std::string collection_label;

    std::int64_t n_dates() const { return static_cast<std::int64_t>(dates.size()); }
    std::int64_t n_assets() const { return static_cast<std::int64_t>(asset_ids.size()); }

    /// Checks all type invariants; throws ValidationError naming the offence.
    void validate() const;
};

/// One labeled segment of a panel's time axis, 1-based inclusive bounds.
struct PeriodSegment {
    std::string label;
    std::int64_t first = 0;
    std::int64_t last = 0;

    IndexRange range() const { return IndexRange{first, last}; }
};

struct PeriodPartition {
    std::vector<PeriodSegment> segments;

    const PeriodSegment* find(const std::string& label) const;
};

}  // namespace marketdyn::ingest
