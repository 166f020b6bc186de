#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "marketdyn/panel.hpp"

namespace marketdyn::returns {

/// Log-return matrix derived from a PricePanel. Row t (1-based 1..T-1) holds
/// ln(p(t+1)/p(t)); each row is stamped with the later date.
struct ReturnsPanel {
    std::vector<std::string> asset_ids;
    std::vector<Date> dates;  // length T-1
    Eigen::MatrixXd values;   // (T-1) x M
    std::string collection_label;

    std::int64_t n_rows() const { return static_cast<std::int64_t>(values.rows()); }
    std::int64_t n_assets() const { return static_cast<std::int64_t>(values.cols()); }
};

/// Trailing-window return sums divided by the same window's (population)
/// standard deviation. Row w corresponds to return-axis index
/// time_indices[w] = window, window+1, ...
struct RiskAdjustedSeries {
    std::vector<std::string> asset_ids;
    std::vector<std::int64_t> time_indices;  // 1-based on the returns axis
    std::vector<Date> dates;
    Eigen::MatrixXd values;  // W x M
};

ReturnsPanel log_returns(const ingest::PricePanel& panel);

/// Rescales each column to sample mean 0 and population standard deviation 1,
/// computed over `window` (1-based inclusive row range; whole panel when
/// absent). The transform is applied to all rows.
ReturnsPanel standardize(const ReturnsPanel& r, std::optional<IndexRange> window = {});

/// Per-asset sum of log returns (equals ln(last price / first price)).
Eigen::VectorXd total_returns(const ReturnsPanel& r);

/// Rolling risk-adjusted returns with a trailing window inclusive of t;
/// the default of 61 observations matches the t-60..t convention.
RiskAdjustedSeries rolling_risk_adjusted(const ReturnsPanel& r, std::int64_t window = 61);

}  // namespace marketdyn::returns
