#include "marketdyn/returns.hpp"

#include <cmath>

namespace marketdyn::returns {
namespace {

struct Moments {
    double mean;
    double sd;  // population form: sqrt(<x^2> - <x>^2)
};

Moments column_moments(const Eigen::Ref<const Eigen::VectorXd>& col) {
    const double n = static_cast<double>(col.size());
    const double mean = col.sum() / n;
    const double mean_sq = col.squaredNorm() / n;
    const double var = mean_sq - mean * mean;
    // constant columns leave only cancellation residue, caught relatively
    if (!(var > mean_sq * 1e-13)) return {mean, 0.0};
    return {mean, std::sqrt(var)};
}

}  // namespace

ReturnsPanel log_returns(const ingest::PricePanel& panel) {
    panel.validate();
    const Eigen::Index t_count = panel.prices.rows();
    const Eigen::Index m = panel.prices.cols();

    ReturnsPanel out;
    out.asset_ids = panel.asset_ids;
    out.collection_label = panel.collection_label;
    out.dates.assign(panel.dates.begin() + 1, panel.dates.end());
    out.values.resize(t_count - 1, m);
    for (Eigen::Index t = 1; t < t_count; ++t)
        for (Eigen::Index j = 0; j < m; ++j)
            out.values(t - 1, j) = std::log(panel.prices(t, j) / panel.prices(t - 1, j));
    return out;
}

ReturnsPanel standardize(const ReturnsPanel& r, std::optional<IndexRange> window) {
    const Eigen::Index rows = r.values.rows();
    IndexRange w = window.value_or(IndexRange{1, rows});
    if (w.first < 1 || w.last > rows || w.first > w.last)
        throw ValidationError("standardize: window out of range");
    const Eigen::Index first = static_cast<Eigen::Index>(w.first) - 1;
    const Eigen::Index len = static_cast<Eigen::Index>(w.count());

    ReturnsPanel out = r;
    for (Eigen::Index j = 0; j < r.values.cols(); ++j) {
        const auto m = column_moments(r.values.col(j).segment(first, len));
        if (m.sd == 0.0)
            throw ComputationError("standardize: zero variance for asset " +
                                   r.asset_ids[static_cast<std::size_t>(j)]);
        out.values.col(j) = (r.values.col(j).array() - m.mean) / m.sd;
    }
    return out;
}

Eigen::VectorXd total_returns(const ReturnsPanel& r) {
    return r.values.colwise().sum();
}

RiskAdjustedSeries rolling_risk_adjusted(const ReturnsPanel& r, std::int64_t window) {
    if (window < 2) throw ValidationError("rolling_risk_adjusted: window must be >= 2");
    const Eigen::Index rows = r.values.rows();
    if (rows < window)
        throw ValidationError("rolling_risk_adjusted: need at least " + std::to_string(window) +
                              " return observations, have " + std::to_string(rows));

    const Eigen::Index w = static_cast<Eigen::Index>(window);
    const Eigen::Index n_out = rows - w + 1;
    RiskAdjustedSeries out;
    out.asset_ids = r.asset_ids;
    out.values.resize(n_out, r.values.cols());
    out.time_indices.reserve(static_cast<std::size_t>(n_out));
    out.dates.reserve(static_cast<std::size_t>(n_out));
    for (Eigen::Index t = w - 1; t < rows; ++t) {
        out.time_indices.push_back(t + 1);  // 1-based returns axis
        out.dates.push_back(r.dates[static_cast<std::size_t>(t)]);
    }
    for (Eigen::Index j = 0; j < r.values.cols(); ++j) {
        for (Eigen::Index t = w - 1; t < rows; ++t) {
            const auto seg = r.values.col(j).segment(t - w + 1, w);
            const auto m = column_moments(seg);
            if (m.sd == 0.0)
                throw ComputationError("rolling_risk_adjusted: zero standard deviation for asset " +
                                       r.asset_ids[static_cast<std::size_t>(j)] + " in window ending " +
                                       r.dates[static_cast<std::size_t>(t)].to_string());
            out.values(t - w + 1, j) = seg.sum() / m.sd;
        }
    }
    return out;
}

}  // namespace marketdyn::returns
