#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marketdyn/common.hpp"

namespace marketdyn::changepoint {

/// Detected change point positions for one series, strictly increasing,
/// 1-based on the return-time axis. May be empty.
struct BreakSet {
    std::string asset_id;
    std::vector<std::int64_t> indices;
};

enum class StatisticKind { phase1, phase2 };

StatisticKind statistic_kind_from_string(const std::string& s);
std::string to_string(StatisticKind k);

/// Monte Carlo calibrated detection thresholds.
///
/// phase1 tables hold a single entry: the upper-alpha quantile of the max
/// split statistic D_n for samples of length n. phase2 tables hold the
/// conditional threshold sequence h_t for t = 2*min_segment..tmax; beyond the
/// calibrated range the conditional null distribution of D_t has stabilized,
/// so threshold_at extends the last value as a plateau.
struct ThresholdTable {
    StatisticKind kind = StatisticKind::phase1;
    double alpha = 0.0;
    std::int64_t replications = 0;
    std::uint64_t seed = 0;
    std::int64_t min_segment = 0;
    std::vector<std::int64_t> t;  // ascending
    std::vector<double> h;        // positive

    void validate() const;
    double threshold_at(std::int64_t time) const;
};

/// Exact two-sample Kolmogorov-Smirnov statistic (sorted-merge sweep).
double ks_statistic(std::span<const double> x, std::span<const double> y);

/// Calibrates detection thresholds against a simulated i.i.d. Gaussian null
/// (KS is distribution-free for continuous data, so the null's marginal is
/// immaterial). Deterministic given the seed, independent of worker count.
ThresholdTable calibrate_thresholds(StatisticKind kind, std::int64_t n_or_tmax, double alpha,
                                    std::int64_t replications, std::uint64_t seed,
                                    std::int64_t min_segment = 30, int n_threads = 1);

/// Batch (Phase I) detection: scans D_{k,n} over all admissible splits and
/// returns the 1-based argmax if the maximum exceeds the calibrated h_n.
/// Ties break toward the smallest k.
std::optional<std::int64_t> detect_batch(std::span<const double> x, const ThresholdTable& thresholds,
                                         std::int64_t min_segment = 30);

/// Sequential (Phase II) detection with restart: flags when D_t exceeds h_t,
/// records the batch argmax inside the flagged segment as the change point,
/// and resumes from the observation after it.
BreakSet detect_sequential(std::span<const double> x, const ThresholdTable& thresholds,
                           std::int64_t min_segment = 30, std::string asset_id = "");

/// Disk cache keyed by (kind, n_or_tmax, alpha, replications, seed,
/// min_segment). Returns the cached table when present, otherwise calibrates
/// and stores it.
ThresholdTable load_or_calibrate(const std::filesystem::path& cache_dir, StatisticKind kind,
                                 std::int64_t n_or_tmax, double alpha, std::int64_t replications,
                                 std::uint64_t seed, std::int64_t min_segment = 30,
                                 int n_threads = 1);

void save_threshold_table(const ThresholdTable& table, const std::filesystem::path& path);
ThresholdTable load_threshold_table(const std::filesystem::path& path);

namespace detail {

/// Result of one max-over-splits scan: the statistic value and the 1-based
/// split position (last observation of the left segment).
struct SplitScan {
    double stat = 0.0;
    std::int64_t split = 0;
};

/// Computes max_{k in [m, n-m]} KS(x_1..k, x_k+1..n) exactly in integer
/// arithmetic. Returns nullopt when n < 2m.
std::optional<SplitScan> max_split_ks(std::span<const double> x, std::int64_t min_segment);

}  // namespace detail

}  // namespace marketdyn::changepoint
