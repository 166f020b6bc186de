#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "marketdyn/returns.hpp"

namespace marketdyn::persistence {

/// Kendall rank correlations between cross-sectional rank vectors at all
/// time pairs. Symmetric with unit diagonal, entries in [-1, 1].
struct PersistenceMatrix {
    std::vector<std::int64_t> time_indices;  // 1-based returns axis
    std::vector<Date> dates;
    Eigen::MatrixXd values;  // W x W
};

/// Tie-corrected Kendall tau-b, computed exactly with O(n log n) merge-sort
/// pair counting. Errors when either vector is entirely tied.
double kendall_tau(std::span<const double> x, std::span<const double> y);

PersistenceMatrix persistence_matrix(const returns::RiskAdjustedSeries& ra, int n_threads = 1);

/// Unnormalized Frobenius norm over all entries including the diagonal.
double persistence_norm(const PersistenceMatrix& k);

}  // namespace marketdyn::persistence
