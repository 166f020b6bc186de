#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "marketdyn/common.hpp"
#include "marketdyn/returns.hpp"

namespace marketdyn::spectra {

/// Pearson correlation matrix of one rolling window, returns standardized
/// within the window. window_end_index is 1-based on the returns axis.
struct CorrelationMatrix {
    std::vector<std::string> asset_ids;
    Eigen::MatrixXd values;  // M x M, symmetric, unit diagonal
    std::int64_t window_end_index = 0;

    void validate() const;
};

struct Eigendecomposition {
    Eigen::VectorXd eigenvalues;   // descending, nonnegative after clamping
    Eigen::MatrixXd eigenvectors;  // orthonormal columns, column m pairs with eigenvalue m

    /// PC coefficient matrix (rows are component axes).
    Eigen::MatrixXd loadings() const { return eigenvectors.transpose(); }
    /// Projects standardized window returns (rows = time) onto the components.
    Eigen::MatrixXd project(const Eigen::MatrixXd& standardized_returns) const {
        return standardized_returns * eigenvectors;
    }
};

/// Per-window ordered explained-variance ratios: row w holds the eigenvalues
/// of window w's correlation matrix divided by the asset count.
struct EigenspectrumSurface {
    std::vector<std::int64_t> window_end_indices;  // ascending, 1-based returns axis
    Eigen::MatrixXd ratios;                        // W x M, rows descending, each sums to 1

    std::int64_t n_windows() const { return static_cast<std::int64_t>(ratios.rows()); }
    /// Row position of a window index, or -1.
    std::int64_t row_of(std::int64_t window_end_index) const;
};

std::vector<CorrelationMatrix> rolling_correlation(const returns::ReturnsPanel& r,
                                                   std::int64_t t1 = 60, int n_threads = 1);

Eigendecomposition eigendecompose(const CorrelationMatrix& c);

EigenspectrumSurface explained_variance_surface(const returns::ReturnsPanel& r, std::int64_t t1,
                                                int n_threads = 1);

/// Same surface computed from already-built rolling correlation matrices.
EigenspectrumSurface explained_variance_surface(const std::vector<CorrelationMatrix>& mats,
                                                int n_threads = 1);

/// Mean over the segment's windows of the summed top-k rank-matched absolute
/// differences of explained-variance ratios. The normalizer is the number of
/// window indices actually summed. Segment bounds are window end indices.
double dynamics_deviation(const EigenspectrumSurface& a, const EigenspectrumSurface& b,
                          IndexRange segment, std::int64_t top_k = 10);

struct DensityEstimate {
    std::vector<double> x;
    std::vector<double> density;
    double bandwidth = 0.0;
    std::int64_t n_observations = 0;
};

/// Gaussian KDE over all strictly-upper-triangle correlation elements pooled
/// across the segment's windows. Bandwidth is Silverman's rule
/// 0.9 * min(sigma, IQR/1.34) * n^(-1/5), floored at 1e-4.
DensityEstimate correlation_element_density(const std::vector<CorrelationMatrix>& mats,
                                            IndexRange segment, std::int64_t grid = 512,
                                            int n_threads = 1);

}  // namespace marketdyn::spectra
