#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "marketdyn/changepoint.hpp"
#include "marketdyn/panel.hpp"

namespace marketdyn::distances {

enum class MatrixKind { trajectory, breaks, extremes, total_returns };

std::string to_string(MatrixKind k);
MatrixKind matrix_kind_from_string(const std::string& s);

/// Symmetric nonnegative pairwise structure with zero diagonal. The breaks
/// measure is a semi-metric, so no triangle inequality is implied.
struct DistanceMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;
    MatrixKind kind = MatrixKind::trajectory;

    void validate() const;
};

/// Similarity transform A = 1 - D/max(D); unit diagonal, entries in [0, 1].
struct AffinityMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;
};

/// Lowest and highest tail_fraction mass of a return sample, stored as sorted
/// order statistics (ceil(tail_fraction * n) observations per side).
struct TailMeasure {
    std::string asset_id;
    std::vector<double> lower_tail;  // ascending, values <= lower_cut
    std::vector<double> upper_tail;  // ascending, values >= upper_cut
    double lower_cut = 0.0;          // empirical tail_fraction quantile (type 7)
    double upper_cut = 0.0;          // empirical 1 - tail_fraction quantile
    double tail_fraction = 0.1;
};

/// L1 distances between price trajectories normalized to unit L1 mass.
DistanceMatrix trajectory_matrix(const ingest::PricePanel& panel);

/// Half-sum of the two mean minimal distances between sets, with |index
/// difference| as ground distance. Both sets must be nonempty.
double mj_semimetric(const changepoint::BreakSet& a, const changepoint::BreakSet& b);

/// Pairwise mj_semimetric matrix. Pairs involving an empty break set receive
/// the maximum observed pairwise distance, and a warning is appended for each.
DistanceMatrix breaks_matrix(const std::vector<changepoint::BreakSet>& sets,
                             std::vector<std::string>* warnings = nullptr);

TailMeasure tail_measure(std::span<const double> sample, std::string asset_id,
                         double tail_fraction = 0.1);

/// First Wasserstein distance between the pooled (lower + upper) tail samples.
/// With renormalize=true (default) each tail sample is treated as a
/// probability measure; with false both keep their raw 2*tail_fraction mass,
/// which scales every distance by exactly that factor.
double wasserstein_tails(const TailMeasure& a, const TailMeasure& b, bool renormalize = true);

DistanceMatrix extremes_matrix(const std::vector<TailMeasure>& measures, bool renormalize = true);

DistanceMatrix returns_matrix(std::span<const double> total_returns,
                              const std::vector<std::string>& ids);

AffinityMatrix to_affinity(const DistanceMatrix& d);

/// Frobenius norm over all entries (both triangles and the diagonal) divided
/// by the matrix dimension.
double normalized_norm(const DistanceMatrix& d);

}  // namespace marketdyn::distances
