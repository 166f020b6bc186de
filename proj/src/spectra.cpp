#include "marketdyn/spectra.hpp"

#include <algorithm>
#include <cmath>

#include "marketdyn/parallel.hpp"

namespace marketdyn::spectra {
namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kEigenvalueFloor = -1e-10;

/// Standardizes the window block (population sigma per column) and forms the
/// Pearson matrix (1/T1) * Z^T Z with an exactly symmetric fill.
CorrelationMatrix window_correlation(const returns::ReturnsPanel& r, Eigen::Index first,
                                     Eigen::Index t1) {
    const Eigen::Index m = r.values.cols();
    Eigen::MatrixXd z(t1, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto seg = r.values.col(j).segment(first, t1);
        const double n = static_cast<double>(t1);
        const double mean = seg.sum() / n;
        const double mean_sq = seg.squaredNorm() / n;
        const double var = mean_sq - mean * mean;
        // constant columns leave only cancellation residue, caught relatively
        if (!(var > mean_sq * 1e-13))
            throw ComputationError("rolling_correlation: zero variance for asset " +
                                   r.asset_ids[static_cast<std::size_t>(j)] +
                                   " in window ending at return index " +
                                   std::to_string(first + t1));
        z.col(j) = (seg.array() - mean) / std::sqrt(var);
    }

    CorrelationMatrix c;
    c.asset_ids = r.asset_ids;
    c.window_end_index = first + t1;  // 1-based: rows first..first+t1-1 (0-based)
    c.values.resize(m, m);
    const double inv_t1 = 1.0 / static_cast<double>(t1);
    for (Eigen::Index i = 0; i < m; ++i) {
        c.values(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < m; ++j) {
            double v = z.col(i).dot(z.col(j)) * inv_t1;
            v = std::clamp(v, -1.0, 1.0);
            c.values(i, j) = v;
            c.values(j, i) = v;
        }
    }
    return c;
}

}  // namespace

void CorrelationMatrix::validate() const {
    const Eigen::Index m = values.rows();
    if (values.cols() != m || static_cast<Eigen::Index>(asset_ids.size()) != m)
        throw ValidationError("correlation matrix shape mismatch");
    for (Eigen::Index i = 0; i < m; ++i) {
        if (values(i, i) != 1.0) throw ValidationError("correlation matrix diagonal must be 1");
        for (Eigen::Index j = 0; j < m; ++j) {
            if (std::abs(values(i, j) - values(j, i)) > kSymmetryTol)
                throw ValidationError("correlation matrix not symmetric");
            if (values(i, j) < -1.0 || values(i, j) > 1.0)
                throw ValidationError("correlation element outside [-1, 1]");
        }
    }
}

std::vector<CorrelationMatrix> rolling_correlation(const returns::ReturnsPanel& r, std::int64_t t1,
                                                   int n_threads) {
    if (t1 < 2) throw ValidationError("rolling_correlation: window must be >= 2");
    const Eigen::Index rows = r.values.rows();
    if (rows < t1)
        throw ValidationError("rolling_correlation: need at least " + std::to_string(t1) +
                              " return observations, have " + std::to_string(rows));
    const Eigen::Index w = static_cast<Eigen::Index>(t1);
    const std::int64_t n_windows = rows - w + 1;
    std::vector<CorrelationMatrix> out(static_cast<std::size_t>(n_windows));
    parallel_for(n_windows, n_threads, [&](std::int64_t i) {
        out[static_cast<std::size_t>(i)] = window_correlation(r, static_cast<Eigen::Index>(i), w);
    });
    return out;
}

Eigendecomposition eigendecompose(const CorrelationMatrix& c) {
    const Eigen::Index m = c.values.rows();
    if (c.values.cols() != m) throw ValidationError("eigendecompose: matrix not square");
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j)
            if (std::abs(c.values(i, j) - c.values(j, i)) > kSymmetryTol)
                throw ValidationError("eigendecompose: matrix not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c.values);
    if (solver.info() != Eigen::Success)
        throw ComputationError("eigendecompose: solver failed to converge");

    // Eigen returns ascending order; flip to descending.
    Eigendecomposition d;
    d.eigenvalues.resize(m);
    d.eigenvectors.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        double lambda = solver.eigenvalues()(m - 1 - i);
        if (lambda < 0.0) {
            if (lambda < kEigenvalueFloor)
                throw ComputationError("eigendecompose: eigenvalue " + std::to_string(lambda) +
                                       " below PSD tolerance");
            lambda = 0.0;
        }
        d.eigenvalues(i) = lambda;
        d.eigenvectors.col(i) = solver.eigenvectors().col(m - 1 - i);
    }
    return d;
}

std::int64_t EigenspectrumSurface::row_of(std::int64_t window_end_index) const {
    const auto it =
        std::lower_bound(window_end_indices.begin(), window_end_indices.end(), window_end_index);
    if (it == window_end_indices.end() || *it != window_end_index) return -1;
    return it - window_end_indices.begin();
}

EigenspectrumSurface explained_variance_surface(const std::vector<CorrelationMatrix>& mats,
                                                int n_threads) {
    if (mats.empty()) throw ValidationError("explained_variance_surface: no windows");
    const Eigen::Index m = mats.front().values.rows();
    EigenspectrumSurface s;
    s.window_end_indices.resize(mats.size());
    s.ratios.resize(static_cast<Eigen::Index>(mats.size()), m);
    parallel_for(static_cast<std::int64_t>(mats.size()), n_threads, [&](std::int64_t i) {
        const auto& c = mats[static_cast<std::size_t>(i)];
        const auto d = eigendecompose(c);
        s.window_end_indices[static_cast<std::size_t>(i)] = c.window_end_index;
        s.ratios.row(static_cast<Eigen::Index>(i)) =
            d.eigenvalues.transpose() / static_cast<double>(m);
    });
    return s;
}

EigenspectrumSurface explained_variance_surface(const returns::ReturnsPanel& r, std::int64_t t1,
                                                int n_threads) {
    return explained_variance_surface(rolling_correlation(r, t1, n_threads), n_threads);
}

double dynamics_deviation(const EigenspectrumSurface& a, const EigenspectrumSurface& b,
                          IndexRange segment, std::int64_t top_k) {
    if (segment.count() <= 0) throw ValidationError("dynamics_deviation: empty segment");
    if (top_k < 1) throw ValidationError("dynamics_deviation: top_k must be >= 1");
    if (a.ratios.cols() < top_k || b.ratios.cols() < top_k)
        throw ValidationError("dynamics_deviation: surfaces have fewer than top_k columns");

    double total = 0.0;
    for (std::int64_t t = segment.first; t <= segment.last; ++t) {
        const std::int64_t ra = a.row_of(t);
        const std::int64_t rb = b.row_of(t);
        if (ra < 0 || rb < 0)
            throw ValidationError("dynamics_deviation: window index " + std::to_string(t) +
                                  " not present in both surfaces");
        double acc = 0.0;
        for (std::int64_t i = 0; i < top_k; ++i)
            acc += std::abs(a.ratios(static_cast<Eigen::Index>(ra), static_cast<Eigen::Index>(i)) -
                            b.ratios(static_cast<Eigen::Index>(rb), static_cast<Eigen::Index>(i)));
        total += acc;
    }
    return total / static_cast<double>(segment.count());
}

DensityEstimate correlation_element_density(const std::vector<CorrelationMatrix>& mats,
                                            IndexRange segment, std::int64_t grid, int n_threads) {
    if (grid < 2) throw ValidationError("correlation_element_density: grid must be >= 2");
    if (segment.count() <= 0) throw ValidationError("correlation_element_density: empty segment");

    std::vector<double> pool;
    for (const auto& c : mats) {
        if (!segment.contains(c.window_end_index)) continue;
        const Eigen::Index m = c.values.rows();
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = i + 1; j < m; ++j) pool.push_back(c.values(i, j));
    }
    if (pool.size() < 2)
        throw ValidationError("correlation_element_density: fewer than 2 pooled elements");

    const double n = static_cast<double>(pool.size());
    double mean = 0.0, mean_sq = 0.0;
    for (double v : pool) {
        mean += v;
        mean_sq += v * v;
    }
    mean /= n;
    mean_sq /= n;
    const double var = mean_sq - mean * mean;
    const double sigma = var > 0.0 ? std::sqrt(var) : 0.0;

    std::vector<double> sorted = pool;
    std::sort(sorted.begin(), sorted.end());
    auto quantile7 = [&](double p) {
        const double h = p * (n - 1.0);
        const auto lo = static_cast<std::size_t>(h);
        if (lo + 1 >= sorted.size()) return sorted.back();
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
    };
    const double iqr = quantile7(0.75) - quantile7(0.25);

    double h = 0.9 * std::min(sigma, iqr / 1.34) * std::pow(n, -0.2);
    if (h < 1e-4) h = 1e-4;

    // The grid reaches 4 bandwidths past the sample extremes so the trapezoid
    // integral captures the kernel mass even for boundary-concentrated samples.
    const double lo = sorted.front() - 4.0 * h;
    const double hi = sorted.back() + 4.0 * h;

    DensityEstimate est;
    est.bandwidth = h;
    est.n_observations = static_cast<std::int64_t>(pool.size());
    est.x.resize(static_cast<std::size_t>(grid));
    est.density.resize(static_cast<std::size_t>(grid));
    const double step = (hi - lo) / static_cast<double>(grid - 1);
    const double norm = 1.0 / (n * h * std::sqrt(2.0 * 3.14159265358979323846));
    parallel_for(grid, n_threads, [&](std::int64_t g) {
        const double x = lo + step * static_cast<double>(g);
        double acc = 0.0;
        for (double v : pool) {
            const double u = (x - v) / h;
            acc += std::exp(-0.5 * u * u);
        }
        est.x[static_cast<std::size_t>(g)] = x;
        est.density[static_cast<std::size_t>(g)] = acc * norm;
    });
    return est;
}

}  // namespace marketdyn::spectra
