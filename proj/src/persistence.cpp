#include "marketdyn/persistence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "marketdyn/parallel.hpp"

namespace marketdyn::persistence {
namespace {

/// Strict inversions in y (y_i > y_j for i < j) via bottom-up merge sort.
std::int64_t count_inversions(std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> buf(n);
    std::int64_t inversions = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
            const std::size_t mid = lo + width;
            const std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (y[j] < y[i]) {
                    inversions += static_cast<std::int64_t>(mid - i);
                    buf[k++] = y[j++];
                } else {
                    buf[k++] = y[i++];
                }
            }
            while (i < mid) buf[k++] = y[i++];
            while (j < hi) buf[k++] = y[j++];
            std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
                      buf.begin() + static_cast<std::ptrdiff_t>(hi),
                      y.begin() + static_cast<std::ptrdiff_t>(lo));
        }
    }
    return inversions;
}

std::int64_t tied_pairs(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::int64_t total = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= v.size(); ++i) {
        if (i < v.size() && v[i] == v[i - 1]) {
            ++run;
        } else {
            total += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
            run = 1;
        }
    }
    return total;
}

}  // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (y.size() != n) throw ValidationError("kendall_tau: length mismatch");
    if (n < 2) throw ValidationError("kendall_tau: need at least 2 observations");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw ValidationError("kendall_tau: non-finite value");

    // Sort jointly by (x, y); discordant pairs among x-distinct pairs are
    // then exactly the strict inversions of the y sequence.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        if (y[a] != y[b]) return y[a] < y[b];
        return a < b;
    });

    const std::int64_t n64 = static_cast<std::int64_t>(n);
    const std::int64_t n0 = n64 * (n64 - 1) / 2;

    std::int64_t n1 = 0;  // pairs tied in x
    std::int64_t n3 = 0;  // pairs tied in both
    {
        std::size_t run_x = 1;
        std::size_t run_xy = 1;
        for (std::size_t i = 1; i <= n; ++i) {
            const bool same_x = i < n && x[order[i]] == x[order[i - 1]];
            const bool same_xy = same_x && y[order[i]] == y[order[i - 1]];
            if (same_xy) {
                ++run_xy;
            } else {
                n3 += static_cast<std::int64_t>(run_xy) * static_cast<std::int64_t>(run_xy - 1) / 2;
                run_xy = 1;
            }
            if (same_x) {
                ++run_x;
            } else {
                n1 += static_cast<std::int64_t>(run_x) * static_cast<std::int64_t>(run_x - 1) / 2;
                run_x = 1;
            }
        }
    }
    const std::int64_t n2 = tied_pairs(std::vector<double>(y.begin(), y.end()));

    if (n1 == n0) throw ValidationError("kendall_tau: x vector is entirely tied");
    if (n2 == n0) throw ValidationError("kendall_tau: y vector is entirely tied");

    std::vector<double> y_sorted(n);
    for (std::size_t i = 0; i < n; ++i) y_sorted[i] = y[order[i]];
    const std::int64_t discordant = count_inversions(y_sorted);

    // concordant - discordant over pairs distinct in both coordinates
    const std::int64_t num = n0 - n1 - n2 + n3 - 2 * discordant;
    const double den = std::sqrt(static_cast<double>(n0 - n1)) *
                       std::sqrt(static_cast<double>(n0 - n2));
    return std::clamp(static_cast<double>(num) / den, -1.0, 1.0);
}

PersistenceMatrix persistence_matrix(const returns::RiskAdjustedSeries& ra, int n_threads) {
    const Eigen::Index w = ra.values.rows();
    const Eigen::Index m = ra.values.cols();
    if (w < 2) throw ValidationError("persistence_matrix: need at least 2 time points");
    if (m < 2) throw ValidationError("persistence_matrix: need at least 2 assets");

    for (Eigen::Index t = 0; t < w; ++t) {
        bool all_tied = true;
        for (Eigen::Index j = 1; j < m; ++j)
            if (ra.values(t, j) != ra.values(t, 0)) {
                all_tied = false;
                break;
            }
        if (all_tied)
            throw ComputationError("persistence_matrix: cross-section entirely tied on " +
                                   ra.dates[static_cast<std::size_t>(t)].to_string());
    }

    PersistenceMatrix k;
    k.time_indices = ra.time_indices;
    k.dates = ra.dates;
    k.values.resize(w, w);
    for (Eigen::Index i = 0; i < w; ++i) k.values(i, i) = 1.0;

    // Upper triangle as a flat worklist; entries are independent.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    pairs.reserve(static_cast<std::size_t>(w) * static_cast<std::size_t>(w - 1) / 2);
    for (Eigen::Index s = 0; s < w; ++s)
        for (Eigen::Index t = s + 1; t < w; ++t) pairs.emplace_back(s, t);
    parallel_for(static_cast<std::int64_t>(pairs.size()), n_threads, [&](std::int64_t p) {
        const auto [s, t] = pairs[static_cast<std::size_t>(p)];
        std::vector<double> xs(static_cast<std::size_t>(m)), ys(static_cast<std::size_t>(m));
        for (Eigen::Index j = 0; j < m; ++j) {
            xs[static_cast<std::size_t>(j)] = ra.values(s, j);
            ys[static_cast<std::size_t>(j)] = ra.values(t, j);
        }
        const double tau = kendall_tau(xs, ys);
        k.values(s, t) = tau;
        k.values(t, s) = tau;
    });
    return k;
}

double persistence_norm(const PersistenceMatrix& k) {
    return k.values.norm();
}

}  // namespace marketdyn::persistence
