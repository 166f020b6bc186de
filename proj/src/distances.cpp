#include "marketdyn/distances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace marketdyn::distances {

std::string to_string(MatrixKind k) {
    switch (k) {
        case MatrixKind::trajectory: return "trajectory";
        case MatrixKind::breaks: return "breaks";
        case MatrixKind::extremes: return "extremes";
        case MatrixKind::total_returns: return "returns";
    }
    throw ValidationError("unknown matrix kind");
}

MatrixKind matrix_kind_from_string(const std::string& s) {
    if (s == "trajectory") return MatrixKind::trajectory;
    if (s == "breaks") return MatrixKind::breaks;
    if (s == "extremes") return MatrixKind::extremes;
    if (s == "returns") return MatrixKind::total_returns;
    throw ValidationError("unknown matrix kind: " + s);
}

void DistanceMatrix::validate() const {
    const Eigen::Index n = values.rows();
    if (values.cols() != n || static_cast<Eigen::Index>(ids.size()) != n)
        throw ValidationError("distance matrix shape mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (values(i, i) != 0.0) throw ValidationError("distance matrix diagonal must be zero");
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = values(i, j);
            if (!std::isfinite(v) || v < 0.0)
                throw ValidationError("distance matrix entry negative or non-finite");
            if (std::abs(v - values(j, i)) > 1e-12)
                throw ValidationError("distance matrix not symmetric");
        }
    }
}

DistanceMatrix trajectory_matrix(const ingest::PricePanel& panel) {
    panel.validate();
    const Eigen::Index m = panel.prices.cols();
    // Columns are positive, so the L1 norm is just the column sum.
    Eigen::MatrixXd normalized = panel.prices;
    for (Eigen::Index j = 0; j < m; ++j) normalized.col(j) /= normalized.col(j).sum();

    DistanceMatrix d;
    d.kind = MatrixKind::trajectory;
    d.ids = panel.asset_ids;
    d.values.setZero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double v = (normalized.col(i) - normalized.col(j)).cwiseAbs().sum();
            d.values(i, j) = v;
            d.values(j, i) = v;
        }
    }
    return d;
}

namespace {

double mean_min_distance(const std::vector<std::int64_t>& from, const std::vector<std::int64_t>& to) {
    // Both sets sorted ascending: sweep with a single pointer.
    double total = 0.0;
    std::size_t j = 0;
    for (const std::int64_t b : from) {
        while (j + 1 < to.size() && std::llabs(to[j + 1] - b) <= std::llabs(to[j] - b)) ++j;
        total += static_cast<double>(std::llabs(to[j] - b));
    }
    return total / static_cast<double>(from.size());
}

}  // namespace

double mj_semimetric(const changepoint::BreakSet& a, const changepoint::BreakSet& b) {
    if (a.indices.empty() || b.indices.empty())
        throw ValidationError("mj_semimetric is undefined for empty break sets");
    std::vector<std::int64_t> sa = a.indices;
    std::vector<std::int64_t> sb = b.indices;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    return 0.5 * (mean_min_distance(sb, sa) + mean_min_distance(sa, sb));
}

DistanceMatrix breaks_matrix(const std::vector<changepoint::BreakSet>& sets,
                             std::vector<std::string>* warnings) {
    const auto n = static_cast<Eigen::Index>(sets.size());
    if (n < 2) throw ValidationError("breaks_matrix needs at least 2 break sets");
    if (std::all_of(sets.begin(), sets.end(),
                    [](const changepoint::BreakSet& s) { return s.indices.empty(); }))
        throw ValidationError("breaks_matrix: all break sets are empty");

    DistanceMatrix d;
    d.kind = MatrixKind::breaks;
    d.ids.reserve(static_cast<std::size_t>(n));
    for (const auto& s : sets) d.ids.push_back(s.asset_id);
    d.values.setZero(n, n);

    double max_defined = 0.0;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> undefined;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const auto& a = sets[static_cast<std::size_t>(i)];
            const auto& b = sets[static_cast<std::size_t>(j)];
            if (a.indices.empty() || b.indices.empty()) {
                undefined.emplace_back(i, j);
                continue;
            }
            const double v = mj_semimetric(a, b);
            d.values(i, j) = v;
            d.values(j, i) = v;
            max_defined = std::max(max_defined, v);
        }
    }
    for (const auto& [i, j] : undefined) {
        d.values(i, j) = max_defined;
        d.values(j, i) = max_defined;
        if (warnings)
            warnings->push_back("breaks_matrix: pair (" + d.ids[static_cast<std::size_t>(i)] + ", " +
                                d.ids[static_cast<std::size_t>(j)] +
                                ") involves an empty break set; assigned the maximum observed "
                                "distance " +
                                std::to_string(max_defined));
    }
    return d;
}

namespace {

double quantile_type7(const std::vector<double>& sorted, double p) {
    const double h = p * (static_cast<double>(sorted.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

TailMeasure tail_measure(std::span<const double> sample, std::string asset_id,
                         double tail_fraction) {
    const auto n = static_cast<std::int64_t>(sample.size());
    if (n < 10) throw ValidationError("tail_measure: need at least 10 observations for asset " +
                                      asset_id);
    if (!(tail_fraction > 0.0 && tail_fraction < 0.5))
        throw ValidationError("tail_measure: tail_fraction must lie in (0, 0.5)");

    std::vector<double> sorted(sample.begin(), sample.end());
    for (double v : sorted)
        if (!std::isfinite(v))
            throw ValidationError("tail_measure: non-finite return for asset " + asset_id);
    std::sort(sorted.begin(), sorted.end());

    // ceil with an epsilon guard against 0.1*n landing just above an integer.
    const auto tail_count = static_cast<std::int64_t>(
        std::ceil(tail_fraction * static_cast<double>(n) - 1e-9));
    const auto c = static_cast<std::size_t>(std::max<std::int64_t>(tail_count, 1));

    TailMeasure t;
    t.asset_id = std::move(asset_id);
    t.tail_fraction = tail_fraction;
    t.lower_tail.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(c));
    t.upper_tail.assign(sorted.end() - static_cast<std::ptrdiff_t>(c), sorted.end());
    t.lower_cut = quantile_type7(sorted, tail_fraction);
    t.upper_cut = quantile_type7(sorted, 1.0 - tail_fraction);
    return t;
}

namespace {

/// W1 between two empirical probability measures given as sorted samples:
/// the integral of |F_a - F_b| over the merged support.
double wasserstein_sorted(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() == b.size()) {
        double total = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
        return total / static_cast<double>(a.size());
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double dist = 0.0;
    double prev = std::min(a.front(), b.front());
    while (ia < a.size() || ib < b.size()) {
        double v;
        if (ia < a.size() && ib < b.size()) v = std::min(a[ia], b[ib]);
        else if (ia < a.size()) v = a[ia];
        else v = b[ib];
        dist += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (v - prev);
        prev = v;
        while (ia < a.size() && a[ia] == v) ++ia;
        while (ib < b.size() && b[ib] == v) ++ib;
    }
    return dist;
}

std::vector<double> pooled_tails(const TailMeasure& t) {
    std::vector<double> out;
    out.reserve(t.lower_tail.size() + t.upper_tail.size());
    out.insert(out.end(), t.lower_tail.begin(), t.lower_tail.end());
    out.insert(out.end(), t.upper_tail.begin(), t.upper_tail.end());
    return out;  // lower <= cut <= upper keeps this ascending
}

}  // namespace

double wasserstein_tails(const TailMeasure& a, const TailMeasure& b, bool renormalize) {
    if (a.lower_tail.empty() || a.upper_tail.empty() || b.lower_tail.empty() ||
        b.upper_tail.empty())
        throw ValidationError("wasserstein_tails: empty tail measure");
    if (a.tail_fraction != b.tail_fraction)
        throw ValidationError("wasserstein_tails: tail fractions differ");
    const double base = wasserstein_sorted(pooled_tails(a), pooled_tails(b));
    if (renormalize) return base;
    // Keeping the raw tail mass (0.2 at the default fraction) scales the CDF
    // difference, and hence the integral, by that common mass.
    return base * (2.0 * a.tail_fraction);
}

DistanceMatrix extremes_matrix(const std::vector<TailMeasure>& measures, bool renormalize) {
    const auto n = static_cast<Eigen::Index>(measures.size());
    if (n < 2) throw ValidationError("extremes_matrix needs at least 2 tail measures");
    DistanceMatrix d;
    d.kind = MatrixKind::extremes;
    d.ids.reserve(static_cast<std::size_t>(n));
    for (const auto& m : measures) d.ids.push_back(m.asset_id);
    d.values.setZero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = wasserstein_tails(measures[static_cast<std::size_t>(i)],
                                               measures[static_cast<std::size_t>(j)], renormalize);
            d.values(i, j) = v;
            d.values(j, i) = v;
        }
    }
    return d;
}

DistanceMatrix returns_matrix(std::span<const double> total_returns,
                              const std::vector<std::string>& ids) {
    const auto n = static_cast<Eigen::Index>(total_returns.size());
    if (n < 2) throw ValidationError("returns_matrix needs at least 2 assets");
    if (ids.size() != total_returns.size())
        throw ValidationError("returns_matrix: id count mismatch");
    DistanceMatrix d;
    d.kind = MatrixKind::total_returns;
    d.ids = ids;
    d.values.setZero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = std::abs(total_returns[static_cast<std::size_t>(i)] -
                                      total_returns[static_cast<std::size_t>(j)]);
            d.values(i, j) = v;
            d.values(j, i) = v;
        }
    return d;
}

AffinityMatrix to_affinity(const DistanceMatrix& d) {
    d.validate();
    const double max = d.values.maxCoeff();
    if (!(max > 0.0)) throw ValidationError("to_affinity: all-zero distance matrix");
    AffinityMatrix a;
    a.ids = d.ids;
    a.values = (1.0 - (d.values.array() / max)).matrix();
    for (Eigen::Index i = 0; i < a.values.rows(); ++i) a.values(i, i) = 1.0;
    return a;
}

double normalized_norm(const DistanceMatrix& d) {
    d.validate();
    return d.values.norm() / static_cast<double>(d.values.rows());
}

}  // namespace marketdyn::distances
