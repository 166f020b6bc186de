#include "marketdyn/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "marketdyn/csv.hpp"
#include "marketdyn/parallel.hpp"
#include "marketdyn/random.hpp"

namespace marketdyn::changepoint {

StatisticKind statistic_kind_from_string(const std::string& s) {
    if (s == "phase1") return StatisticKind::phase1;
    if (s == "phase2") return StatisticKind::phase2;
    throw ValidationError("unknown statistic kind: " + s);
}

std::string to_string(StatisticKind k) {
    return k == StatisticKind::phase1 ? "phase1" : "phase2";
}

void ThresholdTable::validate() const {
    if (t.size() != h.size() || t.empty()) throw ValidationError("threshold table is empty");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (h[i] <= 0.0) throw ValidationError("threshold table has a non-positive threshold");
        if (i > 0 && t[i] <= t[i - 1])
            throw ValidationError("threshold table indices not strictly increasing");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("threshold table alpha out of range");
    if (min_segment < 1) throw ValidationError("threshold table min_segment out of range");
}

double ThresholdTable::threshold_at(std::int64_t time) const {
    if (kind == StatisticKind::phase1) {
        const auto it = std::lower_bound(t.begin(), t.end(), time);
        if (it == t.end() || *it != time)
            throw ValidationError("phase1 threshold table has no entry for n=" + std::to_string(time));
        return h[static_cast<std::size_t>(it - t.begin())];
    }
    if (time < t.front())
        throw ValidationError("phase2 threshold table starts at t=" + std::to_string(t.front()) +
                              ", requested " + std::to_string(time));
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    // Beyond the calibrated range the conditional distribution has stabilized:
    // extend the last threshold as a plateau.
    return h[static_cast<std::size_t>(it - t.begin()) - 1];
}

double ks_statistic(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw ValidationError("ks_statistic: empty sample");
    std::vector<double> xs(x.begin(), x.end());
    std::vector<double> ys(y.begin(), y.end());
    for (double v : xs)
        if (!std::isfinite(v)) throw ValidationError("ks_statistic: non-finite value in sample");
    for (double v : ys)
        if (!std::isfinite(v)) throw ValidationError("ks_statistic: non-finite value in sample");
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());

    const double nx = static_cast<double>(xs.size());
    const double ny = static_cast<double>(ys.size());
    std::size_t ix = 0, iy = 0;
    double best = 0.0;
    while (ix < xs.size() || iy < ys.size()) {
        double v;
        if (ix < xs.size() && iy < ys.size()) {
            v = std::min(xs[ix], ys[iy]);
        } else if (ix < xs.size()) {
            v = xs[ix];
        } else {
            v = ys[iy];
        }
        while (ix < xs.size() && xs[ix] == v) ++ix;
        while (iy < ys.size() && ys[iy] == v) ++iy;
        const double diff =
            std::abs(static_cast<double>(ix) / nx - static_cast<double>(iy) / ny);
        if (diff > best) best = diff;
    }
    return best;
}

namespace detail {

std::optional<SplitScan> max_split_ks(std::span<const double> x, std::int64_t min_segment) {
    const std::int64_t n = static_cast<std::int64_t>(x.size());
    const std::int64_t m = std::max<std::int64_t>(min_segment, 1);
    if (n < 2 * m) return std::nullopt;

    // Rank the sample once; tied values share a group so the ECDF sweep only
    // evaluates at genuine jump points.
    std::vector<std::int32_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
        if (x[static_cast<std::size_t>(a)] != x[static_cast<std::size_t>(b)])
            return x[static_cast<std::size_t>(a)] < x[static_cast<std::size_t>(b)];
        return a < b;
    });
    std::vector<std::int32_t> group_of(static_cast<std::size_t>(n));
    std::vector<std::int64_t> cum;
    cum.reserve(static_cast<std::size_t>(n));
    for (std::int64_t pos = 0; pos < n; ++pos) {
        const auto arrival = static_cast<std::size_t>(order[static_cast<std::size_t>(pos)]);
        if (pos == 0 ||
            x[arrival] != x[static_cast<std::size_t>(order[static_cast<std::size_t>(pos - 1)])]) {
            cum.push_back(0);
        }
        group_of[arrival] = static_cast<std::int32_t>(cum.size() - 1);
        ++cum.back();
    }
    const std::int64_t n_groups = static_cast<std::int64_t>(cum.size());
    for (std::int64_t g = 1; g < n_groups; ++g) cum[static_cast<std::size_t>(g)] += cum[static_cast<std::size_t>(g - 1)];

    // For split k: KS = max_g |A_k(g)/k - (cum(g)-A_k(g))/(n-k)|
    //            = max_g |A_k(g)*n - k*cum(g)| / (k*(n-k)),
    // where A_k(g) counts prefix observations with value group <= g. Exact
    // integer comparisons keep the argmax deterministic (smallest k on ties).
    //
    // The discrepancy array d[g] = A_k(g)*n - k*cum(g) updates incrementally:
    // moving k-1 -> k subtracts cum[g] everywhere and adds n from the new
    // observation's group onward. |d| <= n^2, so everything fits in 32 bits
    // for n <= 46340 (the fallback below covers larger samples).
    std::int64_t best_num = -1, best_den = 1, best_k = 0;
    if (n <= 46340) {
        std::vector<std::int32_t> d(static_cast<std::size_t>(n_groups), 0);
        std::vector<std::int32_t> cum32(static_cast<std::size_t>(n_groups));
        std::vector<std::int32_t> n_minus_cum(static_cast<std::size_t>(n_groups));
        for (std::int64_t g = 0; g < n_groups; ++g) {
            cum32[static_cast<std::size_t>(g)] = static_cast<std::int32_t>(cum[static_cast<std::size_t>(g)]);
            n_minus_cum[static_cast<std::size_t>(g)] =
                static_cast<std::int32_t>(n - cum[static_cast<std::size_t>(g)]);
        }
        std::int32_t* d_ptr = d.data();
        const std::int32_t* cum_ptr = cum32.data();
        const std::int32_t* ncum_ptr = n_minus_cum.data();
        for (std::int64_t k = 1; k <= n - m; ++k) {
            const std::int64_t gg = group_of[static_cast<std::size_t>(k - 1)];
            std::int32_t max_num = 0;
            for (std::int64_t g = 0; g < gg; ++g) {
                const std::int32_t v = d_ptr[g] -= cum_ptr[g];
                max_num = std::max(max_num, v < 0 ? -v : v);
            }
            for (std::int64_t g = gg; g < n_groups; ++g) {
                const std::int32_t v = d_ptr[g] += ncum_ptr[g];
                max_num = std::max(max_num, v < 0 ? -v : v);
            }
            if (k < m) continue;
            const std::int64_t den = k * (n - k);
            if (best_k == 0 ||
                static_cast<__int128>(max_num) * best_den > static_cast<__int128>(best_num) * den) {
                best_num = max_num;
                best_den = den;
                best_k = k;
            }
        }
    } else {
        std::vector<std::int64_t> a(static_cast<std::size_t>(n_groups), 0);
        const std::int64_t* cum_ptr = cum.data();
        std::int64_t* a_ptr = a.data();
        for (std::int64_t k = 1; k <= n - m; ++k) {
            const std::int64_t gg = group_of[static_cast<std::size_t>(k - 1)];
            for (std::int64_t g = gg; g < n_groups; ++g) ++a_ptr[g];
            if (k < m) continue;
            std::int64_t max_num = 0;
            for (std::int64_t g = 0; g < n_groups; ++g) {
                std::int64_t v = a_ptr[g] * n - k * cum_ptr[g];
                if (v < 0) v = -v;
                if (v > max_num) max_num = v;
            }
            const std::int64_t den = k * (n - k);
            if (best_k == 0 || static_cast<__int128>(max_num) * best_den >
                                   static_cast<__int128>(best_num) * den) {
                best_num = max_num;
                best_den = den;
                best_k = k;
            }
        }
    }
    return SplitScan{static_cast<double>(best_num) / static_cast<double>(best_den), best_k};
}

}  // namespace detail

namespace {

void validate_calibration_args(double alpha, std::int64_t replications, std::int64_t n_or_tmax,
                               std::int64_t min_segment) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("calibrate_thresholds: alpha must lie in (0, 1)");
    if (replications < 1000)
        throw ValidationError("calibrate_thresholds: need at least 1000 replications");
    if (alpha * static_cast<double>(replications) < 10.0)
        throw ValidationError(
            "calibrate_thresholds: alpha*replications < 10 gives no quantile resolution");
    if (min_segment < 2) throw ValidationError("calibrate_thresholds: min_segment must be >= 2");
    if (n_or_tmax < 2 * min_segment)
        throw ValidationError("calibrate_thresholds: n_or_tmax must be >= 2*min_segment");
}

ThresholdTable calibrate_phase1(std::int64_t n, double alpha, std::int64_t replications,
                                std::uint64_t seed, std::int64_t min_segment, int n_threads) {
    std::vector<double> stats(static_cast<std::size_t>(replications));
    parallel_for(replications, n_threads, [&](std::int64_t rep) {
        Rng rng(mix_seed(seed, "cpm.phase1", static_cast<std::uint64_t>(rep)));
        std::vector<double> sample(static_cast<std::size_t>(n));
        for (auto& v : sample) v = rng.gaussian();
        stats[static_cast<std::size_t>(rep)] = detail::max_split_ks(sample, min_segment)->stat;
    });
    std::sort(stats.begin(), stats.end());
    // Smallest order statistic whose exceedance count is <= alpha*replications.
    auto idx = static_cast<std::size_t>(
        std::ceil((1.0 - alpha) * static_cast<double>(replications))) ;
    if (idx > 0) --idx;
    if (idx >= stats.size()) idx = stats.size() - 1;

    ThresholdTable table;
    table.kind = StatisticKind::phase1;
    table.alpha = alpha;
    table.replications = replications;
    table.seed = seed;
    table.min_segment = min_segment;
    table.t = {n};
    table.h = {stats[idx]};
    table.validate();
    return table;
}

/// Sequential conditional calibration. A population of null paths is walked
/// forward; at each decision time the threshold is chosen among the observed
/// statistic values so that the realized cumulative survival tracks the
/// (1-alpha)^d target (the statistic is discrete at small t, so per-step
/// exceedance cannot always equal alpha exactly; carrying the deficit forward
/// keeps the run-length distribution on target). Paths that alarm are
/// replaced by a surviving path's history with a freshly seeded future, which
/// keeps the population size constant without biasing the conditional law.
ThresholdTable calibrate_phase2(std::int64_t tmax, double alpha, std::int64_t replications,
                                std::uint64_t seed, std::int64_t min_segment, int n_threads) {
    const std::int64_t n_paths = replications;
    const std::int64_t t0 = 2 * min_segment;

    std::vector<std::vector<double>> obs(static_cast<std::size_t>(n_paths));
    std::vector<Rng> rngs;
    rngs.reserve(static_cast<std::size_t>(n_paths));
    for (std::int64_t p = 0; p < n_paths; ++p) {
        rngs.emplace_back(mix_seed(seed, "cpm.phase2.path", static_cast<std::uint64_t>(p)));
        obs[static_cast<std::size_t>(p)].reserve(static_cast<std::size_t>(tmax));
    }

    ThresholdTable table;
    table.kind = StatisticKind::phase2;
    table.alpha = alpha;
    table.replications = replications;
    table.seed = seed;
    table.min_segment = min_segment;

    std::vector<double> stats(static_cast<std::size_t>(n_paths));
    const double log_step_target = std::log1p(-alpha);
    double log_survival_target = 0.0;
    double log_survival_real = 0.0;

    for (std::int64_t t = 1; t <= tmax; ++t) {
        for (std::int64_t p = 0; p < n_paths; ++p)
            obs[static_cast<std::size_t>(p)].push_back(rngs[static_cast<std::size_t>(p)].gaussian());
        if (t < t0) continue;

        parallel_for(n_paths, n_threads, [&](std::int64_t p) {
            stats[static_cast<std::size_t>(p)] =
                detail::max_split_ks(obs[static_cast<std::size_t>(p)], min_segment)->stat;
        });

        std::vector<double> sorted = stats;
        std::sort(sorted.begin(), sorted.end());
        log_survival_target += log_step_target;

        // Scan distinct observed values from the largest down; each candidate
        // h kills the strictly-greater tail.
        double best_h = sorted.back();
        double best_score = std::abs(log_survival_real - log_survival_target);  // kill nothing
        std::size_t i = sorted.size();
        while (i > 0) {
            // sorted[i-1] is the last occurrence of its value
            const double v = sorted[i - 1];
            std::size_t first = i;
            while (first > 1 && sorted[first - 2] == v) --first;
            // candidate threshold = next lower distinct value kills everything > it
            if (first == 1) break;  // killing all paths is never admissible
            const double candidate = sorted[first - 2];
            const auto killed = static_cast<double>(sorted.size() - (first - 1));
            const double step = std::log1p(-killed / static_cast<double>(n_paths));
            const double score = std::abs(log_survival_real + step - log_survival_target);
            if (score < best_score) {
                best_score = score;
                best_h = candidate;
            }
            i = first - 1;
        }

        table.t.push_back(t);
        table.h.push_back(best_h);

        std::vector<std::int64_t> survivors;
        std::vector<std::int64_t> killed;
        survivors.reserve(static_cast<std::size_t>(n_paths));
        for (std::int64_t p = 0; p < n_paths; ++p) {
            if (stats[static_cast<std::size_t>(p)] > best_h)
                killed.push_back(p);
            else
                survivors.push_back(p);
        }
        log_survival_real +=
            std::log1p(-static_cast<double>(killed.size()) / static_cast<double>(n_paths));

        Rng pick(mix_seed(seed, "cpm.phase2.donor", static_cast<std::uint64_t>(t)));
        for (std::int64_t p : killed) {
            const std::int64_t donor = survivors[pick.below(survivors.size())];
            obs[static_cast<std::size_t>(p)] = obs[static_cast<std::size_t>(donor)];
            rngs[static_cast<std::size_t>(p)] =
                Rng(mix_seed(seed, "cpm.phase2.reseed",
                             (static_cast<std::uint64_t>(t) << 32) ^ static_cast<std::uint64_t>(p)));
        }
    }

    table.validate();
    return table;
}

}  // namespace

ThresholdTable calibrate_thresholds(StatisticKind kind, std::int64_t n_or_tmax, double alpha,
                                    std::int64_t replications, std::uint64_t seed,
                                    std::int64_t min_segment, int n_threads) {
    validate_calibration_args(alpha, replications, n_or_tmax, min_segment);
    if (kind == StatisticKind::phase1)
        return calibrate_phase1(n_or_tmax, alpha, replications, seed, min_segment, n_threads);
    return calibrate_phase2(n_or_tmax, alpha, replications, seed, min_segment, n_threads);
}

std::optional<std::int64_t> detect_batch(std::span<const double> x, const ThresholdTable& thresholds,
                                         std::int64_t min_segment) {
    thresholds.validate();
    if (thresholds.kind != StatisticKind::phase1)
        throw ValidationError("detect_batch requires a phase1 threshold table");
    if (thresholds.min_segment != min_segment)
        throw ValidationError("detect_batch: threshold table was calibrated with min_segment=" +
                              std::to_string(thresholds.min_segment));
    const auto n = static_cast<std::int64_t>(x.size());
    if (n < 2 * min_segment)
        throw ValidationError("detect_batch: sample of length " + std::to_string(n) +
                              " is shorter than 2*min_segment");
    const double h = thresholds.threshold_at(n);
    const auto scan = detail::max_split_ks(x, min_segment);
    if (scan->stat > h) return scan->split;
    return std::nullopt;
}

BreakSet detect_sequential(std::span<const double> x, const ThresholdTable& thresholds,
                           std::int64_t min_segment, std::string asset_id) {
    thresholds.validate();
    if (thresholds.kind != StatisticKind::phase2)
        throw ValidationError("detect_sequential requires a phase2 threshold table");
    if (thresholds.min_segment != min_segment)
        throw ValidationError("detect_sequential: threshold table was calibrated with min_segment=" +
                              std::to_string(thresholds.min_segment));

    BreakSet out;
    out.asset_id = std::move(asset_id);
    const auto n = static_cast<std::int64_t>(x.size());
    std::int64_t segment_start = 0;  // 0-based stream position of the segment's first observation
    std::vector<double> segment;
    segment.reserve(static_cast<std::size_t>(n));

    std::int64_t i = 0;
    while (i < n) {
        segment.push_back(x[static_cast<std::size_t>(i)]);
        const auto t_rel = static_cast<std::int64_t>(segment.size());
        if (t_rel >= 2 * min_segment) {
            const auto scan = detail::max_split_ks(segment, min_segment);
            if (scan->stat > thresholds.threshold_at(t_rel)) {
                // Change point = batch argmax inside the flagged segment.
                const std::int64_t change_pos = segment_start + scan->split - 1;  // 0-based
                out.indices.push_back(change_pos + 1);
                // Restart from the observation following the change point;
                // observations already consumed past it are replayed.
                segment_start = change_pos + 1;
                segment.clear();
                i = segment_start;
                continue;
            }
        }
        ++i;
    }
    return out;
}

void save_threshold_table(const ThresholdTable& table, const std::filesystem::path& path) {
    table.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open threshold cache for writing: " + path.string());
    out << "# marketdyn-threshold-table v1\n";
    out << "# kind=" << to_string(table.kind) << '\n';
    out << "# alpha=" << csv::format_double(table.alpha) << '\n';
    out << "# replications=" << table.replications << '\n';
    out << "# seed=" << table.seed << '\n';
    out << "# min_segment=" << table.min_segment << '\n';
    out << "t,h\n";
    for (std::size_t i = 0; i < table.t.size(); ++i)
        out << table.t[i] << ',' << csv::format_double(table.h[i]) << '\n';
}

ThresholdTable load_threshold_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open threshold cache: " + path.string());
    ThresholdTable table;
    std::string line;
    bool version_seen = false;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0 || line.rfind("#", 0) == 0) {
            const std::string body = line.substr(line.find_first_not_of("# "));
            if (body == "marketdyn-threshold-table v1") {
                version_seen = true;
                continue;
            }
            const auto eq = body.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = body.substr(0, eq);
            const std::string value = body.substr(eq + 1);
            if (key == "kind") table.kind = statistic_kind_from_string(value);
            else if (key == "alpha") table.alpha = std::stod(value);
            else if (key == "replications") table.replications = std::stoll(value);
            else if (key == "seed") table.seed = std::stoull(value);
            else if (key == "min_segment") table.min_segment = std::stoll(value);
            continue;
        }
        if (!header_seen) {
            if (line != "t,h")
                throw ValidationError("threshold cache has unexpected header: " + path.string());
            header_seen = true;
            continue;
        }
        const auto fields = csv::split_line(line);
        if (fields.size() != 2)
            throw ValidationError("threshold cache has a malformed row: " + path.string());
        double h = 0;
        if (!csv::parse_double(fields[1], h))
            throw ValidationError("threshold cache has a bad threshold value: " + path.string());
        table.t.push_back(std::stoll(fields[0]));
        table.h.push_back(h);
    }
    if (!version_seen)
        throw ValidationError("threshold cache missing version marker: " + path.string());
    table.validate();
    return table;
}

ThresholdTable load_or_calibrate(const std::filesystem::path& cache_dir, StatisticKind kind,
                                 std::int64_t n_or_tmax, double alpha, std::int64_t replications,
                                 std::uint64_t seed, std::int64_t min_segment, int n_threads) {
    validate_calibration_args(alpha, replications, n_or_tmax, min_segment);
    std::string name = "cpm_" + to_string(kind) + "_n" + std::to_string(n_or_tmax) + "_a" +
                       csv::format_double(alpha) + "_r" + std::to_string(replications) + "_s" +
                       std::to_string(seed) + "_m" + std::to_string(min_segment) + "_v1";
    std::replace(name.begin(), name.end(), '.', 'p');
    name += ".csv";

    const std::filesystem::path path = cache_dir / name;
    if (std::filesystem::exists(path)) {
        ThresholdTable table = load_threshold_table(path);
        if (table.kind == kind && table.alpha == alpha && table.replications == replications &&
            table.seed == seed && table.min_segment == min_segment) {
            return table;
        }
        throw ValidationError("threshold cache entry does not match its key: " + path.string());
    }
    ThresholdTable table =
        calibrate_thresholds(kind, n_or_tmax, alpha, replications, seed, min_segment, n_threads);
    std::filesystem::create_directories(cache_dir);
    const std::filesystem::path tmp = path.string() + ".tmp";
    save_threshold_table(table, tmp);
    std::filesystem::rename(tmp, path);
    return table;
}

}  // namespace marketdyn::changepoint
