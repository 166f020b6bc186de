// Acceptance suite: every criterion below runs at its stated tolerance and
// prints one [PASS]/[FAIL] line. The binary exits nonzero if any criterion
// fails. Individual criteria can be selected by number on the command line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "marketdyn/changepoint.hpp"
#include "marketdyn/cluster.hpp"
#include "marketdyn/csv.hpp"
#include "marketdyn/parallel.hpp"
#include "marketdyn/pipeline.hpp"
#include "marketdyn/random.hpp"
#include "marketdyn/spectra.hpp"
#include "oracles.hpp"

using namespace marketdyn;
namespace fs = std::filesystem;

namespace {

struct Check {
    std::vector<std::string> failures;
    long long checks = 0;

    void require(bool ok, const std::string& message) {
        ++checks;
        if (!ok && failures.size() < 12) failures.push_back(message);
        if (!ok && failures.size() == 12) failures.push_back("(more failures suppressed)");
    }
};

returns::ReturnsPanel random_returns(std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
    returns::ReturnsPanel r;
    Rng rng(seed);
    r.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < r.values.rows(); ++i)
        for (Eigen::Index j = 0; j < r.values.cols(); ++j) r.values(i, j) = rng.gaussian();
    const Date d0 = Date::from_ymd(2019, 1, 2);
    for (std::int64_t i = 0; i < rows; ++i) r.dates.push_back(d0 + static_cast<std::int32_t>(i));
    for (std::int64_t j = 0; j < cols; ++j) r.asset_ids.push_back("A" + std::to_string(j));
    return r;
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "marketdyn_acceptance";
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// 1. Spectral invariants on random and one-factor panels.
void criterion_spectral_invariants(Check& check) {
    Rng meta(1001);
    auto verify_panel = [&](const returns::ReturnsPanel& r, std::int64_t t1) {
        const auto mats = spectra::rolling_correlation(r, t1, 2);
        const auto m = static_cast<double>(r.values.cols());
        for (const auto& c : mats) {
            check.require((c.values - c.values.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
                          "correlation matrix not symmetric to 1e-12");
            check.require(c.values.diagonal().isConstant(1.0),
                          "correlation diagonal not exactly 1");
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c.values);
            check.require(solver.eigenvalues().minCoeff() >= -1e-10,
                          "correlation matrix below the PSD tolerance");
            const auto d = spectra::eigendecompose(c);
            check.require(std::abs(d.eigenvalues.sum() - m) <= 1e-8,
                          "eigenvalue trace not conserved");
        }
    };

    for (int p = 0; p < 100; ++p) {
        const std::int64_t cols = 3 + static_cast<std::int64_t>(meta.below(8));
        const std::int64_t rows = 65 + static_cast<std::int64_t>(meta.below(40));
        verify_panel(random_returns(rows, cols, 2000 + static_cast<std::uint64_t>(p)), 60);
    }
    for (int p = 0; p < 10; ++p) {
        const double beta = 0.1 + 0.08 * static_cast<double>(p);
        const auto panel =
            ingest::synth_one_factor(8, 140, beta, 0.02, 3000 + static_cast<std::uint64_t>(p), "f");
        verify_panel(returns::log_returns(panel), 60);
    }
}

// ---------------------------------------------------------------------------
// 2. Dynamics deviation equals a per-window brute-force recomputation.
void criterion_dd_oracle(Check& check) {
    auto make_surface = [](std::uint64_t seed, std::int64_t windows, std::int64_t m) {
        spectra::EigenspectrumSurface s;
        Rng rng(seed);
        s.ratios.resize(static_cast<Eigen::Index>(windows), static_cast<Eigen::Index>(m));
        for (std::int64_t w = 0; w < windows; ++w) {
            std::vector<double> vals(static_cast<std::size_t>(m));
            double total = 0;
            for (auto& v : vals) {
                v = -std::log(rng.uniform01() + 1e-12);
                total += v;
            }
            std::sort(vals.begin(), vals.end(), std::greater<>());
            for (std::int64_t i = 0; i < m; ++i)
                s.ratios(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(i)) =
                    vals[static_cast<std::size_t>(i)] / total;
            s.window_end_indices.push_back(60 + w);
        }
        return s;
    };

    Rng meta(1002);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t m = 10 + static_cast<std::int64_t>(meta.below(6));
        const std::int64_t windows = 20 + static_cast<std::int64_t>(meta.below(30));
        const auto a = make_surface(4000 + 2 * static_cast<std::uint64_t>(trial), windows, m);
        const auto b = make_surface(4001 + 2 * static_cast<std::uint64_t>(trial), windows, m);
        const std::int64_t lo = 60 + static_cast<std::int64_t>(meta.below(5));
        const std::int64_t hi = 60 + windows - 1 - static_cast<std::int64_t>(meta.below(5));
        const IndexRange seg{lo, hi};

        const double dd = spectra::dynamics_deviation(a, b, seg, 10);
        const double oracle = oracles::dd_bruteforce(a.ratios, a.window_end_indices, b.ratios,
                                                     b.window_end_indices, lo, hi, 10);
        check.require(std::abs(dd - oracle) <= 1e-12, "DD differs from brute force > 1e-12");
        check.require(spectra::dynamics_deviation(a, a, seg, 10) == 0.0, "DD(a,a) != 0");
        check.require(dd == spectra::dynamics_deviation(b, a, seg, 10), "DD not symmetric");
        check.require(dd >= 0.0, "DD negative");
    }
}

// ---------------------------------------------------------------------------
// 3. One-factor recovery of the analytic equicorrelated spectrum.
void criterion_one_factor_recovery(Check& check) {
    auto first_ratio_full_sample = [](double beta, std::uint64_t seed) {
        const auto panel = ingest::synth_one_factor(20, 2000, beta, 0.02, seed, "f");
        const auto r = returns::log_returns(panel);
        const auto mats = spectra::rolling_correlation(r, r.n_rows(), 2);
        const auto d = spectra::eigendecompose(mats.front());
        return d.eigenvalues(0) / 20.0;
    };
    const double got_08 = first_ratio_full_sample(0.8, 77001);
    const double analytic = 0.8 * 0.8 * 19.0 / 20.0 + 1.0 / 20.0;  // 0.658
    check.require(std::abs(got_08 - analytic) <= 0.03,
                  "beta=0.8 first ratio " + std::to_string(got_08) + " not within 0.03 of " +
                      std::to_string(analytic));
    const double got_0 = first_ratio_full_sample(0.0, 77002);
    check.require(std::abs(got_0 - 0.05) <= 0.05,
                  "beta=0 first ratio " + std::to_string(got_0) + " not within 0.05 of 1/M");
}

// ---------------------------------------------------------------------------
// 4. Change point power, size, and average run length.
void criterion_changepoint(Check& check) {
    const fs::path cache = work_dir() / "threshold_cache";
    const std::int64_t m = 30;
    const double alpha = 0.05;

    // Batch: power and localization on a 2-sigma mean shift at 250 of 500.
    const auto batch_table = changepoint::load_or_calibrate(
        cache, changepoint::StatisticKind::phase1, 500, alpha, 10000, 90001, m, 2);
    int located = 0;
    for (int run = 0; run < 100; ++run) {
        Rng rng(mix_seed(90002, "power", static_cast<std::uint64_t>(run)));
        std::vector<double> x(500);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = rng.gaussian() + (i >= 250 ? 2.0 : 0.0);
        const auto hit = changepoint::detect_batch(x, batch_table, m);
        if (hit && std::llabs(*hit - 250) <= 10) ++located;
    }
    check.require(located >= 95, "mean shift located within +/-10 in only " +
                                     std::to_string(located) + "/100 runs");

    // Batch: null false positive rate over 200 runs.
    int false_alarms = 0;
    for (int run = 0; run < 200; ++run) {
        Rng rng(mix_seed(90003, "null", static_cast<std::uint64_t>(run)));
        std::vector<double> x(500);
        for (auto& v : x) v = rng.gaussian();
        if (changepoint::detect_batch(x, batch_table, m).has_value()) ++false_alarms;
    }
    check.require(false_alarms <= 20, "null false positive rate " +
                                          std::to_string(false_alarms) + "/200 exceeds 0.10");

    // Sequential: mean run length within 15% of 1/alpha over 1000 null runs.
    const auto seq_table = changepoint::load_or_calibrate(
        cache, changepoint::StatisticKind::phase2, 300, alpha, 2000, 90004, m, 2);
    const std::int64_t max_decisions = 400;
    std::vector<double> run_lengths(1000);
    parallel_for(1000, 2, [&](std::int64_t run) {
        Rng rng(mix_seed(90005, "arl", static_cast<std::uint64_t>(run)));
        std::vector<double> stream;
        stream.reserve(static_cast<std::size_t>(2 * m + max_decisions));
        std::int64_t decisions = 0;
        while (decisions < max_decisions) {
            stream.push_back(rng.gaussian());
            const auto t = static_cast<std::int64_t>(stream.size());
            if (t < 2 * m) continue;
            ++decisions;
            const auto scan = changepoint::detail::max_split_ks(stream, m);
            if (scan->stat > seq_table.threshold_at(t)) break;
        }
        run_lengths[static_cast<std::size_t>(run)] = static_cast<double>(decisions);
    });
    double mean_rl = 0;
    for (double rl : run_lengths) mean_rl += rl;
    mean_rl /= static_cast<double>(run_lengths.size());
    const double target = 1.0 / alpha;
    check.require(std::abs(mean_rl - target) <= 0.15 * target,
                  "null mean run length " + std::to_string(mean_rl) + " not within 15% of " +
                      std::to_string(target));
}

// ---------------------------------------------------------------------------
// 5. Exhaustive brute-force oracles for the three pairwise measures.
void criterion_metric_oracles(Check& check) {
    Rng rng(1005);

    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::int64_t> a(1 + rng.below(20)), b(1 + rng.below(20));
        for (auto& v : a) v = static_cast<std::int64_t>(rng.below(400));
        for (auto& v : b) v = static_cast<std::int64_t>(rng.below(400));
        changepoint::BreakSet sa{"a", a}, sb{"b", b};
        const double got = distances::mj_semimetric(sa, sb);
        check.require(std::abs(got - oracles::mj_bruteforce(a, b)) <= 1e-10,
                      "mj_semimetric differs from the double-loop oracle");
    }

    int kendall_done = 0;
    while (kendall_done < 1000) {
        const std::size_t n = 2 + rng.below(30);
        std::vector<double> x(n), y(n);
        const bool ties = kendall_done % 2 == 0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = ties ? static_cast<double>(rng.below(5)) : rng.gaussian();
            y[i] = ties ? static_cast<double>(rng.below(5)) : rng.gaussian();
        }
        bool x_ok = false, y_ok = false;
        for (std::size_t i = 1; i < n; ++i) {
            x_ok = x_ok || x[i] != x[0];
            y_ok = y_ok || y[i] != y[0];
        }
        if (!x_ok || !y_ok) continue;
        const double fast = persistence::kendall_tau(x, y);
        const double slow = oracles::kendall_bruteforce(x, y);
        check.require(std::abs(fast - slow) <= 1e-10,
                      "kendall_tau differs from the pair-counting oracle");
        ++kendall_done;
    }

    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t na = 2 + rng.below(9), nb = 2 + rng.below(9);
        std::vector<double> xa(2 * na), xb(2 * nb);
        for (auto& v : xa) v = rng.gaussian();
        for (auto& v : xb) v = rng.gaussian();
        std::sort(xa.begin(), xa.end());
        std::sort(xb.begin(), xb.end());
        distances::TailMeasure ta, tb;
        ta.asset_id = "a";
        ta.lower_tail.assign(xa.begin(), xa.begin() + static_cast<std::ptrdiff_t>(na));
        ta.upper_tail.assign(xa.begin() + static_cast<std::ptrdiff_t>(na), xa.end());
        ta.lower_cut = ta.lower_tail.back();
        ta.upper_cut = ta.upper_tail.front();
        tb.asset_id = "b";
        tb.lower_tail.assign(xb.begin(), xb.begin() + static_cast<std::ptrdiff_t>(nb));
        tb.upper_tail.assign(xb.begin() + static_cast<std::ptrdiff_t>(nb), xb.end());
        tb.lower_cut = tb.lower_tail.back();
        tb.upper_cut = tb.upper_tail.front();
        std::vector<double> pa = xa, pb = xb;
        const double got = distances::wasserstein_tails(ta, tb);
        const double oracle = oracles::wasserstein_bruteforce(pa, pb);
        check.require(std::abs(got - oracle) <= 1e-10,
                      "wasserstein_tails differs from the CDF-integration oracle");
    }
}

// ---------------------------------------------------------------------------
// 6. Agglomeration against the naive re-scan oracle and the MST oracle.
void criterion_clustering_oracle(Check& check) {
    Rng rng(1006);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(7));
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double v = rng.uniform01() + 0.01;
                d(i, j) = v;
                d(j, i) = v;
            }
        std::vector<std::string> ids;
        for (Eigen::Index i = 0; i < n; ++i) ids.push_back("L" + std::to_string(i));

        for (auto [linkage, naive] :
             {std::pair{cluster::Linkage::average, oracles::NaiveLinkage::average},
              std::pair{cluster::Linkage::single, oracles::NaiveLinkage::single},
              std::pair{cluster::Linkage::complete, oracles::NaiveLinkage::complete}}) {
            const auto den = cluster::agglomerate(d, ids, linkage);
            const auto oracle = oracles::naive_agglomerate(d, naive);
            bool same = den.merges.size() == oracle.size();
            for (std::size_t s = 0; same && s < oracle.size(); ++s)
                same = den.merges[s].left == oracle[s].left &&
                       den.merges[s].right == oracle[s].right &&
                       den.merges[s].height == oracle[s].height &&
                       den.merges[s].size == oracle[s].size;
            check.require(same, "agglomerate differs from the naive re-scan oracle");
        }

        const auto single = cluster::agglomerate(d, ids, cluster::Linkage::single);
        std::vector<double> heights;
        for (const auto& mg : single.merges) heights.push_back(mg.height);
        std::sort(heights.begin(), heights.end());
        const auto mst = oracles::mst_weights(d);
        bool mst_same = heights.size() == mst.size();
        for (std::size_t i = 0; mst_same && i < mst.size(); ++i) mst_same = heights[i] == mst[i];
        check.require(mst_same, "single-linkage heights differ from MST edge weights");
    }
}

// ---------------------------------------------------------------------------
// 7. Affinity contracts and the tail-mass alternative.
void criterion_affinity_contracts(Check& check) {
    Rng rng(1007);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n_assets = 4 + rng.below(6);
        std::vector<distances::TailMeasure> tails;
        for (std::size_t a = 0; a < n_assets; ++a) {
            std::vector<double> sample(60);
            for (auto& v : sample) v = rng.gaussian() * (1.0 + 0.2 * static_cast<double>(a));
            tails.push_back(distances::tail_measure(sample, "A" + std::to_string(a), 0.1));
        }
        const auto d1 = distances::extremes_matrix(tails, true);
        const auto d02 = distances::extremes_matrix(tails, false);

        check.require((d02.values - 0.2 * d1.values).cwiseAbs().maxCoeff() <= 1e-15,
                      "0.2-mass Wasserstein is not exactly 0.2x the renormalized one");

        const auto a1 = distances::to_affinity(d1);
        const auto a02 = distances::to_affinity(d02);
        check.require((a1.values - a02.values).cwiseAbs().maxCoeff() <= 1e-12,
                      "affinities differ between the two tail-mass conventions");

        distances::DistanceMatrix d3 = d1;
        d3.values *= 3.0;
        const auto a3 = distances::to_affinity(d3);
        check.require((a1.values - a3.values).cwiseAbs().maxCoeff() <= 1e-12,
                      "affinity not scale-invariant");

        bool in_range = true;
        for (Eigen::Index i = 0; i < a1.values.rows(); ++i) {
            if (a1.values(i, i) != 1.0) in_range = false;
            for (Eigen::Index j = 0; j < a1.values.cols(); ++j)
                if (a1.values(i, j) < 0.0 || a1.values(i, j) > 1.0) in_range = false;
        }
        check.require(in_range, "affinity entries leave [0, 1] or the diagonal is not 1");
    }
}

// ---------------------------------------------------------------------------
// 8. End-to-end determinism across reruns and worker counts.
void criterion_pipeline_determinism(Check& check) {
    const fs::path base = work_dir() / "pipeline";
    fs::remove_all(base);

    auto make_config = [&](const fs::path& out, int threads) {
        pipeline::RunConfig config;
        pipeline::CollectionConfig a, b;
        a.label = "alpha";
        a.synth = pipeline::CollectionConfig::Synth{6, 150, 0.8, 0.02};
        b.label = "beta";
        b.synth = pipeline::CollectionConfig::Synth{5, 150, 0.3, 0.02};
        config.collections = {a, b};
        config.t1 = 60;
        config.changepoint.replications = 1000;
        config.changepoint.tmax = 70;
        config.kde_grid = 128;
        config.seed = 616161;
        config.output_dir = out;
        config.cache_dir = base / "cache";
        config.threads = threads;
        return config;
    };

    const auto m1 = pipeline::run_pipeline(make_config(base / "run1", 1));
    const auto m2 = pipeline::run_pipeline(make_config(base / "run2", 2));
    const auto m3 = pipeline::run_pipeline(make_config(base / "run3", 1));

    auto hash_map = [](const nlohmann::json& manifest) {
        std::map<std::string, std::string> out;
        for (const auto& item : manifest.at("artifacts"))
            out[item.at("path").get<std::string>()] = item.at("sha256").get<std::string>();
        return out;
    };
    const auto h1 = hash_map(m1), h2 = hash_map(m2), h3 = hash_map(m3);
    check.require(!h1.empty(), "pipeline produced no artifacts");
    check.require(h1 == h2, "artifact hashes differ across worker counts");
    check.require(h1 == h3, "artifact hashes differ across reruns");
    check.require(m1.at("classes").size() == 14, "pipeline did not emit all 14 artifact classes");

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    check.require(slurp(base / "run1" / "manifest.json") == slurp(base / "run2" / "manifest.json"),
                  "manifest bytes differ across worker counts");
}

// ---------------------------------------------------------------------------
// 9. Permutation equivariance across the whole chain.
void criterion_permutation_equivariance(Check& check) {
    const auto panel = ingest::synth_one_factor(7, 150, 0.6, 0.02, 1009, "perm");
    const std::vector<Eigen::Index> perm{4, 6, 0, 2, 5, 1, 3};

    ingest::PricePanel shuffled = panel;
    for (Eigen::Index j = 0; j < panel.n_assets(); ++j) {
        shuffled.prices.col(j) = panel.prices.col(perm[static_cast<std::size_t>(j)]);
        shuffled.asset_ids[static_cast<std::size_t>(j)] =
            panel.asset_ids[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
    }

    // trajectory matrices permute consistently; their norms agree
    const auto t1m = distances::trajectory_matrix(panel);
    const auto t2m = distances::trajectory_matrix(shuffled);
    double max_diff = 0;
    for (Eigen::Index i = 0; i < 7; ++i)
        for (Eigen::Index j = 0; j < 7; ++j)
            max_diff = std::max(max_diff,
                                std::abs(t2m.values(i, j) -
                                         t1m.values(perm[static_cast<std::size_t>(i)],
                                                    perm[static_cast<std::size_t>(j)])));
    check.require(max_diff <= 1e-10, "trajectory matrix does not permute consistently");
    check.require(std::abs(distances::normalized_norm(t1m) - distances::normalized_norm(t2m)) <=
                      1e-10,
                  "trajectory norm changed under permutation");

    // eigenvalue sequences and the surface are unchanged
    const auto r1 = returns::log_returns(panel);
    const auto r2 = returns::log_returns(shuffled);
    const auto s1 = spectra::explained_variance_surface(r1, 60);
    const auto s2 = spectra::explained_variance_surface(r2, 60);
    check.require((s1.ratios - s2.ratios).cwiseAbs().maxCoeff() <= 1e-10,
                  "eigenvalue ratios changed under permutation");

    // DD against a fixed second collection is unchanged
    const auto other = ingest::synth_one_factor(6, 150, 0.3, 0.02, 1010, "other");
    const auto so = spectra::explained_variance_surface(returns::log_returns(other), 60);
    const IndexRange seg{60, 149};
    const double dd1 = spectra::dynamics_deviation(s1, so, seg, 6);
    const double dd2 = spectra::dynamics_deviation(s2, so, seg, 6);
    check.require(std::abs(dd1 - dd2) <= 1e-10, "DD changed under permutation");

    // returns-matrix norms and dendrogram height multisets are unchanged
    const Eigen::VectorXd z1 = returns::total_returns(r1);
    const Eigen::VectorXd z2 = returns::total_returns(r2);
    const auto rm1 = distances::returns_matrix(
        std::span<const double>(z1.data(), static_cast<std::size_t>(z1.size())), r1.asset_ids);
    const auto rm2 = distances::returns_matrix(
        std::span<const double>(z2.data(), static_cast<std::size_t>(z2.size())), r2.asset_ids);
    check.require(std::abs(distances::normalized_norm(rm1) - distances::normalized_norm(rm2)) <=
                      1e-10,
                  "returns-matrix norm changed under permutation");

    for (auto linkage :
         {cluster::Linkage::average, cluster::Linkage::single, cluster::Linkage::complete}) {
        const auto d1 = cluster::agglomerate(t1m, linkage);
        const auto d2 = cluster::agglomerate(t2m, linkage);
        std::vector<double> h1, h2;
        for (const auto& mg : d1.merges) h1.push_back(mg.height);
        for (const auto& mg : d2.merges) h2.push_back(mg.height);
        std::sort(h1.begin(), h1.end());
        std::sort(h2.begin(), h2.end());
        double height_diff = 0;
        for (std::size_t i = 0; i < h1.size(); ++i)
            height_diff = std::max(height_diff, std::abs(h1[i] - h2[i]));
        check.require(height_diff <= 1e-10, "dendrogram height multiset changed under permutation");
    }
}

struct Criterion {
    int id;
    std::string name;
    std::function<void(Check&)> fn;
    double budget_seconds;  // 0 = no stated budget
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "spectral invariants on random and one-factor panels", criterion_spectral_invariants,
         30.0},
        {2, "dynamics deviation matches the brute-force oracle", criterion_dd_oracle, 0.0},
        {3, "one-factor recovery of the analytic first ratio", criterion_one_factor_recovery, 0.0},
        {4, "change point power, size, and average run length", criterion_changepoint, 300.0},
        {5, "metric oracles: mj / kendall / wasserstein", criterion_metric_oracles, 0.0},
        {6, "clustering matches the naive re-scan and MST oracles", criterion_clustering_oracle,
         0.0},
        {7, "affinity contracts and tail-mass alternative", criterion_affinity_contracts, 0.0},
        {8, "end-to-end pipeline determinism", criterion_pipeline_determinism, 0.0},
        {9, "permutation equivariance", criterion_permutation_equivariance, 0.0},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& criterion : criteria) {
        if (!selected.empty() && !selected.count(criterion.id)) continue;
        Check check;
        const auto start = std::chrono::steady_clock::now();
        try {
            criterion.fn(check);
        } catch (const std::exception& e) {
            check.require(false, std::string("exception: ") + e.what());
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (criterion.budget_seconds > 0.0 && elapsed > criterion.budget_seconds)
            check.require(false, "runtime " + std::to_string(elapsed) + "s exceeds budget of " +
                                     std::to_string(criterion.budget_seconds) + "s");
        const bool ok = check.failures.empty();
        failures += ok ? 0 : 1;
        std::printf("[%s] criterion %d: %s (%lld checks, %.1fs)\n", ok ? "PASS" : "FAIL",
                    criterion.id, criterion.name.c_str(), check.checks, elapsed);
        for (const auto& f : check.failures) std::printf("    - %s\n", f.c_str());
    }
    return failures == 0 ? 0 : 1;
}
