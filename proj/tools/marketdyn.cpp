// Command-line front end: one subcommand per pipeline stage plus `report`,
// which runs everything from a JSON config. Exit codes: 0 success,
// 1 validation error, 2 computation error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <span>

#include "marketdyn/cluster.hpp"
#include "marketdyn/csv.hpp"
#include "marketdyn/parallel.hpp"
#include "marketdyn/pipeline.hpp"
#include "marketdyn/spectra.hpp"

namespace md = marketdyn;
using nlohmann::json;

namespace {

std::filesystem::path default_cache_dir() {
    if (const char* env = std::getenv("MARKETDYN_CACHE"); env && *env) return env;
    return "threshold_cache";
}

md::IndexRange resolve_segment(const std::string& segment_label,
                               const std::filesystem::path& partition_path,
                               const std::filesystem::path& panel_path, std::int64_t from,
                               std::int64_t to) {
    if (segment_label.empty()) {
        if (from <= 0 || to <= 0)
            throw md::ValidationError("either --segment with --partition/--panel or --from/--to is required");
        return md::IndexRange{from, to};
    }
    if (partition_path.empty() || panel_path.empty())
        throw md::ValidationError("--segment needs --partition and --panel to resolve dates");
    const auto panel =
        md::ingest::load_panel(panel_path, md::ingest::AlignmentPolicy::forward_fill);
    const auto partition =
        md::ingest::make_partition(panel, md::ingest::load_partition_config(partition_path));
    const auto* seg = partition.find(segment_label);
    if (!seg) throw md::ValidationError("partition has no segment labeled '" + segment_label + "'");
    return seg->range();
}

void write_assignment_csv(const std::filesystem::path& path,
                          const std::vector<std::string>& ids, const std::vector<int>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw md::ValidationError("cannot open file for writing: " + path.string());
    out << "id,cluster\n";
    for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ',' << labels[i] << '\n';
}

int run(int argc, char** argv) {
    CLI::App app{"marketdyn: comparative dynamics, behaviours, and anomaly persistence "
                 "of financial time-series collections"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Generate a synthetic one-factor price panel");
    std::int64_t synth_assets = 20, synth_days = 600;
    double synth_beta = 0.8, synth_sigma = 0.02;
    std::uint64_t synth_seed = 0;
    std::string synth_label = "synthetic", synth_out;
    synth->add_option("--assets", synth_assets, "Number of assets (>= 2)")->required();
    synth->add_option("--days", synth_days, "Number of dates (>= 2)")->required();
    synth->add_option("--beta", synth_beta, "Common-factor loading in [0, 1)")->required();
    synth->add_option("--sigma", synth_sigma, "Idiosyncratic daily volatility scale");
    synth->add_option("--seed", synth_seed, "Random seed (mandatory)")->required();
    synth->add_option("--label", synth_label, "Collection label");
    synth->add_option("--out", synth_out, "Output CSV path")->required();
    synth->callback([&] {
        const auto panel = md::ingest::synth_one_factor(synth_assets, synth_days, synth_beta,
                                                        synth_sigma, synth_seed, synth_label);
        md::ingest::write_panel_csv(panel, synth_out);
    });

    // ---- ingest ----
    auto* ingest_cmd = app.add_subcommand("ingest", "Validate and align a raw CSV price panel");
    std::string ingest_in, ingest_out, ingest_policy = "forward_fill", ingest_label;
    ingest_cmd->add_option("--in", ingest_in, "Input CSV (header: date,<id>,...)")->required();
    ingest_cmd->add_option("--policy", ingest_policy, "Missing-data policy: forward_fill|intersect");
    ingest_cmd->add_option("--label", ingest_label, "Collection label (default: file stem)");
    ingest_cmd->add_option("--out", ingest_out, "Canonical CSV output path")->required();
    ingest_cmd->callback([&] {
        const auto panel = md::ingest::load_panel(
            ingest_in, md::ingest::alignment_policy_from_string(ingest_policy), ingest_label);
        md::ingest::write_panel_csv(panel, ingest_out);
    });

    // ---- spectra ----
    auto* spectra_cmd =
        app.add_subcommand("spectra", "Rolling correlation eigenspectrum surface and element KDE");
    std::string spectra_panel, spectra_out, spectra_kde_out;
    std::int64_t spectra_t1 = 60, spectra_kde_grid = 512, spectra_from = 0, spectra_to = 0;
    int threads = 0;
    spectra_cmd->add_option("--panel", spectra_panel, "Canonical panel CSV")->required();
    spectra_cmd->add_option("--t1", spectra_t1, "Rolling window length in return observations");
    spectra_cmd->add_option("--surface-out", spectra_out, "Surface CSV output")->required();
    spectra_cmd->add_option("--kde-out", spectra_kde_out, "Correlation-element KDE CSV output");
    spectra_cmd->add_option("--kde-from", spectra_from, "First window index pooled into the KDE");
    spectra_cmd->add_option("--kde-to", spectra_to, "Last window index pooled into the KDE");
    spectra_cmd->add_option("--kde-grid", spectra_kde_grid, "KDE grid size");
    spectra_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");
    spectra_cmd->callback([&] {
        const auto panel =
            md::ingest::load_panel(spectra_panel, md::ingest::AlignmentPolicy::forward_fill);
        const auto rets = md::returns::log_returns(panel);
        const auto mats = md::spectra::rolling_correlation(rets, spectra_t1, threads);
        const auto surface = md::spectra::explained_variance_surface(mats, threads);
        md::csv::write_surface(spectra_out, surface.window_end_indices, surface.ratios);
        if (!spectra_kde_out.empty()) {
            md::IndexRange range{spectra_from > 0 ? spectra_from : surface.window_end_indices.front(),
                                 spectra_to > 0 ? spectra_to : surface.window_end_indices.back()};
            const auto kde =
                md::spectra::correlation_element_density(mats, range, spectra_kde_grid, threads);
            md::csv::write_xy(spectra_kde_out, "x", "density", kde.x, kde.density);
        }
    });

    // ---- dd ----
    auto* dd = app.add_subcommand("dd", "Dynamics deviation between two eigenspectrum surfaces");
    std::string dd_a, dd_b, dd_segment, dd_partition, dd_panel, dd_out;
    std::int64_t dd_from = 0, dd_to = 0, dd_k = 10;
    dd->add_option("--a", dd_a, "First surface CSV")->required();
    dd->add_option("--b", dd_b, "Second surface CSV")->required();
    dd->add_option("--segment", dd_segment, "Partition segment label (needs --partition/--panel)");
    dd->add_option("--partition", dd_partition, "Partition config JSON");
    dd->add_option("--panel", dd_panel, "Panel CSV used to resolve partition dates");
    dd->add_option("--from", dd_from, "First window index");
    dd->add_option("--to", dd_to, "Last window index");
    dd->add_option("--k", dd_k, "Number of leading eigenvalue ratios compared");
    dd->add_option("--out", dd_out, "Optional CSV output (segment,value)");
    dd->callback([&] {
        const auto sa = md::csv::read_surface(dd_a);
        const auto sb = md::csv::read_surface(dd_b);
        md::spectra::EigenspectrumSurface a{sa.window_end_indices, sa.ratios};
        md::spectra::EigenspectrumSurface b{sb.window_end_indices, sb.ratios};
        // mirror run_pipeline: cap the rank count at what both surfaces carry
        dd_k = std::min({dd_k, a.ratios.cols(), b.ratios.cols()});
        md::IndexRange range = resolve_segment(dd_segment, dd_partition, dd_panel, dd_from, dd_to);
        // Clip a panel-axis segment to the windows both surfaces provide.
        range.first = std::max({range.first, a.window_end_indices.front(),
                                b.window_end_indices.front()});
        range.last = std::min({range.last, a.window_end_indices.back(),
                               b.window_end_indices.back()});
        if (range.first > range.last)
            throw md::ValidationError("segment contains no correlation windows");
        const double dd_value = md::spectra::dynamics_deviation(a, b, range, dd_k);
        std::cout << md::csv::format_double(dd_value) << '\n';
        if (!dd_out.empty()) {
            std::ofstream out(dd_out, std::ios::binary);
            out << "segment,first_window,last_window,windows,value\n";
            out << (dd_segment.empty() ? "RANGE" : dd_segment) << ',' << range.first << ','
                << range.last << ',' << range.count() << ',' << md::csv::format_double(dd_value)
                << '\n';
        }
    });

    // ---- trajectory ----
    auto* traj = app.add_subcommand("trajectory", "L1 trajectory distance matrix");
    std::string traj_panel, traj_out;
    traj->add_option("--panel", traj_panel, "Canonical panel CSV")->required();
    traj->add_option("--out", traj_out, "Matrix CSV output")->required();
    traj->callback([&] {
        const auto panel =
            md::ingest::load_panel(traj_panel, md::ingest::AlignmentPolicy::forward_fill);
        const auto d = md::distances::trajectory_matrix(panel);
        md::csv::write_labeled_matrix(traj_out, d.ids, d.values);
    });

    // ---- breaks ----
    auto* breaks = app.add_subcommand(
        "breaks", "Sequential change point detection and the breaks distance matrix");
    std::string breaks_panel, breaks_sets_out, breaks_matrix_out, breaks_cache;
    double breaks_alpha = 0.05;
    std::int64_t breaks_min_segment = 30, breaks_replications = 2000, breaks_tmax = 300;
    std::uint64_t breaks_seed = 0;
    int breaks_threads = 0;
    breaks->add_option("--panel", breaks_panel, "Canonical panel CSV")->required();
    breaks->add_option("--alpha", breaks_alpha, "Per-decision false alarm rate (ARL0 = 1/alpha)");
    breaks->add_option("--min-segment", breaks_min_segment, "Minimum segment length");
    breaks->add_option("--replications", breaks_replications, "Calibration replications");
    breaks->add_option("--tmax", breaks_tmax, "Calibrated threshold horizon");
    breaks->add_option("--seed", breaks_seed, "Calibration seed (mandatory)")->required();
    breaks->add_option("--cache", breaks_cache, "Threshold cache dir (default: $MARKETDYN_CACHE)");
    breaks->add_option("--sets-out", breaks_sets_out, "Break sets CSV output")->required();
    breaks->add_option("--matrix-out", breaks_matrix_out, "Breaks matrix CSV output");
    breaks->add_option("--threads", breaks_threads, "Worker threads (0 = hardware)");
    breaks->callback([&] {
        const auto panel =
            md::ingest::load_panel(breaks_panel, md::ingest::AlignmentPolicy::forward_fill);
        const auto rets = md::returns::log_returns(panel);
        const auto table = md::changepoint::load_or_calibrate(
            breaks_cache.empty() ? default_cache_dir() : std::filesystem::path(breaks_cache),
            md::changepoint::StatisticKind::phase2, breaks_tmax, breaks_alpha, breaks_replications,
            breaks_seed, breaks_min_segment, breaks_threads);
        std::vector<md::changepoint::BreakSet> sets(static_cast<std::size_t>(rets.n_assets()));
        md::parallel_for(rets.n_assets(), breaks_threads, [&](std::int64_t j) {
            const Eigen::VectorXd col = rets.values.col(static_cast<Eigen::Index>(j));
            std::vector<double> series(col.data(), col.data() + col.size());
            sets[static_cast<std::size_t>(j)] = md::changepoint::detect_sequential(
                series, table, breaks_min_segment, rets.asset_ids[static_cast<std::size_t>(j)]);
        });
        std::ofstream out(breaks_sets_out, std::ios::binary);
        out << "asset_id,change_index,change_date\n";
        for (const auto& s : sets)
            for (const std::int64_t idx : s.indices)
                out << s.asset_id << ',' << idx << ','
                    << rets.dates[static_cast<std::size_t>(idx - 1)].to_string() << '\n';
        if (!breaks_matrix_out.empty()) {
            std::vector<std::string> warnings;
            const auto m = md::distances::breaks_matrix(sets, &warnings);
            for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
            md::csv::write_labeled_matrix(breaks_matrix_out, m.ids, m.values);
        }
    });

    // ---- extremes ----
    auto* extremes = app.add_subcommand("extremes", "Wasserstein distance matrix of return tails");
    std::string extremes_panel, extremes_out;
    double extremes_tail = 0.1;
    extremes->add_option("--panel", extremes_panel, "Canonical panel CSV")->required();
    extremes->add_option("--tail", extremes_tail, "Tail fraction per side");
    extremes->add_option("--out", extremes_out, "Matrix CSV output")->required();
    extremes->callback([&] {
        const auto panel =
            md::ingest::load_panel(extremes_panel, md::ingest::AlignmentPolicy::forward_fill);
        const auto rets = md::returns::log_returns(panel);
        std::vector<md::distances::TailMeasure> tails;
        for (Eigen::Index j = 0; j < rets.values.cols(); ++j) {
            const Eigen::VectorXd col = rets.values.col(j);
            tails.push_back(md::distances::tail_measure(
                std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                rets.asset_ids[static_cast<std::size_t>(j)], extremes_tail));
        }
        const auto d = md::distances::extremes_matrix(tails);
        md::csv::write_labeled_matrix(extremes_out, d.ids, d.values);
    });

    // ---- persistence ----
    auto* pers = app.add_subcommand("persistence", "Kendall anomaly-persistence matrix");
    std::string pers_panel, pers_out;
    std::int64_t pers_window = 61;
    bool pers_long = false;
    int pers_threads = 0;
    pers->add_option("--panel", pers_panel, "Canonical panel CSV")->required();
    pers->add_option("--ra-window", pers_window, "Risk-adjusted return window (observations)");
    pers->add_option("--out", pers_out, "Matrix CSV output")->required();
    pers->add_flag("--long", pers_long, "Write long format s,t,tau instead of a square matrix");
    pers->add_option("--threads", pers_threads, "Worker threads (0 = hardware)");
    pers->callback([&] {
        const auto panel =
            md::ingest::load_panel(pers_panel, md::ingest::AlignmentPolicy::forward_fill);
        const auto rets = md::returns::log_returns(panel);
        const auto ra = md::returns::rolling_risk_adjusted(rets, pers_window);
        const auto k = md::persistence::persistence_matrix(ra, pers_threads);
        if (pers_long) {
            std::ofstream out(pers_out, std::ios::binary);
            out << "s,t,tau\n";
            for (Eigen::Index s = 0; s < k.values.rows(); ++s)
                for (Eigen::Index t = 0; t < k.values.cols(); ++t)
                    out << k.time_indices[static_cast<std::size_t>(s)] << ','
                        << k.time_indices[static_cast<std::size_t>(t)] << ','
                        << md::csv::format_double(k.values(s, t)) << '\n';
        } else {
            std::vector<std::string> ids;
            for (std::int64_t t : k.time_indices) ids.push_back("t" + std::to_string(t));
            md::csv::write_labeled_matrix(pers_out, ids, k.values);
        }
    });

    // ---- cluster ----
    auto* clus = app.add_subcommand("cluster", "Agglomerative clustering of a symmetric matrix");
    std::string clus_matrix, clus_linkage = "average", clus_dendro_out, clus_newick_out,
                clus_assign_out, clus_input_kind = "distance";
    std::int64_t clus_cut_k = 0;
    double clus_cut_height = -1.0;
    clus->add_option("--matrix", clus_matrix, "Matrix CSV (id-labeled, symmetric)")->required();
    clus->add_option("--linkage", clus_linkage, "average|single|complete");
    clus->add_option("--input-kind", clus_input_kind,
                     "distance (zero diagonal) or persistence (clustered as 1 - k)");
    clus->add_option("--cut-k", clus_cut_k, "Cut into k clusters");
    clus->add_option("--cut-height", clus_cut_height, "Cut at height");
    clus->add_option("--dendrogram-out", clus_dendro_out, "Dendrogram JSON output")->required();
    clus->add_option("--newick-out", clus_newick_out, "Newick text output");
    clus->add_option("--assign-out", clus_assign_out, "Cluster assignment CSV output");
    clus->callback([&] {
        auto loaded = md::csv::read_labeled_matrix(clus_matrix);
        Eigen::MatrixXd values = std::move(loaded.values);
        if (clus_input_kind == "persistence") {
            values = (1.0 - values.array()).matrix();
            for (Eigen::Index i = 0; i < values.rows(); ++i) values(i, i) = 0.0;
        } else if (clus_input_kind != "distance") {
            throw md::ValidationError("unknown --input-kind: " + clus_input_kind);
        }
        const auto den = md::cluster::agglomerate(values, loaded.ids,
                                                  md::cluster::linkage_from_string(clus_linkage));
        {
            json merges = json::array();
            for (const auto& m : den.merges)
                merges.push_back(
                    {{"a", m.left}, {"b", m.right}, {"height", m.height}, {"size", m.size}});
            std::ofstream out(clus_dendro_out, std::ios::binary);
            out << json{{"leaves", den.leaf_ids}, {"merges", merges}}.dump(2) << '\n';
        }
        if (!clus_newick_out.empty()) {
            std::ofstream out(clus_newick_out, std::ios::binary);
            out << md::cluster::to_newick(den) << '\n';
        }
        if (!clus_assign_out.empty()) {
            std::vector<int> labels;
            if (clus_cut_k > 0)
                labels = md::cluster::cut(den, md::cluster::CutMode::k_clusters,
                                          static_cast<double>(clus_cut_k));
            else if (clus_cut_height >= 0.0)
                labels = md::cluster::cut(den, md::cluster::CutMode::height, clus_cut_height);
            else
                throw md::ValidationError("--assign-out needs --cut-k or --cut-height");
            write_assignment_csv(clus_assign_out, den.leaf_ids, labels);
        }
    });

    // ---- report ----
    auto* report = app.add_subcommand("report", "Run the full pipeline from a JSON config");
    std::string report_config;
    int report_threads = -1;
    report->add_option("--config", report_config, "Run config JSON")->required();
    report->add_option("--threads", report_threads, "Override config worker threads");
    report->callback([&] {
        auto config = md::pipeline::load_config(report_config);
        if (report_threads >= 0) config.threads = report_threads;
        const auto manifest = md::pipeline::run_pipeline(config);
        std::cout << "wrote " << manifest.at("artifacts").size() << " artifacts to "
                  << config.output_dir.string() << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // bad flags are validation errors; --help is success
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const md::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const md::ComputationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
