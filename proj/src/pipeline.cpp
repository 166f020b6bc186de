#include "marketdyn/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <span>

#include "marketdyn/csv.hpp"
#include "marketdyn/parallel.hpp"
#include "marketdyn/random.hpp"
#include "marketdyn/sha256.hpp"
#include "marketdyn/spectra.hpp"

namespace marketdyn::pipeline {
namespace {

using nlohmann::json;

/// Collects artifact files and renders the manifest. Files are written to
/// "<name>.partial" and renamed once complete, so an aborted run leaves the
/// in-flight artifact marked.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    template <typename Fn>
    std::filesystem::path write(const std::string& cls, const std::string& name, Fn&& fn) {
        const std::filesystem::path final_path = dir_ / name;
        const std::filesystem::path partial = dir_ / (name + ".partial");
        fn(partial);
        std::filesystem::rename(partial, final_path);
        entries_.push_back({cls, name});
        return final_path;
    }

    json manifest_entries() const {
        json artifacts = json::array();
        std::vector<std::string> classes;
        for (const auto& [cls, name] : entries_) {
            artifacts.push_back({{"class", cls},
                                 {"path", name},
                                 {"sha256", sha256_file_hex(dir_ / name)}});
            if (std::find(classes.begin(), classes.end(), cls) == classes.end())
                classes.push_back(cls);
        }
        std::sort(classes.begin(), classes.end());
        return json{{"artifacts", artifacts}, {"classes", classes}};
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> entries_;
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError("stage " + name + ": " + e.what());
    } catch (const ComputationError& e) {
        throw ComputationError("stage " + name + ": " + e.what());
    } catch (const std::exception& e) {
        throw ComputationError("stage " + name + ": " + e.what());
    }
}

void write_matrix_artifact(ArtifactWriter& writer, const std::string& cls, const std::string& name,
                           const distances::DistanceMatrix& m) {
    writer.write(cls, name, [&](const std::filesystem::path& p) {
        csv::write_labeled_matrix(p, m.ids, m.values);
    });
    writer.write(cls, name + ".meta.json", [&](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::binary);
        out << json{{"kind", distances::to_string(m.kind)}}.dump(2) << '\n';
    });
}

json dendrogram_json(const cluster::Dendrogram& den) {
    json merges = json::array();
    for (const auto& m : den.merges)
        merges.push_back({{"a", m.left}, {"b", m.right}, {"height", m.height}, {"size", m.size}});
    return json{{"leaves", den.leaf_ids}, {"merges", merges}};
}

void write_dendrogram(ArtifactWriter& writer, const std::string& name,
                      const cluster::Dendrogram& den) {
    writer.write("dendrogram", name + ".json", [&](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::binary);
        out << dendrogram_json(den).dump(2) << '\n';
    });
    writer.write("dendrogram", name + ".nwk", [&](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::binary);
        out << cluster::to_newick(den) << '\n';
    });
}

/// Clips a panel-axis segment to the window-end axis [t1, n_returns].
std::optional<IndexRange> window_range(const ingest::PeriodSegment& seg, std::int64_t t1,
                                       std::int64_t n_returns) {
    IndexRange r{std::max(seg.first, t1), std::min(seg.last, n_returns)};
    if (r.first > r.last) return std::nullopt;
    return r;
}

json config_echo(const RunConfig& config) {
    // Execution details (threads, directories) are excluded: the manifest must
    // be byte-identical across reruns and worker counts.
    json collections = json::array();
    for (const auto& c : config.collections) {
        json item{{"label", c.label}};
        if (c.csv) item["csv"] = c.csv->filename().string();
        if (c.synth)
            item["synth"] = {{"assets", c.synth->assets},
                             {"days", c.synth->days},
                             {"beta", c.synth->beta},
                             {"sigma", c.synth->sigma}};
        collections.push_back(item);
    }
    json partition = json::array();
    for (const auto& b : config.partition)
        partition.push_back(
            {{"label", b.label}, {"start", b.start.to_string()}, {"end", b.end.to_string()}});
    return json{{"collections", collections},
                {"alignment", ingest::to_string(config.alignment)},
                {"t1", config.t1},
                {"ra_window", config.ra_window},
                {"tail_fraction", config.tail_fraction},
                {"dd_top_k", config.dd_top_k},
                {"kde_grid", config.kde_grid},
                {"changepoint",
                 {{"alpha", config.changepoint.alpha},
                  {"min_segment", config.changepoint.min_segment},
                  {"replications", config.changepoint.replications},
                  {"tmax", config.changepoint.tmax}}},
                {"linkage", cluster::to_string(config.linkage)},
                {"partition", partition},
                {"seed", config.seed}};
}

}  // namespace

void RunConfig::validate() const {
    if (collections.size() != 2)
        throw ValidationError("config: exactly two collections are required");
    for (const auto& c : collections) {
        if (c.label.empty()) throw ValidationError("config: collection label is required");
        if (c.csv.has_value() == c.synth.has_value())
            throw ValidationError("config: collection '" + c.label +
                                  "' needs exactly one of csv or synth");
        if (c.csv && !std::filesystem::exists(*c.csv))
            throw ValidationError("config: input file does not exist: " + c.csv->string());
        if (c.synth && (c.synth->assets < 2 || c.synth->days < 2))
            throw ValidationError("config: synth spec for '" + c.label + "' out of range");
    }
    if (collections[0].label == collections[1].label)
        throw ValidationError("config: collection labels must differ");
    if (t1 < 2) throw ValidationError("config: t1 must be >= 2");
    if (ra_window < 2) throw ValidationError("config: ra_window must be >= 2");
    if (!(tail_fraction > 0.0 && tail_fraction < 0.5))
        throw ValidationError("config: tail_fraction must lie in (0, 0.5)");
    if (dd_top_k < 1) throw ValidationError("config: dd_top_k must be >= 1");
    if (kde_grid < 2) throw ValidationError("config: kde_grid must be >= 2");
    if (output_dir.empty()) throw ValidationError("config: output_dir is required");
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    RunConfig config;
    if (!doc.contains("seed"))
        throw ValidationError("config: seed is mandatory (no entropy defaults)");
    config.seed = doc.at("seed").get<std::uint64_t>();
    if (!doc.contains("collections") || !doc.at("collections").is_array())
        throw ValidationError("config: collections array is required");
    for (const auto& item : doc.at("collections")) {
        CollectionConfig c;
        c.label = item.at("label").get<std::string>();
        if (item.contains("csv")) {
            std::filesystem::path p = item.at("csv").get<std::string>();
            c.csv = p.is_absolute() ? p : base_dir / p;
        }
        if (item.contains("synth")) {
            const auto& s = item.at("synth");
            CollectionConfig::Synth synth;
            synth.assets = s.at("assets").get<std::int64_t>();
            synth.days = s.at("days").get<std::int64_t>();
            synth.beta = s.at("beta").get<double>();
            if (s.contains("sigma")) synth.sigma = s.at("sigma").get<double>();
            c.synth = synth;
        }
        config.collections.push_back(std::move(c));
    }
    if (doc.contains("alignment"))
        config.alignment = ingest::alignment_policy_from_string(doc.at("alignment").get<std::string>());
    if (doc.contains("t1")) config.t1 = doc.at("t1").get<std::int64_t>();
    if (doc.contains("ra_window")) config.ra_window = doc.at("ra_window").get<std::int64_t>();
    if (doc.contains("tail_fraction")) config.tail_fraction = doc.at("tail_fraction").get<double>();
    if (doc.contains("dd_top_k")) config.dd_top_k = doc.at("dd_top_k").get<std::int64_t>();
    if (doc.contains("kde_grid")) config.kde_grid = doc.at("kde_grid").get<std::int64_t>();
    if (doc.contains("changepoint")) {
        const auto& cp = doc.at("changepoint");
        if (cp.contains("alpha")) config.changepoint.alpha = cp.at("alpha").get<double>();
        if (cp.contains("min_segment"))
            config.changepoint.min_segment = cp.at("min_segment").get<std::int64_t>();
        if (cp.contains("replications"))
            config.changepoint.replications = cp.at("replications").get<std::int64_t>();
        if (cp.contains("tmax")) config.changepoint.tmax = cp.at("tmax").get<std::int64_t>();
    }
    if (doc.contains("linkage"))
        config.linkage = cluster::linkage_from_string(doc.at("linkage").get<std::string>());
    if (doc.contains("partition")) {
        for (const auto& item : doc.at("partition")) {
            ingest::PartitionBoundary b;
            b.label = item.at("label").get<std::string>();
            const auto start = Date::parse(item.at("start").get<std::string>());
            const auto end = Date::parse(item.at("end").get<std::string>());
            if (!start || !end)
                throw ValidationError("config: partition segment '" + b.label + "': bad date");
            b.start = *start;
            b.end = *end;
            config.partition.push_back(std::move(b));
        }
    }
    if (doc.contains("output_dir")) {
        std::filesystem::path p = doc.at("output_dir").get<std::string>();
        config.output_dir = p.is_absolute() ? p : base_dir / p;
    }
    if (doc.contains("cache_dir")) {
        std::filesystem::path p = doc.at("cache_dir").get<std::string>();
        config.cache_dir = p.is_absolute() ? p : base_dir / p;
    }
    if (doc.contains("threads")) config.threads = doc.at("threads").get<int>();
    config.validate();
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError("config parse error: " + std::string(e.what()));
    }
    return parse_config(doc, path.parent_path());
}

nlohmann::json run_pipeline(const RunConfig& config) {
    config.validate();
    ArtifactWriter writer(config.output_dir);
    json seeds;

    // --- ingest ---
    std::vector<ingest::PricePanel> panels;
    for (std::size_t i = 0; i < config.collections.size(); ++i) {
        const auto& c = config.collections[i];
        panels.push_back(stage("ingest:" + c.label, [&] {
            if (c.synth) {
                const std::uint64_t sub_seed = mix_seed(config.seed, "synth", i);
                seeds["synth." + c.label] = sub_seed;
                return ingest::synth_one_factor(c.synth->assets, c.synth->days, c.synth->beta,
                                                c.synth->sigma, sub_seed, c.label);
            }
            return ingest::load_panel(*c.csv, config.alignment, c.label);
        }));
        writer.write("panel", "panel_" + c.label + ".csv", [&](const std::filesystem::path& p) {
            ingest::write_panel_csv(panels.back(), p);
        });
    }

    // --- align (combined analyses use the date intersection) ---
    const auto [aligned_a, aligned_b] = stage("align", [&] {
        return ingest::align_panels(panels[0], panels[1]);
    });
    const std::vector<ingest::PricePanel> aligned{aligned_a, aligned_b};
    for (const auto& p : aligned)
        writer.write("aligned_panel", "panel_" + p.collection_label + "_aligned.csv",
                     [&](const std::filesystem::path& path) { ingest::write_panel_csv(p, path); });

    // --- partitions ---
    std::vector<ingest::PeriodPartition> native_partition(2);
    ingest::PeriodPartition aligned_partition;
    if (!config.partition.empty()) {
        for (std::size_t i = 0; i < 2; ++i)
            native_partition[i] = stage("partition:" + panels[i].collection_label, [&] {
                return ingest::make_partition(panels[i], config.partition);
            });
        aligned_partition =
            stage("partition:aligned", [&] { return ingest::make_partition(aligned[0], config.partition); });
    } else {
        for (std::size_t i = 0; i < 2; ++i)
            native_partition[i].segments.push_back(
                {"FULL", 1, panels[i].n_dates()});
        aligned_partition.segments.push_back({"FULL", 1, aligned[0].n_dates()});
    }

    // --- returns ---
    std::vector<returns::ReturnsPanel> rets, rets_aligned;
    for (std::size_t i = 0; i < 2; ++i) {
        rets.push_back(stage("returns:" + panels[i].collection_label,
                             [&] { return returns::log_returns(panels[i]); }));
        rets_aligned.push_back(stage("returns:" + panels[i].collection_label + ":aligned",
                                     [&] { return returns::log_returns(aligned[i]); }));
    }

    // --- spectra ---
    std::vector<std::vector<spectra::CorrelationMatrix>> corr(2);
    std::vector<spectra::EigenspectrumSurface> surfaces(2), surfaces_aligned(2);
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string& label = panels[i].collection_label;
        stage("spectra:" + label, [&] {
            corr[i] = spectra::rolling_correlation(rets[i], config.t1, config.threads);
            surfaces[i] = spectra::explained_variance_surface(corr[i], config.threads);
            surfaces_aligned[i] =
                spectra::explained_variance_surface(rets_aligned[i], config.t1, config.threads);
            return 0;
        });
        writer.write("surface", "surface_" + label + ".csv", [&](const std::filesystem::path& p) {
            csv::write_surface(p, surfaces[i].window_end_indices, surfaces[i].ratios);
        });
        writer.write("surface", "surface_" + label + "_aligned.csv",
                     [&](const std::filesystem::path& p) {
                         csv::write_surface(p, surfaces_aligned[i].window_end_indices,
                                            surfaces_aligned[i].ratios);
                     });
    }

    // --- dynamics deviation (aligned calendar) ---
    // Collections smaller than the configured rank cap compare what they have.
    const std::int64_t dd_k = std::min({config.dd_top_k, surfaces_aligned[0].ratios.cols(),
                                        surfaces_aligned[1].ratios.cols()});
    stage("dd", [&] {
        writer.write("dd_scores", "dd_scores.csv", [&](const std::filesystem::path& p) {
            std::ofstream out(p, std::ios::binary);
            out << "segment,first_window,last_window,windows,value\n";
            for (const auto& seg : aligned_partition.segments) {
                const auto range =
                    window_range(seg, config.t1, rets_aligned[0].n_rows());
                if (!range)
                    throw ValidationError("segment '" + seg.label +
                                          "' contains no correlation windows");
                const double dd = spectra::dynamics_deviation(surfaces_aligned[0],
                                                              surfaces_aligned[1], *range, dd_k);
                out << seg.label << ',' << range->first << ',' << range->last << ','
                    << range->count() << ',' << csv::format_double(dd) << '\n';
            }
        });
        return 0;
    });

    // --- correlation element KDE per collection and segment ---
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string& label = panels[i].collection_label;
        for (const auto& seg : native_partition[i].segments) {
            const auto range = window_range(seg, config.t1, rets[i].n_rows());
            if (!range) continue;  // segment entirely before the first window
            const auto kde = stage("kde:" + label + ":" + seg.label, [&] {
                return spectra::correlation_element_density(corr[i], *range, config.kde_grid,
                                                            config.threads);
            });
            writer.write("correlation_kde", "kde_" + label + "_" + seg.label + ".csv",
                         [&](const std::filesystem::path& p) {
                             csv::write_xy(p, "x", "density", kde.x, kde.density);
                         });
        }
    }

    // --- trajectories ---
    std::vector<distances::DistanceMatrix> traj(2);
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string& label = panels[i].collection_label;
        traj[i] = stage("trajectory:" + label, [&] { return distances::trajectory_matrix(panels[i]); });
        write_matrix_artifact(writer, "trajectory_matrix", "trajectory_" + label + ".csv", traj[i]);
    }

    // --- change points ---
    const std::uint64_t cpm_seed = mix_seed(config.seed, "changepoint");
    seeds["changepoint"] = cpm_seed;
    std::filesystem::path cache_dir;
    if (config.cache_dir) {
        cache_dir = *config.cache_dir;
    } else if (const char* env = std::getenv("MARKETDYN_CACHE"); env && *env) {
        cache_dir = env;
    } else {
        cache_dir = config.output_dir / "threshold_cache";
    }
    const auto thresholds = stage("changepoint:calibrate", [&] {
        return changepoint::load_or_calibrate(cache_dir, changepoint::StatisticKind::phase2,
                                              config.changepoint.tmax, config.changepoint.alpha,
                                              config.changepoint.replications, cpm_seed,
                                              config.changepoint.min_segment, config.threads);
    });

    json warnings = json::array();
    std::vector<distances::DistanceMatrix> breaks_mats(2);
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string& label = panels[i].collection_label;
        const auto sets = stage("changepoint:" + label, [&] {
            std::vector<changepoint::BreakSet> out(
                static_cast<std::size_t>(rets[i].n_assets()));
            parallel_for(rets[i].n_assets(), config.threads, [&](std::int64_t j) {
                const Eigen::VectorXd col = rets[i].values.col(static_cast<Eigen::Index>(j));
                std::vector<double> series(col.data(), col.data() + col.size());
                out[static_cast<std::size_t>(j)] = changepoint::detect_sequential(
                    series, thresholds, config.changepoint.min_segment,
                    rets[i].asset_ids[static_cast<std::size_t>(j)]);
            });
            return out;
        });
        writer.write("break_sets", "break_sets_" + label + ".csv",
                     [&](const std::filesystem::path& p) {
                         std::ofstream out(p, std::ios::binary);
                         out << "asset_id,change_index,change_date\n";
                         for (const auto& s : sets)
                             for (const std::int64_t idx : s.indices)
                                 out << s.asset_id << ',' << idx << ','
                                     << rets[i].dates[static_cast<std::size_t>(idx - 1)].to_string()
                                     << '\n';
                     });
        breaks_mats[i] = stage("breaks_matrix:" + label, [&] {
            std::vector<std::string> warn;
            auto m = distances::breaks_matrix(sets, &warn);
            for (auto& w : warn) warnings.push_back(label + ": " + w);
            return m;
        });
        write_matrix_artifact(writer, "breaks_matrix", "breaks_matrix_" + label + ".csv",
                              breaks_mats[i]);
    }

    // --- extremes and total returns, per collection ---
    std::vector<distances::DistanceMatrix> extremes(2), returns_mats(2);
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string& label = panels[i].collection_label;
        extremes[i] = stage("extremes:" + label, [&] {
            std::vector<distances::TailMeasure> tails;
            for (Eigen::Index j = 0; j < rets[i].values.cols(); ++j) {
                const Eigen::VectorXd col = rets[i].values.col(j);
                tails.push_back(distances::tail_measure(
                    std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                    rets[i].asset_ids[static_cast<std::size_t>(j)], config.tail_fraction));
            }
            return distances::extremes_matrix(tails);
        });
        write_matrix_artifact(writer, "extremes_matrix", "extremes_" + label + ".csv", extremes[i]);

        returns_mats[i] = stage("returns_matrix:" + label, [&] {
            const Eigen::VectorXd totals = returns::total_returns(rets[i]);
            return distances::returns_matrix(
                std::span<const double>(totals.data(), static_cast<std::size_t>(totals.size())),
                rets[i].asset_ids);
        });
        write_matrix_artifact(writer, "returns_matrix", "returns_matrix_" + label + ".csv",
                              returns_mats[i]);
    }

    // --- combined affinity matrices (aligned calendar, labels prefix ids) ---
    stage("affinity:combined", [&] {
        std::vector<std::string> combined_ids;
        std::vector<double> combined_totals;
        std::vector<distances::TailMeasure> combined_tails;
        for (std::size_t i = 0; i < 2; ++i) {
            const Eigen::VectorXd totals = returns::total_returns(rets_aligned[i]);
            for (Eigen::Index j = 0; j < totals.size(); ++j) {
                const std::string id = aligned[i].collection_label + ":" +
                                       rets_aligned[i].asset_ids[static_cast<std::size_t>(j)];
                combined_ids.push_back(id);
                combined_totals.push_back(totals(j));
                const Eigen::VectorXd col = rets_aligned[i].values.col(j);
                combined_tails.push_back(distances::tail_measure(
                    std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), id,
                    config.tail_fraction));
            }
        }
        const auto returns_combined = distances::returns_matrix(combined_totals, combined_ids);
        const auto extremes_combined = distances::extremes_matrix(combined_tails);
        const auto affinity_r = distances::to_affinity(returns_combined);
        const auto affinity_e = distances::to_affinity(extremes_combined);
        auto write_affinity = [&](const std::string& name, const distances::AffinityMatrix& a,
                                  const std::string& source_kind) {
            writer.write("affinity_matrix", name, [&](const std::filesystem::path& p) {
                csv::write_labeled_matrix(p, a.ids, a.values);
            });
            writer.write("affinity_matrix", name + ".meta.json",
                         [&](const std::filesystem::path& p) {
                             std::ofstream out(p, std::ios::binary);
                             out << json{{"kind", "affinity"}, {"source", source_kind}}.dump(2)
                                 << '\n';
                         });
        };
        write_affinity("affinity_returns_combined.csv", affinity_r, "returns");
        write_affinity("affinity_extremes_combined.csv", affinity_e, "extremes");
        return 0;
    });

    // --- anomaly persistence ---
    std::vector<persistence::PersistenceMatrix> pers(2);
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string& label = panels[i].collection_label;
        pers[i] = stage("persistence:" + label, [&] {
            const auto ra = returns::rolling_risk_adjusted(rets[i], config.ra_window);
            return persistence::persistence_matrix(ra, config.threads);
        });
        writer.write("persistence_matrix", "persistence_" + label + ".csv",
                     [&](const std::filesystem::path& p) {
                         std::vector<std::string> ids;
                         for (std::int64_t t : pers[i].time_indices)
                             ids.push_back("t" + std::to_string(t));
                         csv::write_labeled_matrix(p, ids, pers[i].values);
                     });
    }

    // --- norms summary ---
    stage("norms", [&] {
        writer.write("norms_summary", "norms.csv", [&](const std::filesystem::path& p) {
            std::ofstream out(p, std::ios::binary);
            out << "name,value\n";
            for (std::size_t i = 0; i < 2; ++i) {
                const std::string& label = panels[i].collection_label;
                out << "trajectory_" << label << ','
                    << csv::format_double(distances::normalized_norm(traj[i])) << '\n';
                out << "breaks_" << label << ','
                    << csv::format_double(distances::normalized_norm(breaks_mats[i])) << '\n';
                out << "extremes_" << label << ','
                    << csv::format_double(distances::normalized_norm(extremes[i])) << '\n';
                out << "returns_" << label << ','
                    << csv::format_double(distances::normalized_norm(returns_mats[i])) << '\n';
                out << "persistence_" << label << ','
                    << csv::format_double(persistence::persistence_norm(pers[i])) << '\n';
            }
        });
        return 0;
    });

    // --- dendrograms ---
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string& label = panels[i].collection_label;
        stage("cluster:" + label, [&] {
            write_dendrogram(writer, "dendrogram_trajectory_" + label,
                             cluster::agglomerate(traj[i], config.linkage));
            write_dendrogram(writer, "dendrogram_breaks_" + label,
                             cluster::agglomerate(breaks_mats[i], config.linkage));
            write_dendrogram(writer, "dendrogram_persistence_" + label,
                             cluster::agglomerate(pers[i], config.linkage));
            return 0;
        });
    }

    // --- manifest ---
    json manifest = writer.manifest_entries();
    manifest["format_version"] = 1;
    manifest["config"] = config_echo(config);
    manifest["seeds"] = seeds;
    manifest["warnings"] = warnings;
    {
        const std::filesystem::path partial = config.output_dir / "manifest.json.partial";
        std::ofstream out(partial, std::ios::binary);
        out << manifest.dump(2) << '\n';
        out.close();
        std::filesystem::rename(partial, config.output_dir / "manifest.json");
    }
    return manifest;
}

}  // namespace marketdyn::pipeline
