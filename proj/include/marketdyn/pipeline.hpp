#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "marketdyn/cluster.hpp"
#include "marketdyn/ingest.hpp"

namespace marketdyn::pipeline {

/// One input collection: either an existing CSV panel or a synthetic spec.
struct CollectionConfig {
    std::string label;
    std::optional<std::filesystem::path> csv;
    struct Synth {
        std::int64_t assets = 0;
        std::int64_t days = 0;
        double beta = 0.0;
        double sigma = 0.02;
    };
    std::optional<Synth> synth;
};

struct ChangepointConfig {
    double alpha = 0.05;
    std::int64_t min_segment = 30;
    std::int64_t replications = 2000;
    std::int64_t tmax = 300;
};

struct RunConfig {
    std::vector<CollectionConfig> collections;  // exactly two
    ingest::AlignmentPolicy alignment = ingest::AlignmentPolicy::forward_fill;
    std::int64_t t1 = 60;
    std::int64_t ra_window = 61;
    double tail_fraction = 0.1;
    std::int64_t dd_top_k = 10;
    std::int64_t kde_grid = 512;
    ChangepointConfig changepoint;
    cluster::Linkage linkage = cluster::Linkage::average;
    std::vector<ingest::PartitionBoundary> partition;  // optional
    std::uint64_t seed = 0;  // mandatory in config files
    std::filesystem::path output_dir;
    std::optional<std::filesystem::path> cache_dir;  // falls back to MARKETDYN_CACHE, then output_dir/threshold_cache
    int threads = 0;  // 0 = hardware concurrency; never affects results

    void validate() const;
};

RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Runs the full analysis and returns the manifest that was also written to
/// <output_dir>/manifest.json. Identical (config, seed) produce byte-identical
/// outputs regardless of the thread count.
nlohmann::json run_pipeline(const RunConfig& config);

}  // namespace marketdyn::pipeline
