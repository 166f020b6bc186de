#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "marketdyn/panel.hpp"

namespace marketdyn::ingest {

enum class AlignmentPolicy { intersect, forward_fill };

AlignmentPolicy alignment_policy_from_string(const std::string& s);
std::string to_string(AlignmentPolicy p);

/// Loads a price panel from CSV with header "date,<asset_1>,...,<asset_M>".
/// Rows are sorted by ascending date. Missing cells (empty fields) are
/// resolved by the alignment policy: forward_fill copies the most recent
/// prior value for that asset, intersect keeps only fully populated rows.
/// The label defaults to the file stem when empty.
PricePanel load_panel(const std::filesystem::path& csv_path, AlignmentPolicy policy,
                      std::string label = "");

/// Writes the canonical CSV form: ISO dates, shortest round-trip numbers.
void write_panel_csv(const PricePanel& panel, const std::filesystem::path& path);

/// Restricts both panels to the intersection of their date sets (ascending).
std::pair<PricePanel, PricePanel> align_panels(const PricePanel& a, const PricePanel& b);

struct PartitionBoundary {
    std::string label;
    Date start;
    Date end;
};

/// Maps date intervals to inclusive 1-based index bounds on the panel's time
/// axis. Boundary dates absent from the panel snap to the nearest contained
/// date inside the interval.
PeriodPartition make_partition(const PricePanel& panel,
                               const std::vector<PartitionBoundary>& boundaries);

/// Parses a partition config file: JSON array of {label, start, end}.
std::vector<PartitionBoundary> load_partition_config(const std::filesystem::path& path);

/// Synthetic one-factor panel. Log returns follow
///   r_i(t) = sigma_idio * (beta * f(t) + sqrt(1 - beta^2) * eps_i(t)),
/// with f and eps independent standard Gaussians, exponentiated onto an
/// initial price of 100. Deterministic for a fixed seed.
PricePanel synth_one_factor(std::int64_t n_assets, std::int64_t n_dates, double beta,
                            double sigma_idio, std::uint64_t seed,
                            std::string label = "synthetic");

}  // namespace marketdyn::ingest
