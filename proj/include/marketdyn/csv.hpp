#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace marketdyn::csv {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

/// Strict double parse; the whole field must be consumed.
bool parse_double(std::string_view field, double& out);

/// Splits one CSV line on commas. The canonical formats never quote fields,
/// so no quote handling is performed; ids containing commas are rejected at
/// write time.
std::vector<std::string> split_line(std::string_view line);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines;  // 1-based file line per data row
};

/// Reads a CSV file with a mandatory header row. Blank lines are skipped.
Table read_table(const std::filesystem::path& path);

/// Labeled square matrix: header "id,<id1>,...,<idn>", one labeled row per id.
void write_labeled_matrix(const std::filesystem::path& path, const std::vector<std::string>& ids,
                          const Eigen::MatrixXd& values);
struct LabeledMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;
};
LabeledMatrix read_labeled_matrix(const std::filesystem::path& path);

/// Eigenspectrum surface: header "window_end,lambda_1,...,lambda_M".
void write_surface(const std::filesystem::path& path,
                   const std::vector<std::int64_t>& window_end_indices,
                   const Eigen::MatrixXd& ratios);
struct SurfaceData {
    std::vector<std::int64_t> window_end_indices;
    Eigen::MatrixXd ratios;
};
SurfaceData read_surface(const std::filesystem::path& path);

void write_xy(const std::filesystem::path& path, std::string_view x_name, std::string_view y_name,
              const std::vector<double>& x, const std::vector<double>& y);

/// Writes ids that fail canonical-format constraints (commas, newlines) as an error.
void require_writable_id(const std::string& id);

}  // namespace marketdyn::csv
