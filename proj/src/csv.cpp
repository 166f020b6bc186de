#include "marketdyn/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "marketdyn/common.hpp"

namespace marketdyn::csv {

std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw ComputationError("number formatting failed");
    return std::string(buf, ptr);
}

bool parse_double(std::string_view field, double& out) {
    if (field.empty()) return false;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open CSV file: " + path.string());
    Table table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_header) {
            table.header = split_line(line);
            have_header = true;
        } else {
            table.rows.push_back(split_line(line));
            table.row_lines.push_back(line_no);
        }
    }
    if (!have_header) throw ValidationError("CSV file has no header row: " + path.string());
    return table;
}

void require_writable_id(const std::string& id) {
    if (id.empty()) throw ValidationError("empty id cannot be written to CSV");
    if (id.find_first_of(",\n\r") != std::string::npos)
        throw ValidationError("id contains characters not representable in canonical CSV: " + id);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
    if (!out) throw ValidationError("cannot open file for writing: " + path.string());
    return out;
}

}  // namespace

void write_labeled_matrix(const std::filesystem::path& path, const std::vector<std::string>& ids,
                          const Eigen::MatrixXd& values) {
    const auto n = static_cast<Eigen::Index>(ids.size());
    if (values.rows() != n || values.cols() != n)
        throw ValidationError("matrix dimensions do not match id count");
    auto out = open_out(path);
    out << "id";
    for (const auto& id : ids) {
        require_writable_id(id);
        out << ',' << id;
    }
    out << '\n';
    for (Eigen::Index i = 0; i < n; ++i) {
        out << ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j) out << ',' << format_double(values(i, j));
        out << '\n';
    }
}

LabeledMatrix read_labeled_matrix(const std::filesystem::path& path) {
    const Table table = read_table(path);
    if (table.header.empty() || table.header[0] != "id")
        throw ValidationError("matrix CSV must start with an 'id' header column: " + path.string());
    LabeledMatrix m;
    m.ids.assign(table.header.begin() + 1, table.header.end());
    const auto n = static_cast<Eigen::Index>(m.ids.size());
    if (static_cast<Eigen::Index>(table.rows.size()) != n)
        throw ValidationError("matrix CSV row count does not match header: " + path.string());
    m.values.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(row.size()) != n + 1)
            throw ValidationError("matrix CSV line " + std::to_string(table.row_lines[static_cast<std::size_t>(i)]) +
                                  ": expected " + std::to_string(n + 1) + " fields");
        if (row[0] != m.ids[static_cast<std::size_t>(i)])
            throw ValidationError("matrix CSV row label mismatch at line " +
                                  std::to_string(table.row_lines[static_cast<std::size_t>(i)]));
        for (Eigen::Index j = 0; j < n; ++j) {
            double v = 0;
            if (!parse_double(row[static_cast<std::size_t>(j + 1)], v))
                throw ValidationError("matrix CSV line " + std::to_string(table.row_lines[static_cast<std::size_t>(i)]) +
                                      ": bad number '" + row[static_cast<std::size_t>(j + 1)] + "'");
            m.values(i, j) = v;
        }
    }
    return m;
}

void write_surface(const std::filesystem::path& path,
                   const std::vector<std::int64_t>& window_end_indices,
                   const Eigen::MatrixXd& ratios) {
    if (static_cast<Eigen::Index>(window_end_indices.size()) != ratios.rows())
        throw ValidationError("surface row count does not match window index count");
    auto out = open_out(path);
    out << "window_end";
    for (Eigen::Index j = 0; j < ratios.cols(); ++j) out << ",lambda_" << (j + 1);
    out << '\n';
    for (Eigen::Index i = 0; i < ratios.rows(); ++i) {
        out << window_end_indices[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < ratios.cols(); ++j) out << ',' << format_double(ratios(i, j));
        out << '\n';
    }
}

SurfaceData read_surface(const std::filesystem::path& path) {
    const Table table = read_table(path);
    if (table.header.empty() || table.header[0] != "window_end")
        throw ValidationError("surface CSV must have a 'window_end' first column: " + path.string());
    SurfaceData s;
    const auto cols = static_cast<Eigen::Index>(table.header.size()) - 1;
    if (cols < 1) throw ValidationError("surface CSV has no eigenvalue columns: " + path.string());
    s.ratios.resize(static_cast<Eigen::Index>(table.rows.size()), cols);
    s.window_end_indices.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (static_cast<Eigen::Index>(row.size()) != cols + 1)
            throw ValidationError("surface CSV line " + std::to_string(table.row_lines[i]) +
                                  ": wrong field count");
        std::int64_t idx = 0;
        auto [ptr, ec] = std::from_chars(row[0].data(), row[0].data() + row[0].size(), idx);
        if (ec != std::errc{} || ptr != row[0].data() + row[0].size())
            throw ValidationError("surface CSV line " + std::to_string(table.row_lines[i]) +
                                  ": bad window index '" + row[0] + "'");
        s.window_end_indices.push_back(idx);
        for (Eigen::Index j = 0; j < cols; ++j) {
            double v = 0;
            if (!parse_double(row[static_cast<std::size_t>(j) + 1], v))
                throw ValidationError("surface CSV line " + std::to_string(table.row_lines[i]) +
                                      ": bad number");
            s.ratios(static_cast<Eigen::Index>(i), j) = v;
        }
    }
    return s;
}

void write_xy(const std::filesystem::path& path, std::string_view x_name, std::string_view y_name,
              const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("x/y column size mismatch");
    auto out = open_out(path);
    out << x_name << ',' << y_name << '\n';
    for (std::size_t i = 0; i < x.size(); ++i)
        out << format_double(x[i]) << ',' << format_double(y[i]) << '\n';
}

}  // namespace marketdyn::csv
