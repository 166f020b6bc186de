#include "marketdyn/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "marketdyn/csv.hpp"
#include "marketdyn/random.hpp"

namespace marketdyn::ingest {

AlignmentPolicy alignment_policy_from_string(const std::string& s) {
    if (s == "intersect") return AlignmentPolicy::intersect;
    if (s == "forward_fill") return AlignmentPolicy::forward_fill;
    throw ValidationError("unknown alignment policy: " + s);
}

std::string to_string(AlignmentPolicy p) {
    return p == AlignmentPolicy::intersect ? "intersect" : "forward_fill";
}

PricePanel load_panel(const std::filesystem::path& csv_path, AlignmentPolicy policy,
                      std::string label) {
    const csv::Table table = csv::read_table(csv_path);
    if (table.header.empty() || table.header[0] != "date")
        throw ValidationError("panel CSV must have a 'date' first column: " + csv_path.string());
    const std::size_t n_assets = table.header.size() - 1;
    if (n_assets == 0) throw ValidationError("panel CSV has no asset columns: " + csv_path.string());
    if (table.rows.empty()) throw ValidationError("panel CSV has no data rows: " + csv_path.string());

    struct RawRow {
        Date date;
        std::vector<double> cells;       // NaN marks missing
        std::size_t line;
    };
    std::vector<RawRow> raw;
    raw.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.row_lines[r];
        if (row.size() != table.header.size())
            throw ValidationError(csv_path.string() + " line " + std::to_string(line) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, got " +
                                  std::to_string(row.size()));
        const auto date = Date::parse(row[0]);
        if (!date)
            throw ValidationError(csv_path.string() + " line " + std::to_string(line) +
                                  ": bad ISO-8601 date '" + row[0] + "'");
        RawRow out{*date, {}, line};
        out.cells.resize(n_assets, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t j = 0; j < n_assets; ++j) {
            const std::string& field = row[j + 1];
            if (field.empty()) continue;  // missing cell
            double v = 0;
            if (!csv::parse_double(field, v))
                throw ValidationError(csv_path.string() + " line " + std::to_string(line) +
                                      ": bad number '" + field + "'");
            out.cells[j] = v;
        }
        raw.push_back(std::move(out));
    }

    std::stable_sort(raw.begin(), raw.end(),
                     [](const RawRow& a, const RawRow& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < raw.size(); ++i) {
        if (raw[i].date == raw[i - 1].date)
            throw ValidationError(csv_path.string() + ": duplicate date " + raw[i].date.to_string());
    }

    PricePanel panel;
    panel.asset_ids.assign(table.header.begin() + 1, table.header.end());
    panel.collection_label = label.empty() ? csv_path.stem().string() : std::move(label);

    if (policy == AlignmentPolicy::intersect) {
        for (auto& row : raw) {
            const bool complete = std::none_of(row.cells.begin(), row.cells.end(),
                                               [](double v) { return std::isnan(v); });
            if (complete) {
                panel.dates.push_back(row.date);
            } else {
                row.line = 0;  // mark dropped
            }
        }
        if (panel.dates.empty())
            throw ValidationError(csv_path.string() + ": no complete rows under intersect policy");
        panel.prices.resize(static_cast<Eigen::Index>(panel.dates.size()),
                            static_cast<Eigen::Index>(n_assets));
        Eigen::Index t = 0;
        for (const auto& row : raw) {
            if (row.line == 0) continue;
            for (std::size_t j = 0; j < n_assets; ++j)
                panel.prices(t, static_cast<Eigen::Index>(j)) = row.cells[j];
            ++t;
        }
    } else {
        panel.dates.reserve(raw.size());
        for (const auto& row : raw) panel.dates.push_back(row.date);
        panel.prices.resize(static_cast<Eigen::Index>(raw.size()),
                            static_cast<Eigen::Index>(n_assets));
        std::vector<double> last(n_assets, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t t = 0; t < raw.size(); ++t) {
            for (std::size_t j = 0; j < n_assets; ++j) {
                double v = raw[t].cells[j];
                if (std::isnan(v)) {
                    if (std::isnan(last[j]))
                        throw ValidationError(csv_path.string() + ": asset " + panel.asset_ids[j] +
                                              " is missing on " + raw[t].date.to_string() +
                                              " with no prior value to forward-fill");
                    v = last[j];
                }
                last[j] = v;
                panel.prices(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = v;
            }
        }
    }

    panel.validate();
    return panel;
}

void write_panel_csv(const PricePanel& panel, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open file for writing: " + path.string());
    out << "date";
    for (const auto& id : panel.asset_ids) {
        csv::require_writable_id(id);
        out << ',' << id;
    }
    out << '\n';
    for (Eigen::Index t = 0; t < panel.prices.rows(); ++t) {
        out << panel.dates[static_cast<std::size_t>(t)].to_string();
        for (Eigen::Index j = 0; j < panel.prices.cols(); ++j)
            out << ',' << csv::format_double(panel.prices(t, j));
        out << '\n';
    }
}

std::pair<PricePanel, PricePanel> align_panels(const PricePanel& a, const PricePanel& b) {
    a.validate();
    b.validate();
    std::vector<Date> common;
    std::set_intersection(a.dates.begin(), a.dates.end(), b.dates.begin(), b.dates.end(),
                          std::back_inserter(common));
    if (common.empty())
        throw ValidationError("panels '" + a.collection_label + "' and '" + b.collection_label +
                              "' share no dates");

    auto restrict = [&](const PricePanel& p) {
        PricePanel out;
        out.asset_ids = p.asset_ids;
        out.collection_label = p.collection_label;
        out.dates = common;
        out.prices.resize(static_cast<Eigen::Index>(common.size()), p.prices.cols());
        std::size_t src = 0;
        for (std::size_t i = 0; i < common.size(); ++i) {
            while (p.dates[src] < common[i]) ++src;
            out.prices.row(static_cast<Eigen::Index>(i)) = p.prices.row(static_cast<Eigen::Index>(src));
        }
        return out;
    };
    return {restrict(a), restrict(b)};
}

PeriodPartition make_partition(const PricePanel& panel,
                               const std::vector<PartitionBoundary>& boundaries) {
    panel.validate();
    if (boundaries.empty()) throw ValidationError("partition has no segments");

    PeriodPartition partition;
    for (const auto& b : boundaries) {
        if (b.label.empty()) throw ValidationError("partition segment with empty label");
        if (b.end < b.start)
            throw ValidationError("partition segment '" + b.label + "': end date " +
                                  b.end.to_string() + " before start date " + b.start.to_string());
        // first panel date >= start, last panel date <= end
        const auto lo = std::lower_bound(panel.dates.begin(), panel.dates.end(), b.start);
        const auto hi = std::upper_bound(panel.dates.begin(), panel.dates.end(), b.end);
        if (lo >= hi)
            throw ValidationError("partition segment '" + b.label +
                                  "' contains no panel dates");
        PeriodSegment seg;
        seg.label = b.label;
        seg.first = static_cast<std::int64_t>(lo - panel.dates.begin()) + 1;
        seg.last = static_cast<std::int64_t>(hi - panel.dates.begin());
        partition.segments.push_back(std::move(seg));
    }

    for (std::size_t i = 0; i < partition.segments.size(); ++i) {
        for (std::size_t j = i + 1; j < partition.segments.size(); ++j) {
            const auto& x = partition.segments[i];
            const auto& y = partition.segments[j];
            if (x.label == y.label)
                throw ValidationError("partition has duplicate label '" + x.label + "'");
            if (x.first <= y.last && y.first <= x.last)
                throw ValidationError("partition segments '" + x.label + "' and '" + y.label +
                                      "' overlap");
        }
    }
    return partition;
}

std::vector<PartitionBoundary> load_partition_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open partition config: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("partition config parse error: " + std::string(e.what()));
    }
    if (!doc.is_array()) throw ValidationError("partition config must be a JSON array");
    std::vector<PartitionBoundary> out;
    for (const auto& item : doc) {
        PartitionBoundary b;
        if (!item.contains("label") || !item.contains("start") || !item.contains("end"))
            throw ValidationError("partition segment needs label/start/end");
        b.label = item.at("label").get<std::string>();
        const auto start = Date::parse(item.at("start").get<std::string>());
        const auto end = Date::parse(item.at("end").get<std::string>());
        if (!start || !end)
            throw ValidationError("partition segment '" + b.label + "': bad ISO-8601 date");
        b.start = *start;
        b.end = *end;
        out.push_back(std::move(b));
    }
    return out;
}

PricePanel synth_one_factor(std::int64_t n_assets, std::int64_t n_dates, double beta,
                            double sigma_idio, std::uint64_t seed, std::string label) {
    if (n_assets < 2) throw ValidationError("synth_one_factor needs at least 2 assets");
    if (n_dates < 2) throw ValidationError("synth_one_factor needs at least 2 dates");
    if (!(beta >= 0.0 && beta < 1.0))
        throw ValidationError("synth_one_factor: beta must lie in [0, 1)");
    if (!(sigma_idio > 0.0)) throw ValidationError("synth_one_factor: sigma_idio must be positive");

    const std::int64_t n_returns = n_dates - 1;
    Rng factor_rng(mix_seed(seed, "synth.factor"));
    std::vector<double> factor(static_cast<std::size_t>(n_returns));
    for (auto& f : factor) f = factor_rng.gaussian();

    PricePanel panel;
    panel.collection_label = std::move(label);
    panel.dates.reserve(static_cast<std::size_t>(n_dates));
    const Date epoch = Date::from_ymd(2018, 1, 1);
    for (std::int64_t t = 0; t < n_dates; ++t) panel.dates.push_back(epoch + static_cast<std::int32_t>(t));

    panel.asset_ids.reserve(static_cast<std::size_t>(n_assets));
    for (std::int64_t i = 0; i < n_assets; ++i) {
        std::string id = std::to_string(i);
        if (id.size() < 3) id.insert(0, 3 - id.size(), '0');
        panel.asset_ids.push_back("A" + id);
    }

    panel.prices.resize(static_cast<Eigen::Index>(n_dates), static_cast<Eigen::Index>(n_assets));
    const double idio_loading = std::sqrt(1.0 - beta * beta);
    for (std::int64_t i = 0; i < n_assets; ++i) {
        Rng rng(mix_seed(seed, "synth.idio", static_cast<std::uint64_t>(i)));
        double log_price = std::log(100.0);
        panel.prices(0, static_cast<Eigen::Index>(i)) = 100.0;
        for (std::int64_t t = 0; t < n_returns; ++t) {
            const double ret =
                sigma_idio * (beta * factor[static_cast<std::size_t>(t)] + idio_loading * rng.gaussian());
            log_price += ret;
            panel.prices(static_cast<Eigen::Index>(t + 1), static_cast<Eigen::Index>(i)) =
                std::exp(log_price);
        }
    }

    panel.validate();
    return panel;
}

}  // namespace marketdyn::ingest
