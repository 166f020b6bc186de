#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "marketdyn/ingest.hpp"
#include "marketdyn/spectra.hpp"

using namespace marketdyn;
namespace fs = std::filesystem;

namespace {

fs::path temp_csv(const std::string& name, const std::string& content) {
    const fs::path path = fs::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("load_panel reads a gap-free 3-row CSV identically under both policies") {
    const auto path = temp_csv("ingest_plain.csv",
                               "date,AAA,BBB\n"
                               "2020-01-01,10,20\n"
                               "2020-01-02,11,21\n"
                               "2020-01-03,12,22\n");
    const auto ff = ingest::load_panel(path, ingest::AlignmentPolicy::forward_fill);
    const auto is = ingest::load_panel(path, ingest::AlignmentPolicy::intersect);
    CHECK(ff.n_dates() == 3);
    CHECK(is.n_dates() == 3);
    CHECK(ff.prices == is.prices);
    CHECK(ff.asset_ids == std::vector<std::string>{"AAA", "BBB"});
    CHECK(ff.dates[0].to_string() == "2020-01-01");
}

TEST_CASE("load_panel resolves a missing cell per policy") {
    const auto path = temp_csv("ingest_gap.csv",
                               "date,A,B\n"
                               "2020-01-01,10,20\n"
                               "2020-01-02,11,\n"
                               "2020-01-03,12,22\n");
    const auto ff = ingest::load_panel(path, ingest::AlignmentPolicy::forward_fill);
    CHECK(ff.n_dates() == 3);
    CHECK(ff.prices(1, 1) == 20.0);  // forward-filled from row 1

    const auto is = ingest::load_panel(path, ingest::AlignmentPolicy::intersect);
    CHECK(is.n_dates() == 2);
    CHECK(is.dates[0].to_string() == "2020-01-01");
    CHECK(is.dates[1].to_string() == "2020-01-03");
}

TEST_CASE("load_panel rejects a leading missing value under forward_fill") {
    const auto path = temp_csv("ingest_lead.csv",
                               "date,A,B\n"
                               "2020-01-01,10,\n"
                               "2020-01-02,11,21\n");
    CHECK_THROWS_WITH_AS(ingest::load_panel(path, ingest::AlignmentPolicy::forward_fill),
                         doctest::Contains("B"), ValidationError);
}

TEST_CASE("load_panel names asset and date for non-positive prices") {
    const auto path = temp_csv("ingest_negative.csv",
                               "date,A,B\n"
                               "2020-01-01,10,20\n"
                               "2020-01-02,-1,21\n");
    try {
        ingest::load_panel(path, ingest::AlignmentPolicy::forward_fill);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        CHECK(what.find("A") != std::string::npos);
        CHECK(what.find("2020-01-02") != std::string::npos);
    }
}

TEST_CASE("load_panel reports the line number for malformed rows") {
    const auto path = temp_csv("ingest_malformed.csv",
                               "date,A\n"
                               "2020-01-01,10\n"
                               "2020-01-02,ten\n");
    CHECK_THROWS_WITH_AS(ingest::load_panel(path, ingest::AlignmentPolicy::intersect),
                         doctest::Contains("line 3"), ValidationError);
    const auto short_row = temp_csv("ingest_short.csv",
                                    "date,A,B\n"
                                    "2020-01-01,10,20\n"
                                    "2020-01-02,10\n");
    CHECK_THROWS_WITH_AS(ingest::load_panel(short_row, ingest::AlignmentPolicy::intersect),
                         doctest::Contains("line 3"), ValidationError);
}

TEST_CASE("load_panel rejects duplicate dates and duplicate assets") {
    const auto dup_date = temp_csv("ingest_dupdate.csv",
                                   "date,A\n2020-01-01,1\n2020-01-01,2\n");
    CHECK_THROWS_AS(ingest::load_panel(dup_date, ingest::AlignmentPolicy::intersect),
                    ValidationError);
    const auto dup_asset = temp_csv("ingest_dupasset.csv",
                                    "date,A,A\n2020-01-01,1,2\n2020-01-02,2,3\n");
    CHECK_THROWS_AS(ingest::load_panel(dup_asset, ingest::AlignmentPolicy::intersect),
                    ValidationError);
}

TEST_CASE("load_panel handles header-only files and CRLF endings") {
    const auto header_only = temp_csv("ingest_header_only.csv", "date,A\n");
    CHECK_THROWS_AS(ingest::load_panel(header_only, ingest::AlignmentPolicy::intersect),
                    ValidationError);
    const auto crlf = temp_csv("ingest_crlf.csv",
                               "date,A\r\n2020-01-01,10\r\n2020-01-02,11\r\n");
    const auto panel = ingest::load_panel(crlf, ingest::AlignmentPolicy::intersect);
    CHECK(panel.n_dates() == 2);
    CHECK(panel.prices(1, 0) == 11.0);
}

TEST_CASE("load_panel sorts rows into ascending date order") {
    const auto path = temp_csv("ingest_unsorted.csv",
                               "date,A\n"
                               "2020-01-03,12\n"
                               "2020-01-01,10\n"
                               "2020-01-02,11\n");
    const auto panel = ingest::load_panel(path, ingest::AlignmentPolicy::intersect);
    CHECK(panel.prices(0, 0) == 10.0);
    CHECK(panel.prices(2, 0) == 12.0);
}

TEST_CASE("panel CSV round-trips bit-identically") {
    const auto panel = ingest::synth_one_factor(5, 40, 0.6, 0.02, 99, "rt");
    const fs::path path = fs::temp_directory_path() / "ingest_roundtrip.csv";
    ingest::write_panel_csv(panel, path);
    const auto loaded = ingest::load_panel(path, ingest::AlignmentPolicy::intersect, "rt");
    CHECK(loaded.asset_ids == panel.asset_ids);
    REQUIRE(loaded.n_dates() == panel.n_dates());
    for (Eigen::Index t = 0; t < panel.prices.rows(); ++t) {
        CHECK(loaded.dates[static_cast<std::size_t>(t)] == panel.dates[static_cast<std::size_t>(t)]);
        for (Eigen::Index j = 0; j < panel.prices.cols(); ++j)
            CHECK(loaded.prices(t, j) == panel.prices(t, j));
    }

    // write(load(write(x))) must equal write(x) byte for byte
    const fs::path path2 = fs::temp_directory_path() / "ingest_roundtrip2.csv";
    ingest::write_panel_csv(loaded, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}

TEST_CASE("align_panels intersects calendars") {
    auto a = ingest::synth_one_factor(3, 14, 0.5, 0.02, 1, "crypto");  // 7-day weeks
    auto b = a;
    b.collection_label = "equity";
    // Drop weekends from b: keep only indices whose date modulo 7 lands Mon-Fri.
    std::vector<std::int64_t> keep;
    for (std::int64_t t = 0; t < b.n_dates(); ++t)
        if (t % 7 < 5) keep.push_back(t);
    ingest::PricePanel b5 = b;
    b5.dates.clear();
    b5.prices.resize(static_cast<Eigen::Index>(keep.size()), b.prices.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        b5.dates.push_back(b.dates[static_cast<std::size_t>(keep[i])]);
        b5.prices.row(static_cast<Eigen::Index>(i)) =
            b.prices.row(static_cast<Eigen::Index>(keep[i]));
    }

    SUBCASE("identical calendars are unchanged") {
        const auto [ra, rb] = ingest::align_panels(a, b);
        CHECK(ra.dates == a.dates);
        CHECK(rb.dates == b.dates);
        CHECK(ra.prices == a.prices);
    }
    SUBCASE("7-day and 5-day calendars restrict to the 5-day dates") {
        const auto [ra, rb] = ingest::align_panels(a, b5);
        CHECK(ra.dates == b5.dates);
        CHECK(rb.dates == b5.dates);
        // idempotent
        const auto [ra2, rb2] = ingest::align_panels(ra, rb);
        CHECK(ra2.dates == ra.dates);
        CHECK(ra2.prices == ra.prices);
        // symmetric in the resulting date set
        const auto [sb, sa] = ingest::align_panels(b5, a);
        CHECK(sb.dates == ra.dates);
    }
    SUBCASE("disjoint ranges error") {
        ingest::PricePanel far = a;
        for (auto& d : far.dates) d = d + 100000;
        CHECK_THROWS_AS(ingest::align_panels(a, far), ValidationError);
    }
}

TEST_CASE("make_partition maps dates to inclusive index bounds") {
    const auto panel = ingest::synth_one_factor(2, 508, 0.3, 0.02, 5, "p");
    const Date d0 = panel.dates.front();

    SUBCASE("full range single segment") {
        const auto part = ingest::make_partition(panel, {{"ALL", d0, panel.dates.back()}});
        REQUIRE(part.segments.size() == 1);
        CHECK(part.segments[0].first == 1);
        CHECK(part.segments[0].last == 508);
    }
    SUBCASE("three segments spanning the rolling-window sums") {
        const auto part = ingest::make_partition(
            panel, {{"PRE", d0 + 59, d0 + 310},
                    {"PEAK", d0 + 311, d0 + 374},
                    {"POST", d0 + 375, d0 + 507}});
        REQUIRE(part.segments.size() == 3);
        CHECK(part.segments[0].first == 60);
        CHECK(part.segments[0].last == 311);
        CHECK(part.segments[1].first == 312);
        CHECK(part.segments[1].last == 375);
        CHECK(part.segments[2].first == 376);
        CHECK(part.segments[2].last == 508);
        CHECK(part.find("PEAK") != nullptr);
    }
    SUBCASE("boundary dates absent from the panel snap inside the interval") {
        ingest::PricePanel gappy = panel;
        // remove date index 60 (0-based) so a boundary there must snap to 61
        gappy.dates.erase(gappy.dates.begin() + 60);
        Eigen::MatrixXd prices(gappy.prices.rows() - 1, gappy.prices.cols());
        prices.topRows(60) = gappy.prices.topRows(60);
        prices.bottomRows(prices.rows() - 60) = gappy.prices.bottomRows(prices.rows() - 60);
        gappy.prices = prices;
        const auto part =
            ingest::make_partition(gappy, {{"S", d0 + 60, d0 + 100}});
        CHECK(gappy.dates[static_cast<std::size_t>(part.segments[0].first - 1)] == d0 + 61);
    }
    SUBCASE("reversed boundaries error") {
        CHECK_THROWS_AS(ingest::make_partition(panel, {{"X", d0 + 10, d0 + 5}}), ValidationError);
    }
    SUBCASE("interval containing no panel dates errors") {
        CHECK_THROWS_AS(ingest::make_partition(panel, {{"X", d0 + 100000, d0 + 100001}}),
                        ValidationError);
    }
    SUBCASE("overlapping segments error") {
        CHECK_THROWS_AS(ingest::make_partition(
                            panel, {{"A", d0, d0 + 10}, {"B", d0 + 10, d0 + 20}}),
                        ValidationError);
    }
    SUBCASE("duplicate labels error") {
        CHECK_THROWS_AS(ingest::make_partition(
                            panel, {{"A", d0, d0 + 10}, {"A", d0 + 11, d0 + 20}}),
                        ValidationError);
    }
}

TEST_CASE("synth_one_factor is deterministic and respects its parameter ranges") {
    const auto a = ingest::synth_one_factor(6, 50, 0.7, 0.02, 42, "s");
    const auto b = ingest::synth_one_factor(6, 50, 0.7, 0.02, 42, "s");
    CHECK(a.prices == b.prices);
    const auto c = ingest::synth_one_factor(6, 50, 0.7, 0.02, 43, "s");
    CHECK(a.prices != c.prices);

    CHECK_THROWS_AS(ingest::synth_one_factor(6, 50, 1.0, 0.02, 1), ValidationError);
    CHECK_THROWS_AS(ingest::synth_one_factor(6, 50, -0.1, 0.02, 1), ValidationError);
    CHECK_THROWS_AS(ingest::synth_one_factor(1, 50, 0.5, 0.02, 1), ValidationError);
}

TEST_CASE("synth_one_factor beta=0 gives vanishing sample correlations") {
    const auto panel = ingest::synth_one_factor(4, 4000, 0.0, 0.02, 11, "s");
    const auto rets = returns::log_returns(panel);
    const auto mats = spectra::rolling_correlation(rets, rets.n_rows());
    REQUIRE(mats.size() == 1);
    const auto& c = mats[0].values;
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = i + 1; j < c.cols(); ++j) CHECK(std::abs(c(i, j)) < 0.08);
}

TEST_CASE("synth_one_factor near beta=1 approaches a rank-one spectrum") {
    const auto panel = ingest::synth_one_factor(5, 1500, 0.99, 0.02, 13, "s");
    const auto rets = returns::log_returns(panel);
    const auto surface = spectra::explained_variance_surface(rets, rets.n_rows());
    CHECK(surface.ratios(0, 0) > 0.95);
}

TEST_CASE("independent columns over a long window give first ratio near 1/M") {
    const auto panel = ingest::synth_one_factor(4, 3000, 0.0, 0.02, 15, "s");
    const auto rets = returns::log_returns(panel);
    const auto surface = spectra::explained_variance_surface(rets, rets.n_rows());
    CHECK(std::abs(surface.ratios(0, 0) - 0.25) < 0.05);
}
