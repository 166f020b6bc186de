#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace marketdyn {

/// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
struct Date {
    std::int32_t serial = 0;

    static Date from_ymd(int year, int month, int day);
    /// Parses strict ISO-8601 "YYYY-MM-DD". Returns nullopt on any deviation.
    static std::optional<Date> parse(std::string_view iso);

    std::string to_string() const;  // "YYYY-MM-DD"

    Date operator+(std::int32_t days) const { return Date{serial + days}; }
    auto operator<=>(const Date&) const = default;
};

}  // namespace marketdyn
