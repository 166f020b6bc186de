#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace marketdyn {

/// Bad input data, file contents, or configuration. CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Data-dependent failure discovered mid-computation (degenerate window, etc.).
/// CLI maps this to exit code 2.
class ComputationError : public std::runtime_error {
public:
    explicit ComputationError(const std::string& what) : std::runtime_error(what) {}
};

/// Inclusive 1-based index range. All user-facing indices in this library are
/// 1-based (panel rows 1..T, return rows 1..T-1); conversion to 0-based storage
/// happens at the implementation boundary.
struct IndexRange {
    std::int64_t first = 0;
    std::int64_t last = 0;

    std::int64_t count() const { return last >= first ? last - first + 1 : 0; }
    bool contains(std::int64_t i) const { return i >= first && i <= last; }
};

}  // namespace marketdyn
