#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "steinlab/mc.hpp"

namespace steinlab {

inline constexpr const char* kVersion = "0.1.0";

struct EstimateEntry {
    std::string name;
    McEstimate estimate;
};

struct BoundEntry {
    std::string name;
    double value = 0.0;
};

struct CheckEntry {
    std::string name;
    bool pass = false;
    std::string detail;
    std::string tolerance;  ///< human-readable tolerance the check was run with
};

/// Self-contained result of one CLI command.
struct RunReport {
    std::string command;
    nlohmann::json parameters = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::vector<EstimateEntry> estimates;
    std::vector<BoundEntry> bounds;
    std::vector<CheckEntry> checks;
    std::vector<std::string> warnings;

    void add_estimate(std::string name, const McEstimate& e) { estimates.push_back({std::move(name), e}); }
    void add_bound(std::string name, double v) { bounds.push_back({std::move(name), v}); }
    void add_check(std::string name, bool pass, std::string detail, std::string tol) {
        checks.push_back({std::move(name), pass, std::move(detail), std::move(tol)});
    }

    bool all_pass() const;
    nlohmann::json to_json() const;
    /// Sorted keys, no whitespace, every float printed with 17 significant digits.
    std::string to_canonical_json() const;
    /// Flat estimates table: name,value,stderr,ci_lo,ci_hi,count.
    std::string to_csv() const;
};

/// Canonical serialisation of any JSON value (sorted keys, %.17g floats, non-finite as null).
std::string canonical_dump(const nlohmann::json& j);

/// %.17g formatting.
std::string format_double(double x);

} // namespace steinlab
