#pragma once

#include <cstdint>
#include <iomanip>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cubeloc/common.hpp"

namespace cubeloc {

// One checked claim.  "le" asserts lhs <= rhs + tolerance, "close" asserts
// |lhs - rhs| <= tolerance.
struct Assertion {
    std::string claim;
    std::string op = "le";
    double lhs = 0.0;
    double rhs = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct AuditReport {
    std::string name;
    std::string measure_desc;
    nlohmann::json params = nlohmann::json::object();
    std::vector<Assertion> assertions;
    std::map<std::string, double> diagnostics;

    void check_le(const std::string& claim, double lhs, double rhs, double tol = 0.0) {
        assertions.push_back({claim, "le", lhs, rhs, tol, lhs <= rhs + tol});
    }
    void check_close(const std::string& claim, double lhs, double rhs, double tol) {
        assertions.push_back({claim, "close", lhs, rhs, tol, std::abs(lhs - rhs) <= tol});
    }

    bool passed() const {
        for (const Assertion& a : assertions)
            if (!a.pass) return false;
        return true;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["name"] = name;
        j["measure"] = measure_desc;
        j["params"] = params;
        j["assertions"] = nlohmann::json::array();
        for (const Assertion& a : assertions) {
            nlohmann::json ja;
            ja["claim"] = a.claim;
            ja["op"] = a.op;
            ja["lhs"] = a.lhs;
            ja["rhs"] = a.rhs;
            ja["tolerance"] = a.tolerance;
            ja["pass"] = a.pass;
            j["assertions"].push_back(ja);
        }
        j["diagnostics"] = diagnostics;
        j["pass"] = passed();
        return j;
    }

    void print_table(std::ostream& os) const {
        os << "audit: " << name << "   measure: " << measure_desc << "\n";
        for (const Assertion& a : assertions) {
            os << "  [" << (a.pass ? "PASS" : "FAIL") << "] " << a.claim << ": lhs="
               << std::setprecision(10) << a.lhs << (a.op == "le" ? " <= " : " ~= ") << a.rhs
               << " (tol " << a.tolerance << ")\n";
        }
        for (const auto& [k, v] : diagnostics)
            os << "  diag " << k << " = " << std::setprecision(10) << v << "\n";
        os << "  result: " << (passed() ? "PASS" : "FAIL") << "\n";
    }
};

// Everything needed to reproduce a run.  Embedded in every output artifact;
// wall-clock is informational and excluded from the canonical form.
struct RunManifest {
    std::string command;
    nlohmann::json measure_spec = nlohmann::json::object();
    std::uint64_t seed = 0;
    nlohmann::json parameters = nlohmann::json::object();
    std::string tool_version = kVersion;
    double wall_clock_seconds = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["command"] = command;
        j["measure_spec"] = measure_spec;
        j["seed"] = seed;
        j["parameters"] = parameters;
        j["tool_version"] = tool_version;
        j["wall_clock_seconds"] = wall_clock_seconds;
        return j;
    }
};

inline nlohmann::json report_with_manifest(const AuditReport& report, const RunManifest& manifest) {
    nlohmann::json j = report.to_json();
    j["manifest"] = manifest.to_json();
    return j;
}

// Canonical serialization: deterministic bytes for a deterministic run.
// nlohmann::json already keeps keys sorted; dropping the wall clock removes
// the only field that varies between identical runs.
inline std::string canonical_json(nlohmann::json j) {
    if (j.contains("manifest") && j["manifest"].is_object())
        j["manifest"].erase("wall_clock_seconds");
    return j.dump(2);
}

}  // namespace cubeloc
