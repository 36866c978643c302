#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cubeloc {

inline constexpr const char* kVersion = "0.1.0";

// Dense enumeration over {-1,1}^n keeps every operation exact but costs 2^n.
// The default cap keeps casual misuse from allocating gigabytes; the hard cap
// is where 2^n doubles stop fitting comfortably in memory at all.
inline constexpr int kDefaultDimCap = 20;
inline constexpr int kHardDimCap = 24;

struct SpecError : std::runtime_error {
    explicit SpecError(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw SpecError(msg);
}

inline void check_dimension(int n, int cap = kDefaultDimCap) {
    if (n < 1) throw SpecError("dimension must be >= 1, got " + std::to_string(n));
    if (cap > kHardDimCap) cap = kHardDimCap;
    if (n > cap)
        throw SpecError("dimension " + std::to_string(n) + " exceeds cap " +
                        std::to_string(cap) + " (hard cap " + std::to_string(kHardDimCap) + ")");
}

}  // namespace cubeloc
