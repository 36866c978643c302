#pragma once

#include <Eigen/Core>
#include <bit>
#include <cstdint>

#include "cubeloc/common.hpp"

namespace cubeloc {

// Points of {-1,1}^n are encoded as n-bit indices: bit i set <=> x_i = +1.
// All dense tables (weights, test functions, Fourier coefficients) are indexed
// this way.
struct HypercubePoint {
    std::uint32_t index = 0;
    int n = 1;

    int sign(int i) const { return (index >> i) & 1u ? 1 : -1; }

    Eigen::VectorXd coords() const {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; i++) x[i] = sign(i);
        return x;
    }
};

inline int sign_bit(std::uint32_t index, int i) { return (index >> i) & 1u ? 1 : -1; }

inline Eigen::VectorXd decode_point(std::uint32_t index, int n) {
    return HypercubePoint{index, n}.coords();
}

inline std::uint32_t encode_point(const Eigen::VectorXd& x) {
    check_dimension(static_cast<int>(x.size()), kHardDimCap);
    std::uint32_t idx = 0;
    for (int i = 0; i < x.size(); i++) {
        if (x[i] != 1.0 && x[i] != -1.0)
            throw DomainError("encode_point: coordinates must be exactly +-1");
        if (x[i] > 0) idx |= (1u << i);
    }
    return idx;
}

inline int hamming_distance(std::uint32_t a, std::uint32_t b) {
    return std::popcount(a ^ b);
}

// The cube carries the l1 metric; adjacent points (one flipped coordinate)
// are at distance 2.
inline double l1_distance(std::uint32_t a, std::uint32_t b) {
    return 2.0 * hamming_distance(a, b);
}

}  // namespace cubeloc
