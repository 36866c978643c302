#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cubeloc {

// splitmix64: used to whiten (seed, stream) pairs into independent engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic per-path engine: the law of path k depends only on (seed, k),
// never on thread layout or evaluation order.
inline std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path_index) {
    std::uint64_t s = splitmix64(seed ^ splitmix64(path_index + 0x51ed2701a9e5c33bull));
    return std::mt19937_64(s);
}

inline double uniform01(std::mt19937_64& eng) {
    // 53-bit mantissa, in [0,1)
    return double(eng() >> 11) * 0x1.0p-53;
}

// Ziggurat normal sampler (128 strips).  The rectangle table is built once from
// the classic constants; the wedge and tail fall back to exact rejection, so
// the output law is exactly N(0,1) up to the 32-bit grid of the fast path.
class ZigguratNormal {
  public:
    ZigguratNormal() {
        const double m1 = 2147483648.0;
        double dn = 3.442619855899, tn = dn;
        const double vn = 9.91256303526217e-3;
        double q = vn / std::exp(-0.5 * dn * dn);
        kn_[0] = static_cast<std::uint32_t>((dn / q) * m1);
        kn_[1] = 0;
        wn_[0] = q / m1;
        wn_[127] = dn / m1;
        fn_[0] = 1.0;
        fn_[127] = std::exp(-0.5 * dn * dn);
        for (int i = 126; i >= 1; i--) {
            dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
            kn_[i + 1] = static_cast<std::uint32_t>((dn / tn) * m1);
            tn = dn;
            fn_[i] = std::exp(-0.5 * dn * dn);
            wn_[i] = dn / m1;
        }
    }

    double operator()(std::mt19937_64& eng) const {
        for (;;) {
            std::int32_t hz = static_cast<std::int32_t>(eng() >> 32);
            std::uint32_t iz = static_cast<std::uint32_t>(hz) & 127u;
            std::uint32_t ahz = hz < 0 ? static_cast<std::uint32_t>(-(std::int64_t)hz)
                                       : static_cast<std::uint32_t>(hz);
            if (ahz < kn_[iz]) return hz * wn_[iz];

            constexpr double r = 3.442619855899;
            if (iz == 0) {
                double x, y;
                do {
                    x = -std::log(uniform01_pos(eng)) / r;
                    y = -std::log(uniform01_pos(eng));
                } while (y + y < x * x);
                return hz > 0 ? r + x : -(r + x);
            }
            double x = hz * wn_[iz];
            if (fn_[iz] + uniform01_pos(eng) * (fn_[iz - 1] - fn_[iz]) <
                std::exp(-0.5 * x * x))
                return x;
        }
    }

  private:
    static double uniform01_pos(std::mt19937_64& eng) {
        return (double(eng() >> 11) + 0.5) * 0x1.0p-53;
    }
    std::uint32_t kn_[128];
    double wn_[128];
    double fn_[128];
};

inline const ZigguratNormal& ziggurat() {
    static const ZigguratNormal z;
    return z;
}

inline double standard_normal(std::mt19937_64& eng) { return ziggurat()(eng); }

// Uniform point on the unit sphere in R^n.
inline std::vector<double> random_unit_vector(std::mt19937_64& eng, int n) {
    std::vector<double> v(n);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (int i = 0; i < n; i++) {
            v[i] = standard_normal(eng);
            norm2 += v[i] * v[i];
        }
    } while (norm2 < 1e-12);
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    return v;
}

}  // namespace cubeloc
