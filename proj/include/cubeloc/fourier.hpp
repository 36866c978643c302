#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cubeloc/common.hpp"
#include "cubeloc/log_laplace.hpp"
#include "cubeloc/measure.hpp"
#include "cubeloc/rng.hpp"

namespace cubeloc {

// Coefficients of f(x) = sum_A c_A prod_{i in A} x_i, indexed by the subset
// bitmask A.  The convention matches the point encoding: bit i of A set means
// coordinate i participates in the monomial.
struct FourierTable {
    int n = 1;
    std::vector<double> c;

    double coefficient(std::uint32_t subset) const { return c[subset]; }
};

// Forward transform: c_A = 2^{-n} sum_x f(x) prod_{i in A} x_i.
// Butterfly per bit, O(n 2^n); the pairing (lo = x_i = -1, hi = x_i = +1)
// sends (lo, hi) -> (lo + hi, hi - lo).
inline FourierTable walsh_fourier(int n, const std::vector<double>& values) {
    check_dimension(n, kHardDimCap);
    const std::uint32_t size = std::uint32_t(1) << n;
    require(values.size() == size, "walsh_fourier: table must have 2^n entries");
    FourierTable t;
    t.n = n;
    t.c = values;
    for (int i = 0; i < n; i++) {
        const std::uint32_t bit = 1u << i;
        for (std::uint32_t x = 0; x < size; x++) {
            if (x & bit) continue;
            const double lo = t.c[x], hi = t.c[x | bit];
            t.c[x] = lo + hi;
            t.c[x | bit] = hi - lo;
        }
    }
    const double scale = 1.0 / double(size);
    for (double& v : t.c) v *= scale;
    return t;
}

inline std::vector<double> inverse_walsh_fourier(const FourierTable& t) {
    const std::uint32_t size = std::uint32_t(1) << t.n;
    require(t.c.size() == size, "inverse_walsh_fourier: table must have 2^n entries");
    std::vector<double> values = t.c;
    for (int i = 0; i < t.n; i++) {
        const std::uint32_t bit = 1u << i;
        for (std::uint32_t x = 0; x < size; x++) {
            if (x & bit) continue;
            const double lo = values[x], hi = values[x | bit];
            values[x] = lo - hi;
            values[x | bit] = lo + hi;
        }
    }
    return values;
}

// Multilinear (harmonic) extension: evaluate sum_A c_A prod_{i in A} z_i at an
// arbitrary z in R^n by folding one coordinate at a time, O(2^n).
inline double multilinear_eval(const FourierTable& t, const Eigen::VectorXd& z) {
    require(z.size() == t.n, "multilinear_eval: point has wrong dimension");
    std::vector<double> buf = t.c;
    std::uint32_t m = std::uint32_t(1) << t.n;
    for (int i = 0; i < t.n; i++) {
        m >>= 1;
        for (std::uint32_t k = 0; k < m; k++) buf[k] = buf[2 * k] + z[i] * buf[2 * k + 1];
    }
    return buf[0];
}

// Coefficient table of the partial derivative in coordinate i: monomials not
// containing i vanish, the rest lose the factor z_i.
inline FourierTable fourier_partial(const FourierTable& t, int i) {
    require(i >= 0 && i < t.n, "fourier_partial: coordinate out of range");
    const std::uint32_t size = std::uint32_t(1) << t.n;
    const std::uint32_t bit = 1u << i;
    FourierTable d;
    d.n = t.n;
    d.c.assign(size, 0.0);
    for (std::uint32_t a = 0; a < size; a++)
        if (!(a & bit)) d.c[a] = t.c[a | bit];
    return d;
}

inline Eigen::VectorXd multilinear_gradient(const FourierTable& t, const Eigen::VectorXd& z) {
    Eigen::VectorXd g(t.n);
    for (int i = 0; i < t.n; i++) g[i] = multilinear_eval(fourier_partial(t, i), z);
    return g;
}

// Hessian of the multilinear extension; the diagonal is identically zero.
inline Eigen::MatrixXd multilinear_hessian(const FourierTable& t, const Eigen::VectorXd& z) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(t.n, t.n);
    for (int i = 0; i < t.n; i++) {
        const FourierTable di = fourier_partial(t, i);
        for (int j = i + 1; j < t.n; j++) {
            h(i, j) = multilinear_eval(fourier_partial(di, j), z);
            h(j, i) = h(i, j);
        }
    }
    return h;
}

// Multilinear extension of the density against the uniform measure: at a
// vertex x it equals 2^n * weight(x), and rho(z) = E[prod_i (1 + z_i y_i)].
// Strictly positive on the open cube for every probability measure.
inline FourierTable density_extension_table(const Measure& nu) {
    FourierTable t = walsh_fourier(nu.n(), nu.weights());
    for (double& v : t.c) v *= double(std::uint32_t(1) << nu.n());
    return t;
}

inline double density_extension(const Measure& nu, const Eigen::VectorXd& z) {
    return multilinear_eval(density_extension_table(nu), z);
}

inline Eigen::VectorXd log_density_gradient(const FourierTable& rho_table,
                                            const Eigen::VectorXd& z) {
    const double rho = multilinear_eval(rho_table, z);
    if (!(rho > 0.0)) throw DomainError("log_density_gradient: density extension <= 0");
    return multilinear_gradient(rho_table, z) / rho;
}

// Hessian of log rho at an interior point.
inline Eigen::MatrixXd log_density_hessian(const FourierTable& rho_table,
                                           const Eigen::VectorXd& z) {
    const double rho = multilinear_eval(rho_table, z);
    if (!(rho > 0.0)) throw DomainError("log_density_hessian: density extension <= 0");
    const Eigen::VectorXd g = multilinear_gradient(rho_table, z);
    Eigen::MatrixXd h = multilinear_hessian(rho_table, z) / rho;
    h -= (g / rho) * (g / rho).transpose();
    return h;
}

inline Eigen::MatrixXd log_density_hessian(const Measure& nu, const Eigen::VectorXd& z) {
    return log_density_hessian(density_extension_table(nu), z);
}

// The cumulant transform factors through the density extension:
//   log rho(tanh w) = L(w) - sum_i log cosh(w_i).
// Returns the absolute residual of that identity, plus the raw ingredients.
struct GIdentityResult {
    double residual = 0.0;
    double rho = 0.0;
    double log_rho = 0.0;
    double log_laplace_route = 0.0;
    bool rho_positive = false;
};

inline GIdentityResult g_identity_check(const Measure& nu, const Eigen::VectorXd& w) {
    require(w.size() == nu.n(), "g_identity_check: tilt has wrong dimension");
    GIdentityResult r;
    Eigen::VectorXd z(nu.n());
    double logcosh_sum = 0.0;
    for (int i = 0; i < nu.n(); i++) {
        z[i] = std::tanh(w[i]);
        // log cosh without overflow for large |w|
        const double a = std::abs(w[i]);
        logcosh_sum += a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
    }
    r.rho = density_extension(nu, z);
    r.rho_positive = r.rho > 0.0;
    if (!r.rho_positive) return r;
    r.log_rho = std::log(r.rho);
    r.log_laplace_route = log_partition(nu, w) - logcosh_sum;
    r.residual = std::abs(r.log_rho - r.log_laplace_route);
    return r;
}

// ---------------------------------------------------------------------------
// Grid comparison of the two curvature notions: the sup over interior points
// of lambda_max(Hess log rho) versus the certified cumulant curvature bound.
// The certified value can exceed the grid sup by at most the additive
// constant 3 carried by the tanh change of variables.

struct HarmonicComparisonConfig {
    int grid_per_axis = 7;     // full tensor grid for n <= 4
    int sample_points = 200;   // random interior points for larger n
    double radius = 2.5;       // grid lives on tanh([-radius, radius]^n)
    std::uint64_t seed = 1;
    SearchConfig search;
};

struct HarmonicComparisonReport {
    double beta_grid = 0.0;
    double beta_cert = 0.0;
    double slack = 3.0;
    bool pass = false;
    bool gradient_bounds_ok = true;
    Eigen::VectorXd witness;
    std::vector<int> positive_eigen_counts;  // per grid point
    int points_checked = 0;
};

inline HarmonicComparisonReport fact_harmonic_audit(const Measure& nu,
                                                    const HarmonicComparisonConfig& cfg = {}) {
    const int n = nu.n();
    const FourierTable rho = density_extension_table(nu);

    std::vector<Eigen::VectorXd> zs;
    if (n <= 4) {
        const int g = std::max(2, cfg.grid_per_axis);
        std::vector<double> axis(g);
        for (int k = 0; k < g; k++)
            axis[k] = std::tanh(-cfg.radius + 2.0 * cfg.radius * k / (g - 1));
        std::uint64_t total = 1;
        for (int i = 0; i < n; i++) total *= g;
        for (std::uint64_t p = 0; p < total; p++) {
            Eigen::VectorXd z(n);
            std::uint64_t q = p;
            for (int i = 0; i < n; i++) {
                z[i] = axis[q % g];
                q /= g;
            }
            zs.push_back(z);
        }
    } else {
        std::mt19937_64 eng = path_engine(cfg.seed, 0xfacade);
        for (int p = 0; p < cfg.sample_points; p++) {
            Eigen::VectorXd z(n);
            for (int i = 0; i < n; i++)
                z[i] = std::tanh(cfg.radius * (2.0 * uniform01(eng) - 1.0));
            zs.push_back(z);
        }
    }

    CertificationReport cert = certify(nu, Condition::SemiLogConcave, cfg.search);
    // Always check the certified witness's image; this pins the comparison to
    // the same point the search found, so the bound cannot fail merely because
    // the grid looked elsewhere.
    zs.push_back(cert.witness.array().tanh());

    HarmonicComparisonReport rep;
    rep.beta_cert = cert.certified_value;
    rep.witness = cert.witness;
    rep.beta_grid = -std::numeric_limits<double>::infinity();
    for (const Eigen::VectorXd& z : zs) {
        const Eigen::MatrixXd h = log_density_hessian(rho, z);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
        rep.beta_grid = std::max(rep.beta_grid, es.eigenvalues().maxCoeff());
        int pos = 0;
        for (int i = 0; i < n; i++)
            if (es.eigenvalues()[i] > 1e-12) pos++;
        rep.positive_eigen_counts.push_back(pos);

        const Eigen::VectorXd g = log_density_gradient(rho, z);
        for (int i = 0; i < n; i++) {
            const double lo = 1.0 / (z[i] - 1.0), hi = 1.0 / (z[i] + 1.0);
            if (g[i] < lo - 1e-9 || g[i] > hi + 1e-9) rep.gradient_bounds_ok = false;
        }
    }
    rep.points_checked = static_cast<int>(zs.size());
    rep.pass = rep.beta_cert <= rep.beta_grid + rep.slack + 1e-9;
    return rep;
}

}  // namespace cubeloc
