#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cubeloc/common.hpp"
#include "cubeloc/hypercube.hpp"
#include "cubeloc/measure.hpp"
#include "cubeloc/rng.hpp"

namespace cubeloc {

using TiltVector = Eigen::VectorXd;

inline double dot_with_point(const TiltVector& w, std::uint32_t x) {
    double s = 0.0;
    for (int i = 0; i < w.size(); i++) s += (x >> i) & 1u ? w[i] : -w[i];
    return s;
}

// Cumulant generating function L(w) = log sum_x nu(x) exp(<w,x>), via
// max-shifted summation so arbitrarily large tilts stay finite.
inline double log_partition(const Measure& nu, const TiltVector& w) {
    require(w.size() == nu.n(), "log_partition: tilt has wrong dimension");
    double m = -std::numeric_limits<double>::infinity();
    for (std::uint32_t x : nu.support())
        m = std::max(m, std::log(nu.weight(x)) + dot_with_point(w, x));
    double s = 0.0;
    for (std::uint32_t x : nu.support())
        s += std::exp(std::log(nu.weight(x)) + dot_with_point(w, x) - m);
    return m + std::log(s);
}

inline double partition(const Measure& nu, const TiltVector& w) {
    return std::exp(log_partition(nu, w));
}

// Exponential tilt: weights proportional to nu(x) exp(<w,x>).  Preserves the
// support; tilts compose additively.
inline Measure tilt(const Measure& nu, const TiltVector& w) {
    require(w.size() == nu.n(), "tilt: tilt vector has wrong dimension");
    double m = -std::numeric_limits<double>::infinity();
    for (std::uint32_t x : nu.support())
        m = std::max(m, std::log(nu.weight(x)) + dot_with_point(w, x));
    std::vector<double> tw(nu.size(), 0.0);
    for (std::uint32_t x : nu.support())
        tw[x] = std::exp(std::log(nu.weight(x)) + dot_with_point(w, x) - m);
    return Measure(nu.n(), std::move(tw), kHardDimCap);
}

// Tilted probabilities aligned with nu.support(), plus mean / covariance on
// demand.  This is the workhorse for gradients of the curvature criteria.
struct TiltedEnsemble {
    Eigen::VectorXd p;   // support-aligned probabilities
    Eigen::VectorXd a;   // mean of the tilted measure
    Eigen::MatrixXd cov; // empty unless requested
};

inline TiltedEnsemble tilted_ensemble(const Measure& nu, const TiltVector& w,
                                      bool need_cov = true) {
    require(w.size() == nu.n(), "tilted_ensemble: tilt has wrong dimension");
    const auto& supp = nu.support();
    const int s = static_cast<int>(supp.size());
    const int n = nu.n();
    TiltedEnsemble e;
    e.p.resize(s);
    double m = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < s; k++) {
        e.p[k] = std::log(nu.weight(supp[k])) + dot_with_point(w, supp[k]);
        m = std::max(m, e.p[k]);
    }
    double z = 0.0;
    for (int k = 0; k < s; k++) {
        e.p[k] = std::exp(e.p[k] - m);
        z += e.p[k];
    }
    e.p /= z;
    e.a = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < s; k++)
        for (int i = 0; i < n; i++) e.a[i] += e.p[k] * sign_bit(supp[k], i);
    if (need_cov) {
        e.cov = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd d(n);
        for (int k = 0; k < s; k++) {
            for (int i = 0; i < n; i++) d[i] = sign_bit(supp[k], i) - e.a[i];
            e.cov.selfadjointView<Eigen::Lower>().rankUpdate(d, e.p[k]);
        }
        e.cov = e.cov.selfadjointView<Eigen::Lower>();
    }
    return e;
}

// gradient of L = tilted mean
inline Eigen::VectorXd tilt_mean(const Measure& nu, const TiltVector& w) {
    return tilted_ensemble(nu, w, false).a;
}

// Hessian of L = tilted covariance.  Diagonal entries are 1 - a_i^2 exactly.
inline Eigen::MatrixXd tilt_cov(const Measure& nu, const TiltVector& w) {
    return tilted_ensemble(nu, w, true).cov;
}

// ---------------------------------------------------------------------------
// Curvature certification.  For each condition the criterion below is a
// scalar function of the tilt; the condition holds at w iff the criterion is
// small enough, and a search maximizes it over the tilt box.

enum class Condition { SemiLogConcave, DiagDominated, Rayleigh, Aov };

inline std::string condition_name(Condition c) {
    switch (c) {
        case Condition::SemiLogConcave: return "semi_log_concave";
        case Condition::DiagDominated: return "diag_dominated";
        case Condition::Rayleigh: return "rayleigh";
        case Condition::Aov: return "aov";
    }
    return "?";
}

inline Condition parse_condition(const std::string& s) {
    if (s == "semi_log_concave" || s == "semi-lc" || s == "semilc") return Condition::SemiLogConcave;
    if (s == "diag_dominated" || s == "diag-dominated") return Condition::DiagDominated;
    if (s == "rayleigh") return Condition::Rayleigh;
    if (s == "aov") return Condition::Aov;
    throw SpecError("unknown condition \"" + s + "\"");
}

struct SearchConfig {
    double radius = 6.0;  // search box [-radius, radius]^n
    int grid = 128;       // random probe points
    int starts = 8;       // ascent starts taken from the probe stream prefix
    int iters = 60;       // ascent steps per start
    std::uint64_t seed = 0;
};

struct CertificationReport {
    Condition condition = Condition::SemiLogConcave;
    double certified_value = 0.0;  // max criterion over all evaluated tilts
    Eigen::VectorXd witness;       // argmax tilt
    std::optional<double> threshold;
    bool pass = true;
    int points_evaluated = 0;
    double recheck_residual = 0.0;  // criterion(witness) minus certified value
};

namespace detail {

// Pinned coordinates (variance below this) are dropped from the normalized
// criterion; their covariance row is O(sqrt(eps)) and carries no information.
inline constexpr double kPinnedVarianceTol = 1e-13;

inline double criterion_value(Condition cond, const TiltedEnsemble& e) {
    const int n = static_cast<int>(e.a.size());
    switch (cond) {
        case Condition::SemiLogConcave: {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e.cov, Eigen::EigenvaluesOnly);
            return es.eigenvalues().maxCoeff();
        }
        case Condition::DiagDominated: {
            std::vector<int> live;
            for (int i = 0; i < n; i++)
                if (e.cov(i, i) > kPinnedVarianceTol) live.push_back(i);
            if (live.empty()) return 0.0;
            const int m = static_cast<int>(live.size());
            Eigen::MatrixXd s(m, m);
            for (int i = 0; i < m; i++)
                for (int j = 0; j < m; j++)
                    s(i, j) = e.cov(live[i], live[j]) /
                              std::sqrt(e.cov(live[i], live[i]) * e.cov(live[j], live[j]));
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
            return es.eigenvalues().maxCoeff();
        }
        case Condition::Rayleigh: {
            double m = n == 1 ? 0.0 : -std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; i++)
                for (int j = i + 1; j < n; j++) m = std::max(m, e.cov(i, j));
            return m;
        }
        case Condition::Aov: {
            Eigen::MatrixXd m = e.cov;
            for (int i = 0; i < n; i++) m(i, i) -= 2.0 * e.a[i] + 2.0;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
            return es.eigenvalues().maxCoeff();
        }
    }
    return 0.0;
}

// E[<v, x-a>^2 (x - a)]: the third-cumulant contraction that differentiates
// an eigenvalue of the covariance along the tilt.
inline Eigen::VectorXd cumulant3_vv(const Measure& nu, const TiltedEnsemble& e,
                                    const Eigen::VectorXd& v) {
    const auto& supp = nu.support();
    const int n = nu.n();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd d(n);
    for (std::size_t k = 0; k < supp.size(); k++) {
        double s = 0.0;
        for (int i = 0; i < n; i++) {
            d[i] = sign_bit(supp[k], i) - e.a[i];
            s += v[i] * d[i];
        }
        g += (e.p[k] * s * s) * d;
    }
    return g;
}

inline Eigen::VectorXd criterion_gradient(Condition cond, const Measure& nu,
                                          const TiltedEnsemble& e) {
    const auto& supp = nu.support();
    const int n = nu.n();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    switch (cond) {
        case Condition::SemiLogConcave: {
            es.compute(e.cov);
            return cumulant3_vv(nu, e, es.eigenvectors().col(n - 1));
        }
        case Condition::Aov: {
            Eigen::MatrixXd m = e.cov;
            for (int i = 0; i < n; i++) m(i, i) -= 2.0 * e.a[i] + 2.0;
            es.compute(m);
            const Eigen::VectorXd v = es.eigenvectors().col(n - 1);
            Eigen::VectorXd g = cumulant3_vv(nu, e, v);
            // minus twice d/dw of sum_i v_i^2 a_i, using da_i/dw_k = cov_ik
            for (int k = 0; k < n; k++) {
                double t = 0.0;
                for (int i = 0; i < n; i++) t += v[i] * v[i] * e.cov(i, k);
                g[k] -= 2.0 * t;
            }
            return g;
        }
        case Condition::Rayleigh: {
            int bi = 0, bj = std::min(1, n - 1);
            double best = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; i++)
                for (int j = i + 1; j < n; j++)
                    if (e.cov(i, j) > best) {
                        best = e.cov(i, j);
                        bi = i;
                        bj = j;
                    }
            Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
            if (n == 1) return g;
            Eigen::VectorXd d(n);
            for (std::size_t k = 0; k < supp.size(); k++) {
                for (int i = 0; i < n; i++) d[i] = sign_bit(supp[k], i) - e.a[i];
                g += (e.p[k] * d[bi] * d[bj]) * d;
            }
            return g;
        }
        case Condition::DiagDominated: {
            std::vector<int> live;
            for (int i = 0; i < n; i++)
                if (e.cov(i, i) > kPinnedVarianceTol) live.push_back(i);
            Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
            if (live.empty()) return g;
            const int m = static_cast<int>(live.size());
            Eigen::MatrixXd s(m, m);
            for (int i = 0; i < m; i++)
                for (int j = 0; j < m; j++)
                    s(i, j) = e.cov(live[i], live[j]) /
                              std::sqrt(e.cov(live[i], live[i]) * e.cov(live[j], live[j]));
            es.compute(s);
            const Eigen::VectorXd vs = es.eigenvectors().col(m - 1);
            // vt = D^{-1/2} v on the live block, zero elsewhere
            Eigen::VectorXd vt = Eigen::VectorXd::Zero(n);
            for (int i = 0; i < m; i++) vt[live[i]] = vs[i] / std::sqrt(e.cov(live[i], live[i]));
            g = cumulant3_vv(nu, e, vt);
            // diagonal correction: - sum_i vt_i (cov vt)_i kappa_iik / cov_ii
            const Eigen::VectorXd cv = e.cov * vt;
            Eigen::VectorXd d(n);
            Eigen::VectorXd corr = Eigen::VectorXd::Zero(n);
            for (std::size_t k = 0; k < supp.size(); k++) {
                double coef = 0.0;
                for (int idx = 0; idx < m; idx++) {
                    const int i = live[idx];
                    const double di = sign_bit(supp[k], i) - e.a[i];
                    coef += vt[i] * cv[i] * di * di / e.cov(i, i);
                }
                for (int j = 0; j < n; j++) d[j] = sign_bit(supp[k], j) - e.a[j];
                corr += (e.p[k] * coef) * d;
            }
            return g - corr;
        }
    }
    return Eigen::VectorXd::Zero(n);
}

}  // namespace detail

inline double certify_criterion(const Measure& nu, Condition cond, const TiltVector& w) {
    return detail::criterion_value(cond, tilted_ensemble(nu, w, true));
}

// Maximize the criterion over the tilt box.  The evaluated set is prefix
// stable in every budget knob (grid, starts, iters), so enlarging a budget can
// only raise the certified value: origin and axis points first, then the
// seeded probe stream, then ascent paths started from the probe prefix.
inline CertificationReport certify(const Measure& nu, Condition cond,
                                   const SearchConfig& cfg = {},
                                   std::optional<double> threshold = std::nullopt) {
    const int n = nu.n();
    CertificationReport rep;
    rep.condition = cond;
    rep.threshold = threshold;
    if (!threshold && (cond == Condition::Rayleigh || cond == Condition::Aov))
        rep.threshold = 1e-10;

    double best = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_w = Eigen::VectorXd::Zero(n);
    int evals = 0;
    auto consider = [&](const Eigen::VectorXd& w) {
        const double v = certify_criterion(nu, cond, w);
        evals++;
        if (v > best) {
            best = v;
            best_w = w;
        }
        return v;
    };

    consider(Eigen::VectorXd::Zero(n));
    for (int i = 0; i < n; i++) {
        for (double scale : {0.5, 1.0}) {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
            w[i] = scale * cfg.radius;
            consider(w);
            w[i] = -scale * cfg.radius;
            consider(w);
        }
    }

    auto probe_point = [&](int k) {
        std::mt19937_64 eng = path_engine(cfg.seed, 0xce27f1ull + std::uint64_t(k));
        Eigen::VectorXd w(n);
        for (int i = 0; i < n; i++) w[i] = cfg.radius * (2.0 * uniform01(eng) - 1.0);
        return w;
    };
    std::vector<Eigen::VectorXd> probes;
    for (int k = 0; k < cfg.grid; k++) {
        probes.push_back(probe_point(k));
        consider(probes.back());
    }

    const bool exact_grad = n <= 12;
    auto gradient_at = [&](const Eigen::VectorXd& w) {
        if (exact_grad)
            return detail::criterion_gradient(cond, nu, tilted_ensemble(nu, w, true));
        Eigen::VectorXd g(n);
        const double h = 1e-5;
        for (int i = 0; i < n; i++) {
            Eigen::VectorXd wp = w, wm = w;
            wp[i] += h;
            wm[i] -= h;
            g[i] = (certify_criterion(nu, cond, wp) - certify_criterion(nu, cond, wm)) / (2 * h);
        }
        return g;
    };

    auto ascend = [&](Eigen::VectorXd w) {
        double fw = consider(w);
        for (int it = 0; it < cfg.iters; it++) {
            const Eigen::VectorXd g = gradient_at(w);
            const double gn = g.norm();
            if (gn < 1e-13) break;
            double eta = 1.0 / gn;
            bool improved = false;
            for (int halve = 0; halve < 25; halve++) {
                Eigen::VectorXd wt = (w + eta * g).cwiseMax(-cfg.radius).cwiseMin(cfg.radius);
                const double ft = consider(wt);
                if (ft > fw + 1e-15) {
                    w = wt;
                    fw = ft;
                    improved = true;
                    break;
                }
                eta *= 0.5;
            }
            if (!improved) break;
        }
    };

    ascend(Eigen::VectorXd::Zero(n));
    for (int s = 0; s < std::min(cfg.starts, static_cast<int>(probes.size())); s++)
        ascend(probes[s]);

    rep.certified_value = best;
    rep.witness = best_w;
    rep.points_evaluated = evals;
    rep.recheck_residual = std::abs(certify_criterion(nu, cond, best_w) - best);
    rep.pass = !rep.threshold || best <= *rep.threshold;
    return rep;
}

// A measure whose covariance has nonpositive off-diagonal entries at every
// tilt satisfies both curvature conditions with constant 2.  This check runs
// the Rayleigh search and, when it certifies, verifies the two consequences
// over the same search budget.
struct RayleighConsequenceReport {
    bool is_rayleigh = false;
    double rayleigh_value = 0.0;
    double beta_semi_lc = 0.0;
    double aov_excess = 0.0;
    bool pass = true;
};

inline RayleighConsequenceReport rayleigh_implies_beta2_check(const Measure& nu,
                                                              const SearchConfig& cfg = {},
                                                              double tol = 1e-8) {
    RayleighConsequenceReport r;
    const CertificationReport ray = certify(nu, Condition::Rayleigh, cfg);
    r.rayleigh_value = ray.certified_value;
    r.is_rayleigh = ray.certified_value <= 1e-10;
    if (!r.is_rayleigh) return r;
    r.beta_semi_lc = certify(nu, Condition::SemiLogConcave, cfg).certified_value;
    r.aov_excess = certify(nu, Condition::Aov, cfg).certified_value;
    r.pass = r.beta_semi_lc <= 2.0 + tol && r.aov_excess <= tol;
    return r;
}

}  // namespace cubeloc
