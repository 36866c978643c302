#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cubeloc/common.hpp"
#include "cubeloc/localization.hpp"
#include "cubeloc/log_laplace.hpp"
#include "cubeloc/measure.hpp"
#include "cubeloc/parallel.hpp"
#include "cubeloc/report.hpp"
#include "cubeloc/rng.hpp"
#include "cubeloc/wasserstein.hpp"

namespace cubeloc {

namespace detail {

inline double binary_entropy(double p) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log(p);
    if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
    return h;
}

// h(a) = sum of coordinate binary entropies of the mean vector a.
inline double mean_field_entropy(const double* a, int n) {
    double h = 0.0;
    for (int i = 0; i < n; i++) h += binary_entropy(0.5 * (1.0 + a[i]));
    return h;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Variance decomposition: Var[phi] = E[M]_t + E Var_{nu_t}[phi], with M the
// running posterior mean of phi and [M] its quadratic variation.

inline AuditReport variance_decomposition_audit(const Measure& nu, const TestFunction& phi,
                                                const std::vector<double>& ts,
                                                std::int64_t num_paths, SdeConfig cfg,
                                                int threads = 1) {
    validate(cfg);
    const int n = nu.n();
    require(phi.n == n, "variance_decomposition_audit: function dimension mismatch");
    require(!ts.empty(), "variance_decomposition_audit: need at least one checkpoint");
    require(phi.verify_lipschitz(), "variance_decomposition_audit: declared Lipschitz bound violated");
    const double exact_var = nu.variance(phi.values);

    struct Totals {
        std::vector<double> sum, sum2;
    };
    auto run_at = [&](double dt) {
        SdeConfig c = cfg;
        c.dt = dt;
        c.t_max = ts.back() + dt;
        const std::vector<std::int64_t> marks = detail::checkpoint_steps(ts, dt);
        detail::DriftTable tbl(nu);
        std::vector<double> phi_s(tbl.s);
        for (int k = 0; k < tbl.s; k++) phi_s[k] = phi.values[tbl.idx[k]];

        struct Obs {
            const std::vector<std::int64_t>* marks;
            const std::vector<double>* phi_s;
            int s;
            double qv = 0.0, prev_m = 0.0, cur_var = 0.0;
            std::int64_t k = -1;
            std::size_t next = 0;
            std::vector<double> value_at;
            void step(double, const double*, const double*, const double* p, double) {
                k++;
                double m = 0.0, m2 = 0.0;
                for (int j = 0; j < s; j++) {
                    m += p[j] * (*phi_s)[j];
                    m2 += p[j] * (*phi_s)[j] * (*phi_s)[j];
                }
                if (k > 0) {
                    const double dm = m - prev_m;
                    qv += dm * dm;
                }
                prev_m = m;
                cur_var = std::max(0.0, m2 - m * m);
                while (next < marks->size() && k == (*marks)[next])
                    value_at[next++] = qv + cur_var;
            }
            void finish(double, bool) {
                while (next < marks->size()) value_at[next++] = qv + cur_var;
            }
        };

        Totals init;
        init.sum.assign(ts.size(), 0.0);
        init.sum2.assign(ts.size(), 0.0);
        return parallel_paths<Totals>(
            num_paths, threads, init,
            [&](Totals& st, std::uint64_t pidx) {
                Obs obs;
                obs.marks = &marks;
                obs.phi_s = &phi_s;
                obs.s = tbl.s;
                obs.value_at.assign(ts.size(), 0.0);
                detail::run_tilt_path(tbl, c, pidx, Eigen::VectorXd::Zero(n), obs);
                for (std::size_t j = 0; j < ts.size(); j++) {
                    st.sum[j] += obs.value_at[j];
                    st.sum2[j] += obs.value_at[j] * obs.value_at[j];
                }
            },
            [](Totals& a, const Totals& b) {
                for (std::size_t j = 0; j < a.sum.size(); j++) {
                    a.sum[j] += b.sum[j];
                    a.sum2[j] += b.sum2[j];
                }
            });
    };

    const Totals full = run_at(cfg.dt);
    const Totals half = run_at(cfg.dt / 2.0);

    AuditReport rep;
    rep.name = "variance-decomposition";
    rep.params = {{"num_paths", num_paths}, {"dt", cfg.dt}, {"seed", cfg.seed}, {"n", n}};
    const double N = double(num_paths);
    for (std::size_t j = 0; j < ts.size(); j++) {
        const double mean = full.sum[j] / N;
        const double var = std::max(0.0, full.sum2[j] / N - mean * mean);
        const double se = std::sqrt(var / N);
        const double mean_half = half.sum[j] / N;
        const double allowance = std::abs(mean - mean_half);
        rep.check_close("Var[phi] = E[M]_t + E Var_{nu_t}[phi] at t=" + std::to_string(ts[j]),
                        exact_var, mean, 4.0 * se + allowance + 1e-9);
        rep.diagnostics["mc_estimate_t_" + std::to_string(ts[j])] = mean;
        rep.diagnostics["se_t_" + std::to_string(ts[j])] = se;
        rep.diagnostics["dt_halving_gap_t_" + std::to_string(ts[j])] = allowance;
    }
    rep.diagnostics["exact_variance"] = exact_var;
    return rep;
}

// ---------------------------------------------------------------------------
// Small-tail fact: Var_{tilt(nu,w)}[phi] <= n Tr A(w) for 1-Lipschitz phi,
// both sides by enumeration.

inline AuditReport smalltail_check(const Measure& nu, const TestFunction& phi,
                                   const std::vector<TiltVector>& tilts) {
    const int n = nu.n();
    require(phi.n == n, "smalltail_check: function dimension mismatch");
    require(phi.declared_lipschitz && *phi.declared_lipschitz <= 1.0,
            "smalltail_check: phi must be declared 1-Lipschitz");
    if (!phi.verify_lipschitz()) throw DomainError("smalltail_check: phi is not 1-Lipschitz");

    AuditReport rep;
    rep.name = "smalltail";
    rep.params = {{"n", n}, {"tilts", tilts.size()}};
    for (std::size_t j = 0; j < tilts.size(); j++) {
        const Measure nw = tilt(nu, tilts[j]);
        const double lhs = nw.variance(phi.values);
        const TiltedEnsemble e = tilted_ensemble(nu, tilts[j], false);
        double tr = 0.0;
        for (int i = 0; i < n; i++) tr += 1.0 - e.a[i] * e.a[i];
        rep.check_le("Var_{tilt}[phi] <= n Tr A, tilt #" + std::to_string(j), lhs, n * tr,
                     1e-9 * (1.0 + n * tr));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Main variance theorem, audited structurally.
//
// Proof chain: Var[phi] <= E int_0^T sup_theta (W1(tilt(nu,w_t), tilt(nu,w_t+eps*theta))/eps)^2 dt
//              + n^2 e^{-T/8}     at T = 16 log n,
// with the sup replaced by a max over n coordinate directions plus sampled
// unit directions (a lower bound of the sup, so the assertion is conservative).
//
// Exponent fit: max variance of l1-distance functions on balanced slices
// grows strictly slower than n^2; Hadamard row measures are the negative
// control with Var/n^2 bounded below.

struct MainTheoremConfig {
    std::int64_t num_paths = 8;
    double eps = 1e-3;
    double quad_stride = 0.5;
    int sampled_directions = 64;
    double dt = 1e-3;
    std::uint64_t seed = 0;
    int threads = 1;
    bool proof_chain = true;
    bool exponent_fit = true;
    int family_size = 48;
};

namespace detail {

// Max squared W1 difference quotient over the direction set at tilt w.
inline double sup_quotient_sq(const Measure& nu, const double* w,
                              const std::vector<TiltVector>& dirs, double eps,
                              double* max_quotient) {
    const int n = nu.n();
    TiltVector wv = Eigen::Map<const Eigen::VectorXd>(w, n);
    const Measure base = tilt(nu, wv);
    double best = 0.0;
    for (const TiltVector& th : dirs) {
        const double q = w1_exact(base, tilt(nu, wv + eps * th)) / eps;
        best = std::max(best, q * q);
        if (max_quotient) *max_quotient = std::max(*max_quotient, q);
    }
    return best;
}

struct ProofChainResult {
    double mc_mean = 0.0, mc_se = 0.0, tail = 0.0;
    double max_quotient = 0.0, richardson_dev = 0.0;
    double horizon = 0.0;
};

inline ProofChainResult proof_chain_estimate(const Measure& nu, const MainTheoremConfig& cfg) {
    const int n = nu.n();
    require(n <= 8, "proof chain: exact-W1 budget restricts to n <= 8");
    const double T = 16.0 * std::log(double(n));
    const std::int64_t stride = std::max<std::int64_t>(1, std::llround(cfg.quad_stride / cfg.dt));

    std::vector<TiltVector> dirs;
    for (int i = 0; i < n; i++) {
        TiltVector e = TiltVector::Zero(n);
        e[i] = 1.0;
        dirs.push_back(e);
    }
    std::mt19937_64 deng = path_engine(cfg.seed, 0xd17ec7u);
    for (int j = 0; j < cfg.sampled_directions; j++) {
        const std::vector<double> u = random_unit_vector(deng, n);
        dirs.push_back(Eigen::Map<const Eigen::VectorXd>(u.data(), n));
    }

    SdeConfig sde;
    sde.dt = cfg.dt;
    sde.t_max = T;
    sde.seed = cfg.seed;
    detail::DriftTable tbl(nu);

    struct State {
        double sum = 0.0, sum2 = 0.0, maxq = 0.0, rich = 0.0;
    };
    State total = parallel_paths<State>(
        cfg.num_paths, cfg.threads, State{},
        [&](State& st, std::uint64_t pidx) {
            struct Obs {
                const Measure* nu;
                const std::vector<TiltVector>* dirs;
                double eps, dt, quad_stride;
                std::int64_t stride, k = -1;
                bool richardson = false;
                double integral = 0.0, prev_s = 0.0, maxq = 0.0, rich = 0.0;
                bool have_prev = false;
                void step(double, const double* w, const double*, const double*, double) {
                    k++;
                    if (k % stride != 0) return;
                    const double s = sup_quotient_sq(*nu, w, *dirs, eps, &maxq);
                    if (richardson && k / stride < 3) {
                        const double sh = sup_quotient_sq(*nu, w, *dirs, eps / 2.0, nullptr);
                        rich = std::max(rich, std::abs(std::sqrt(sh) - std::sqrt(s)));
                    }
                    if (have_prev) integral += 0.5 * (prev_s + s) * quad_stride;
                    prev_s = s;
                    have_prev = true;
                }
                void finish(double, bool) {}
            };
            Obs obs;
            obs.nu = &nu;
            obs.dirs = &dirs;
            obs.eps = cfg.eps;
            obs.dt = cfg.dt;
            obs.quad_stride = cfg.quad_stride;
            obs.stride = stride;
            obs.richardson = pidx == 0;
            detail::run_tilt_path(tbl, sde, pidx, Eigen::VectorXd::Zero(n), obs);
            st.sum += obs.integral;
            st.sum2 += obs.integral * obs.integral;
            st.maxq = std::max(st.maxq, obs.maxq);
            st.rich = std::max(st.rich, obs.rich);
        },
        [](State& a, const State& b) {
            a.sum += b.sum;
            a.sum2 += b.sum2;
            a.maxq = std::max(a.maxq, b.maxq);
            a.rich = std::max(a.rich, b.rich);
        });

    ProofChainResult r;
    const double N = double(cfg.num_paths);
    r.mc_mean = total.sum / N;
    const double var = std::max(0.0, total.sum2 / N - r.mc_mean * r.mc_mean);
    r.mc_se = std::sqrt(var / N);
    r.tail = double(n) * double(n) * std::exp(-T / 8.0);
    r.max_quotient = total.maxq;
    r.richardson_dev = total.rich;
    r.horizon = T;
    return r;
}

inline void append_proof_chain(AuditReport& rep, const Measure& nu,
                               const std::vector<TestFunction>& family,
                               const MainTheoremConfig& cfg,
                               std::optional<double> beta_for_quotient) {
    double max_var = 0.0;
    for (const TestFunction& phi : family) {
        require(phi.n == nu.n(), "proof chain: function dimension mismatch");
        require(phi.verify_lipschitz(), "proof chain: family member violates declared Lipschitz bound");
        max_var = std::max(max_var, nu.variance(phi.values));
    }
    const ProofChainResult pc = proof_chain_estimate(nu, cfg);
    rep.check_le("max Var[phi] <= E int sup (W1 quotient)^2 dt + n^2 e^{-T/8}", max_var,
                 pc.mc_mean + pc.tail, 4.0 * pc.mc_se + pc.richardson_dev + 1e-9);
    if (beta_for_quotient) {
        const double b = *beta_for_quotient;
        const double bound = 4.0 * b * std::pow(double(nu.n()), 1.0 - 1.0 / (32.0 * b));
        rep.check_le("max W1 quotient along paths <= 4 beta n^{1-1/(32 beta)}", pc.max_quotient,
                     bound, 1e-9);
    }
    rep.diagnostics["max_family_variance"] = max_var;
    rep.diagnostics["chain_mc_mean"] = pc.mc_mean;
    rep.diagnostics["chain_mc_se"] = pc.mc_se;
    rep.diagnostics["chain_tail"] = pc.tail;
    rep.diagnostics["chain_horizon"] = pc.horizon;
    rep.diagnostics["max_w1_quotient"] = pc.max_quotient;
    rep.diagnostics["richardson_dev"] = pc.richardson_dev;
}

inline std::vector<TestFunction> random_distance_family(int n, int count, std::uint64_t seed) {
    std::mt19937_64 eng = path_engine(seed, 0xfa111u + std::uint64_t(n));
    const std::uint32_t size = std::uint32_t(1) << n;
    std::vector<TestFunction> fam;
    for (int j = 0; j < count; j++) {
        const int setsize = 1 + int(eng() % 8);
        std::vector<std::uint32_t> pts;
        for (int k = 0; k < setsize; k++) pts.push_back(std::uint32_t(eng() % size));
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        fam.push_back(hamming_distance_to_set(n, pts));
    }
    return fam;
}

}  // namespace detail

inline AuditReport main_theorem_audit(const Measure& nu, double beta,
                                      const std::vector<TestFunction>& family,
                                      const MainTheoremConfig& cfg = {}) {
    require(beta > 0.0, "main_theorem_audit: beta must be positive");
    AuditReport rep;
    rep.name = "main-theorem";
    rep.params = {{"beta", beta},
                  {"num_paths", cfg.num_paths},
                  {"eps", cfg.eps},
                  {"quad_stride", cfg.quad_stride},
                  {"sampled_directions", cfg.sampled_directions},
                  {"dt", cfg.dt},
                  {"seed", cfg.seed},
                  {"n", nu.n()},
                  {"family_size", cfg.family_size}};

    if (cfg.proof_chain) {
        require(!family.empty(), "main_theorem_audit: need a nonempty 1-Lipschitz family");
        detail::append_proof_chain(rep, nu, family, cfg, std::nullopt);
    }

    if (cfg.exponent_fit) {
        const std::vector<int> ns{4, 6, 8, 10};
        std::vector<double> lx, ly;
        for (int m : ns) {
            const Measure sl = make_slice(m, 0);
            double max_var = 0.0;
            for (const TestFunction& phi :
                 detail::random_distance_family(m, cfg.family_size, cfg.seed))
                max_var = std::max(max_var, sl.variance(phi.values));
            rep.diagnostics["slice_max_var_n_" + std::to_string(m)] = max_var;
            lx.push_back(std::log(double(m)));
            ly.push_back(std::log(max_var));
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t j = 0; j < lx.size(); j++) {
            mx += lx[j];
            my += ly[j];
        }
        mx /= double(lx.size());
        my /= double(ly.size());
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t j = 0; j < lx.size(); j++) {
            sxx += (lx[j] - mx) * (lx[j] - mx);
            sxy += (lx[j] - mx) * (ly[j] - my);
        }
        const double slope = sxy / sxx;
        rep.check_le("fitted Var-vs-n exponent on balanced slices < 2 with margin", slope, 1.95);
        rep.diagnostics["fitted_exponent"] = slope;

        for (int m : {4, 8, 16}) {
            const Measure had = make_hadamard_rows(m);
            std::vector<std::uint32_t> half;
            for (int r = 0; r < m / 2; r++) half.push_back(hadamard_row_index(m, r));
            const TestFunction phi = hamming_distance_to_set(m, half);
            const double ratio = had.variance(phi.values) / (double(m) * double(m));
            rep.check_le("hadamard negative control Var/n^2 >= 0.05 at n=" + std::to_string(m),
                         0.05, ratio, 1e-12);
            rep.diagnostics["hadamard_ratio_n_" + std::to_string(m)] = ratio;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Entropy identity: H(nu) = 1/2 E int_0^inf Tr A_t dt, truncated with the
// trace-decay tail bound folded into the tolerance.

inline AuditReport entropy_identity_audit(const Measure& nu, std::int64_t num_paths,
                                          double t_max, SdeConfig cfg, int threads = 1) {
    validate(cfg);
    require(t_max > 0.0, "entropy_identity_audit: t_max must be positive");
    const int n = nu.n();
    const double exact = nu.entropy();
    cfg.t_max = t_max;
    detail::DriftTable tbl(nu);

    struct State {
        double sum = 0.0, sum2 = 0.0;
        std::int64_t truncated = 0;
    };
    State total = parallel_paths<State>(
        num_paths, threads, State{},
        [&](State& st, std::uint64_t pidx) {
            struct Obs {
                double dt;
                double integral = 0.0, prev_tr = 0.0;
                bool have_prev = false, collapsed = false;
                void step(double, const double*, const double*, const double*, double tr) {
                    if (have_prev) integral += 0.5 * (prev_tr + tr) * dt;
                    prev_tr = tr;
                    have_prev = true;
                }
                void finish(double, bool c) { collapsed = c; }
            };
            Obs obs;
            obs.dt = cfg.dt;
            detail::run_tilt_path(tbl, cfg, pidx, Eigen::VectorXd::Zero(n), obs);
            const double v = 0.5 * obs.integral;
            st.sum += v;
            st.sum2 += v * v;
            if (!obs.collapsed) st.truncated++;
        },
        [](State& a, const State& b) {
            a.sum += b.sum;
            a.sum2 += b.sum2;
            a.truncated += b.truncated;
        });

    AuditReport rep;
    rep.name = "entropy-identity";
    rep.params = {{"num_paths", num_paths}, {"dt", cfg.dt}, {"seed", cfg.seed},
                  {"t_max", t_max},         {"n", n}};
    const double N = double(num_paths);
    const double mean = total.sum / N;
    const double var = std::max(0.0, total.sum2 / N - mean * mean);
    const double se = std::sqrt(var / N);
    const double tail = double(n) * 8.0 * std::exp(-t_max / 8.0);
    rep.check_close("H(nu) = 1/2 E int Tr A_t dt", exact, mean, 4.0 * se + tail + 1e-9);
    rep.diagnostics["exact_entropy"] = exact;
    rep.diagnostics["mc_estimate"] = mean;
    rep.diagnostics["mc_se"] = se;
    rep.diagnostics["truncation_bound"] = tail;
    rep.diagnostics["uncollapsed_fraction"] = double(total.truncated) / N;
    return rep;
}

// ---------------------------------------------------------------------------
// Entropy theorem: marginal entropy sum <= beta * joint entropy, exact.

inline AuditReport entropy_theorem_check(const Measure& nu, double beta) {
    require(beta > 0.0, "entropy_theorem_check: beta must be positive");
    const double marginal = nu.marginal_entropy_sum();
    const double joint = nu.entropy();
    AuditReport rep;
    rep.name = "entropy-theorem";
    rep.params = {{"beta", beta}, {"n", nu.n()}};
    if (joint <= 1e-14 && marginal > 1e-10) {
        rep.check_le("consistency: H(nu)=0 forces marginal entropy 0 under the curvature condition",
                     marginal, 0.0, 1e-10);
    }
    rep.check_le("sum_i H(X_i) <= beta * H(X)", marginal, beta * joint, 1e-10);
    rep.diagnostics["marginal_entropy_sum"] = marginal;
    rep.diagnostics["entropy"] = joint;
    rep.diagnostics["ratio"] = joint > 0.0 ? marginal / joint : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// h-drift audit: h(a_t) has drift -1/2 Tr(A D^{-1} A) along localization
// paths, and under the diagonal-domination condition that trace is at most
// beta Tr(A) pathwise.  Pinned coordinates (D_ii ~ 0) drop out: their A rows
// vanish with them.

inline AuditReport h_drift_audit(const Measure& nu, std::int64_t num_paths, SdeConfig cfg,
                                 std::optional<double> beta = std::nullopt, int threads = 1) {
    validate(cfg);
    const int n = nu.n();
    require(n <= 10, "h_drift_audit: per-step covariance assembly restricts to n <= 10");
    const double window = 0.25;
    const std::vector<double> ts{0.25, 0.5, 0.75, 1.0};
    cfg.t_max = ts.back() + cfg.dt;
    const std::vector<std::int64_t> marks = detail::checkpoint_steps(ts, cfg.dt);
    detail::DriftTable tbl(nu);
    const double pinned_tol = 1e-13;

    struct State {
        std::vector<double> sum_x, sum_x2;  // paired: window dh minus integrated drift
        double max_excess = -1e30;
        std::int64_t runs = 0;
    };
    State init;
    init.sum_x.assign(ts.size(), 0.0);
    init.sum_x2.assign(ts.size(), 0.0);

    State total = parallel_paths<State>(
        num_paths, threads, init,
        [&](State& st, std::uint64_t pidx) {
            struct Obs {
                const detail::DriftTable* tbl;
                const std::vector<std::int64_t>* marks;
                double dt, pinned_tol;
                std::optional<double> beta;
                int n;
                std::vector<double> h_at, drift_at;  // checkpoint h and integrated drift
                double drift_integral = 0.0, prev_rate = 0.0, h0 = 0.0;
                double max_excess = -1e30, cur_h = 0.0;
                bool have_prev = false;
                std::int64_t k = -1;
                std::size_t next = 0;
                std::vector<double> m2;  // scratch n*n second-moment matrix
                void step(double, const double*, const double* a, const double* p, double) {
                    k++;
                    cur_h = detail::mean_field_entropy(a, n);
                    if (k == 0) h0 = cur_h;
                    // A = M2 - a a^T from the support probabilities
                    const int s = tbl->s;
                    m2.assign(std::size_t(n) * n, 0.0);
                    for (int kk = 0; kk < s; kk++) {
                        const double pk = p[kk];
                        if (pk == 0.0) continue;
                        for (int i = 0; i < n; i++) {
                            const double xi = tbl->sgn[std::size_t(i) * s + kk];
                            for (int j = i; j < n; j++)
                                m2[std::size_t(i) * n + j] +=
                                    pk * xi * tbl->sgn[std::size_t(j) * s + kk];
                        }
                    }
                    double tr_live = 0.0, quad = 0.0;
                    for (int i = 0; i < n; i++) {
                        const double dii = 1.0 - a[i] * a[i];
                        if (dii < pinned_tol) continue;
                        tr_live += dii;
                        for (int j = 0; j < n; j++) {
                            const double djj = 1.0 - a[j] * a[j];
                            if (djj < pinned_tol) continue;
                            const double aij = (i <= j ? m2[std::size_t(i) * n + j]
                                                       : m2[std::size_t(j) * n + i]) -
                                               a[i] * a[j];
                            quad += aij * aij / djj;
                        }
                    }
                    if (beta) max_excess = std::max(max_excess, quad - *beta * tr_live);
                    const double rate = -0.5 * quad;
                    if (have_prev) drift_integral += 0.5 * (prev_rate + rate) * dt;
                    prev_rate = rate;
                    have_prev = true;
                    while (next < marks->size() && k == (*marks)[next]) {
                        h_at[next] = cur_h;
                        drift_at[next] = drift_integral;
                        next++;
                    }
                }
                void finish(double, bool) {
                    while (next < marks->size()) {
                        h_at[next] = cur_h;
                        drift_at[next] = drift_integral;
                        next++;
                    }
                }
            };
            Obs obs;
            obs.tbl = &tbl;
            obs.marks = &marks;
            obs.dt = cfg.dt;
            obs.pinned_tol = pinned_tol;
            obs.beta = beta;
            obs.n = n;
            obs.h_at.assign(ts.size(), 0.0);
            obs.drift_at.assign(ts.size(), 0.0);
            detail::run_tilt_path(tbl, cfg, pidx, Eigen::VectorXd::Zero(n), obs);
            double prev_h = obs.h0, prev_drift = 0.0;
            for (std::size_t j = 0; j < obs.h_at.size(); j++) {
                const double x =
                    (obs.h_at[j] - prev_h) - (obs.drift_at[j] - prev_drift);
                st.sum_x[j] += x;
                st.sum_x2[j] += x * x;
                prev_h = obs.h_at[j];
                prev_drift = obs.drift_at[j];
            }
            st.max_excess = std::max(st.max_excess, obs.max_excess);
            st.runs++;
        },
        [](State& a, const State& b) {
            for (std::size_t j = 0; j < a.sum_x.size(); j++) {
                a.sum_x[j] += b.sum_x[j];
                a.sum_x2[j] += b.sum_x2[j];
            }
            a.max_excess = std::max(a.max_excess, b.max_excess);
            a.runs += b.runs;
        });

    AuditReport rep;
    rep.name = "h-drift";
    rep.params = {{"num_paths", num_paths}, {"dt", cfg.dt}, {"seed", cfg.seed}, {"n", n}};
    if (beta) rep.params["beta"] = *beta;

    const Eigen::VectorXd mean = nu.mean();
    const double h_of_mean = detail::mean_field_entropy(mean.data(), n);
    rep.check_close("h(mean) = marginal entropy sum", h_of_mean, nu.marginal_entropy_sum(),
                    1e-10);

    const double N = double(num_paths);
    const double allowance = 50.0 * n * cfg.dt * window;
    for (std::size_t j = 0; j < ts.size(); j++) {
        const double mean_x = total.sum_x[j] / N;
        const double var_x = std::max(0.0, total.sum_x2[j] / N - mean_x * mean_x);
        const double se_x = std::sqrt(var_x / N);
        rep.check_close("window drift of h(a_t) matches -1/2 Tr(A D^{-1} A), window ending t=" +
                            std::to_string(ts[j]),
                        mean_x, 0.0, 4.0 * se_x + allowance);
        rep.diagnostics["window_residual_t_" + std::to_string(ts[j])] = mean_x;
        rep.diagnostics["window_se_t_" + std::to_string(ts[j])] = se_x;
    }
    if (beta) {
        rep.check_le("pathwise Tr(A D^{-1} A) <= beta Tr(A)", total.max_excess, 0.0, 1e-9);
        rep.diagnostics["max_trace_excess"] = total.max_excess;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Rayleigh corollary: certification, the exact entropy comparison with
// beta = 2, and the variance proof chain with the beta = 2 transport bound on
// the observed W1 quotients.

inline AuditReport rayleigh_corollary_audit(const Measure& nu, const MainTheoremConfig& cfg = {},
                                            const SearchConfig& search = {}) {
    const CertificationReport cert = certify(nu, Condition::Rayleigh, search);
    if (!cert.pass)
        throw DomainError("rayleigh_corollary_audit: certification failed, max off-diagonal "
                          "covariance " +
                          std::to_string(cert.certified_value));

    AuditReport rep;
    rep.name = "rayleigh-corollary";
    rep.params = {{"n", nu.n()}, {"seed", cfg.seed}, {"num_paths", cfg.num_paths}};
    rep.diagnostics["rayleigh_certified_value"] = cert.certified_value;

    const double marginal = nu.marginal_entropy_sum();
    const double joint = nu.entropy();
    rep.check_le("sum_i H(X_i) <= 2 H(X)", marginal, 2.0 * joint, 1e-10);
    rep.diagnostics["marginal_entropy_sum"] = marginal;
    rep.diagnostics["entropy"] = joint;

    MainTheoremConfig chain_cfg = cfg;
    chain_cfg.proof_chain = true;
    chain_cfg.exponent_fit = false;
    std::vector<TestFunction> family = detail::random_distance_family(nu.n(), 16, cfg.seed);
    detail::append_proof_chain(rep, nu, family, chain_cfg, 2.0);
    return rep;
}

}  // namespace cubeloc
