#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cubeloc/common.hpp"
#include "cubeloc/fastmath.hpp"
#include "cubeloc/hypercube.hpp"
#include "cubeloc/log_laplace.hpp"
#include "cubeloc/measure.hpp"
#include "cubeloc/parallel.hpp"
#include "cubeloc/report.hpp"
#include "cubeloc/rng.hpp"

namespace cubeloc {

enum class Scheme { TiltEuler, MeasureEuler };

struct SdeConfig {
    double dt = 1e-3;
    double t_max = 64.0;
    double collapse_tol = 1e-6;
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::TiltEuler;
};

inline void validate(const SdeConfig& cfg) {
    require(cfg.dt > 0.0 && cfg.dt < 1.0, "SdeConfig: dt must lie in (0,1)");
    require(cfg.t_max > 0.0, "SdeConfig: t_max must be positive");
    require(cfg.collapse_tol > 0.0 && cfg.collapse_tol < 1.0,
            "SdeConfig: collapse_tol must lie in (0,1)");
}

// Time by which essentially every path has collapsed (trace decay plus a
// generous escape margin).
inline double suggested_t_max(int n) { return 16.0 * std::log(std::max(2, n)) + 40.0; }

struct LocalizationTrajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> tilts;  // empty under MeasureEuler
    std::vector<Eigen::VectorXd> means;
    std::vector<double> trace_cov;
    std::optional<HypercubePoint> terminal_point;
    bool collapsed = false;
    double final_time = 0.0;
    std::int64_t steps = 0;
    double clamped_mass = 0.0;  // MeasureEuler: negative weight mass clamped
    std::int64_t clamp_events = 0;
};

// One Euler-Maruyama step of the tilt-form dynamics dw = dB + a(w) dt.
inline TiltVector step_tilt(const Measure& nu, const TiltVector& w, double dt,
                            const Eigen::VectorXd& noise) {
    require(noise.size() == nu.n(), "step_tilt: noise has wrong dimension");
    return w + std::sqrt(dt) * noise + tilt_mean(nu, w) * dt;
}

struct StepDiagnostics {
    double clamped_mass = 0.0;
    double mass_before_renorm = 0.0;
    bool clamped = false;
};

// One step of the measure-form dynamics dF(x) = F(x) <x - a, dB>, applied to
// the relative density F (so that F * nu is the current measure), followed by
// clamping of negative weights and exact renormalization.
inline std::vector<double> step_measure(const Measure& nu, const std::vector<double>& F,
                                        const Eigen::VectorXd& a, double dt,
                                        const Eigen::VectorXd& noise,
                                        StepDiagnostics* diag = nullptr) {
    require(F.size() == nu.size(), "step_measure: F must have 2^n entries");
    require(a.size() == nu.n() && noise.size() == nu.n(), "step_measure: dimension mismatch");
    const double sdt = std::sqrt(dt);
    std::vector<double> out(F.size(), 0.0);
    double clamped = 0.0;
    double mass = 0.0;
    for (std::uint32_t x : nu.support()) {
        double inc = 0.0;
        for (int i = 0; i < nu.n(); i++) inc += (sign_bit(x, i) - a[i]) * sdt * noise[i];
        double f = F[x] * (1.0 + inc);
        if (f < 0.0) {
            clamped += -f * nu.weight(x);
            f = 0.0;
        }
        out[x] = f;
        mass += f * nu.weight(x);
    }
    if (diag) {
        diag->clamped_mass = clamped;
        diag->mass_before_renorm = mass;
        diag->clamped = clamped > 0.0;
    }
    if (!(mass > 0.0))
        throw DomainError("step_measure: total mass vanished; the step size dt is too large "
                          "for this path, lower dt");
    for (std::uint32_t x : nu.support()) out[x] /= mass;
    return out;
}

namespace detail {

// Support-compact measure view for the simulation hot loop: sign matrix in
// column-major order so per-step work vectorizes across the support.
struct DriftTable {
    int n = 0;
    int s = 0;
    std::vector<double> wgt;            // weight per support atom
    std::vector<double> logw;           // log weight per support atom
    std::vector<double> sgn;            // sgn[i*s + k] = x_i of atom k
    std::vector<double> bpl;            // bpl[i*s + k] = 1 if x_i = +1 else 0
    std::vector<std::uint32_t> idx;     // atom -> point index

    explicit DriftTable(const Measure& nu) : n(nu.n()), s(int(nu.support().size())) {
        wgt.resize(s);
        logw.resize(s);
        sgn.resize(std::size_t(n) * s);
        bpl.resize(std::size_t(n) * s);
        idx = nu.support();
        for (int k = 0; k < s; k++) {
            wgt[k] = nu.weight(idx[k]);
            logw[k] = std::log(wgt[k]);
            for (int i = 0; i < n; i++) {
                const int sg = sign_bit(idx[k], i);
                sgn[std::size_t(i) * s + k] = sg;
                bpl[std::size_t(i) * s + k] = sg > 0 ? 1.0 : 0.0;
            }
        }
    }

    // Tilted probabilities p (normalized, support-aligned), mean a, and the
    // collapse residual max_i (1 - a_i^2).  e is scratch of size s.
    //
    // Product form: p_k ∝ w_k Π_i exp(w_i x_ik − |w_i|).  Every factor lies in
    // (0, 1], so nothing overflows and the per-atom exponential disappears from
    // the inner loop.  If the whole support underflows (enormous tilts on a
    // mismatched support) fall back to the max-shifted log route.
    double tilted_mean(const double* w, double* a, double* p, double* e) const {
        for (int k = 0; k < s; k++) p[k] = wgt[k];
        for (int i = 0; i < n; i++) {
            const double wi = w[i], awi = std::abs(wi);
            const double lo = fast_exp_neg(-wi - awi);
            const double d = fast_exp_neg(wi - awi) - lo;
            const double* b = &bpl[std::size_t(i) * s];
            for (int k = 0; k < s; k++) p[k] *= lo + d * b[k];
        }
        double z = 0.0;
        for (int k = 0; k < s; k++) z += p[k];
        if (!(z >= 1e-280)) return tilted_mean_shifted(w, a, p, e);
        return finish_mean(z, a, p);
    }

    double trace_from_mean(const double* a) const {
        double tr = 0.0;
        for (int i = 0; i < n; i++) tr += 1.0 - a[i] * a[i];
        return tr;
    }

  private:
    double finish_mean(double z, double* a, double* p) const {
        const double inv = 1.0 / z;
        double maxdiag = 0.0;
        for (int i = 0; i < n; i++) {
            const double* col = &sgn[std::size_t(i) * s];
            double ai = 0.0;
            for (int k = 0; k < s; k++) ai += p[k] * col[k];
            ai *= inv;
            a[i] = ai;
            maxdiag = std::max(maxdiag, 1.0 - ai * ai);
        }
        for (int k = 0; k < s; k++) p[k] *= inv;
        return maxdiag;
    }

    double tilted_mean_shifted(const double* w, double* a, double* p, double* e) const {
        for (int k = 0; k < s; k++) e[k] = logw[k];
        for (int i = 0; i < n; i++) {
            const double wi = w[i];
            const double* col = &sgn[std::size_t(i) * s];
            for (int k = 0; k < s; k++) e[k] += col[k] * wi;
        }
        double m = e[0];
        for (int k = 1; k < s; k++) m = std::max(m, e[k]);
        double z = 0.0;
        for (int k = 0; k < s; k++) {
            const double pe = fast_exp_neg(e[k] - m);
            p[k] = pe;
            z += pe;
        }
        return finish_mean(z, a, p);
    }
};

// Observer contract: step(t, w, a, p, trace) fires at t = 0 and after every
// step (w is null under the measure scheme); finish(t, collapsed) fires once.
struct NullObserver {
    void step(double, const double*, const double*, const double*, double) {}
    void finish(double, bool) {}
};

struct PathResult {
    bool collapsed = false;
    double final_time = 0.0;
    std::int64_t steps = 0;
    std::uint32_t terminal = 0;  // sign snap of the final mean
    double clamped_mass = 0.0;
    std::int64_t clamp_events = 0;
};

template <class Obs>
PathResult run_tilt_path(const DriftTable& tbl, const SdeConfig& cfg, std::uint64_t path_index,
                         const Eigen::VectorXd& w0, Obs&& obs,
                         std::vector<double>* w_final = nullptr) {
    const int n = tbl.n;
    std::mt19937_64 eng = path_engine(cfg.seed, path_index);
    const ZigguratNormal& zig = ziggurat();
    std::vector<double> w(w0.data(), w0.data() + n), a(n), p(tbl.s), e(tbl.s), g(n);
    const double sdt = std::sqrt(cfg.dt);
    const std::int64_t max_steps = std::llround(cfg.t_max / cfg.dt);

    double maxdiag = tbl.tilted_mean(w.data(), a.data(), p.data(), e.data());
    obs.step(0.0, w.data(), a.data(), p.data(), tbl.trace_from_mean(a.data()));
    std::int64_t k = 0;
    while (maxdiag >= cfg.collapse_tol && k < max_steps) {
        for (int i = 0; i < n; i++) g[i] = zig(eng);
        for (int i = 0; i < n; i++) w[i] += sdt * g[i] + a[i] * cfg.dt;
        k++;
        maxdiag = tbl.tilted_mean(w.data(), a.data(), p.data(), e.data());
        obs.step(k * cfg.dt, w.data(), a.data(), p.data(), tbl.trace_from_mean(a.data()));
    }
    PathResult r;
    r.collapsed = maxdiag < cfg.collapse_tol;
    r.final_time = k * cfg.dt;
    r.steps = k;
    for (int i = 0; i < n; i++)
        if (a[i] > 0.0) r.terminal |= (1u << i);
    if (w_final) *w_final = w;
    obs.finish(r.final_time, r.collapsed);
    return r;
}

template <class Obs>
PathResult run_measure_path(const DriftTable& tbl, const SdeConfig& cfg, std::uint64_t path_index,
                            const Eigen::VectorXd& w0, Obs&& obs) {
    const int n = tbl.n, s = tbl.s;
    std::mt19937_64 eng = path_engine(cfg.seed, path_index);
    const ZigguratNormal& zig = ziggurat();
    // q = current probabilities on the support; start from the tilt by w0.
    std::vector<double> q(s), a(n), g(n), e(s);
    {
        double m = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < s; k++) {
            double acc = tbl.logw[k];
            for (int i = 0; i < n; i++) acc += tbl.sgn[std::size_t(i) * s + k] * w0[i];
            e[k] = acc;
            m = std::max(m, acc);
        }
        double z = 0.0;
        for (int k = 0; k < s; k++) {
            q[k] = std::exp(e[k] - m);
            z += q[k];
        }
        for (int k = 0; k < s; k++) q[k] /= z;
    }
    const double sdt = std::sqrt(cfg.dt);
    const std::int64_t max_steps = std::llround(cfg.t_max / cfg.dt);
    PathResult r;

    auto compute_mean = [&] {
        double maxdiag = 0.0;
        for (int i = 0; i < n; i++) {
            const double* col = &tbl.sgn[std::size_t(i) * s];
            double ai = 0.0;
            for (int k = 0; k < s; k++) ai += q[k] * col[k];
            a[i] = ai;
            maxdiag = std::max(maxdiag, 1.0 - ai * ai);
        }
        return maxdiag;
    };

    double maxdiag = compute_mean();
    obs.step(0.0, nullptr, a.data(), q.data(), tbl.trace_from_mean(a.data()));
    std::int64_t k = 0;
    while (maxdiag >= cfg.collapse_tol && k < max_steps) {
        for (int i = 0; i < n; i++) g[i] = zig(eng) * sdt;
        double mass = 0.0;
        double clamped = 0.0;
        for (int kk = 0; kk < s; kk++) {
            double inc = 0.0;
            for (int i = 0; i < n; i++)
                inc += (tbl.sgn[std::size_t(i) * s + kk] - a[i]) * g[i];
            double v = q[kk] * (1.0 + inc);
            if (v < 0.0) {
                clamped += -v;
                v = 0.0;
            }
            q[kk] = v;
            mass += v;
        }
        if (!(mass > 0.0))
            throw DomainError("measure-form step lost all mass; lower dt");
        for (int kk = 0; kk < s; kk++) q[kk] /= mass;
        if (clamped > 0.0) {
            r.clamped_mass += clamped;
            r.clamp_events++;
        }
        k++;
        maxdiag = compute_mean();
        obs.step(k * cfg.dt, nullptr, a.data(), q.data(), tbl.trace_from_mean(a.data()));
    }
    r.collapsed = maxdiag < cfg.collapse_tol;
    r.final_time = k * cfg.dt;
    r.steps = k;
    for (int i = 0; i < n; i++)
        if (a[i] > 0.0) r.terminal |= (1u << i);
    obs.finish(r.final_time, r.collapsed);
    return r;
}

template <class Obs>
PathResult run_path(const DriftTable& tbl, const SdeConfig& cfg, std::uint64_t path_index,
                    const Eigen::VectorXd& w0, Obs&& obs) {
    if (cfg.scheme == Scheme::TiltEuler) return run_tilt_path(tbl, cfg, path_index, w0, obs);
    return run_measure_path(tbl, cfg, path_index, w0, obs);
}

}  // namespace detail

// Simulates one localization path, recording every `stride`-th state (and the
// final one).  Truncation at t_max without collapse is reported, not thrown.
inline LocalizationTrajectory run_localization(const Measure& nu, const SdeConfig& cfg,
                                               const TiltVector& w0, std::int64_t stride = 1,
                                               std::uint64_t path_index = 0) {
    validate(cfg);
    require(w0.size() == nu.n(), "run_localization: w0 has wrong dimension");
    require(stride >= 1, "run_localization: stride must be >= 1");
    const detail::DriftTable tbl(nu);
    LocalizationTrajectory traj;

    struct Recorder {
        LocalizationTrajectory* traj;
        const detail::DriftTable* tbl;
        std::int64_t stride;
        std::int64_t k = 0;
        bool tilt_scheme;
        void step(double t, const double* w, const double* a, const double*, double trace) {
            if (k % stride == 0) record(t, w, a, trace);
            k++;
        }
        void record(double t, const double* w, const double* a, double trace) {
            if (!traj->times.empty() && traj->times.back() == t) return;
            traj->times.push_back(t);
            if (tilt_scheme && w)
                traj->tilts.push_back(Eigen::Map<const Eigen::VectorXd>(w, tbl->n));
            traj->means.push_back(Eigen::Map<const Eigen::VectorXd>(a, tbl->n));
            traj->trace_cov.push_back(trace);
        }
        void finish(double, bool) {}
    } rec{&traj, &tbl, stride, 0, cfg.scheme == Scheme::TiltEuler};

    struct Tail {  // capture the final state whether or not it hits the stride
        Recorder* rec;
        double t = 0.0;
        std::vector<double> w, a;
        double trace = 0.0;
        bool has_w = false;
        void step(double tt, const double* ww, const double* aa, const double* pp, double tr) {
            rec->step(tt, ww, aa, pp, tr);
            t = tt;
            trace = tr;
            a.assign(aa, aa + rec->tbl->n);
            if (ww) {
                w.assign(ww, ww + rec->tbl->n);
                has_w = true;
            }
        }
        void finish(double tt, bool) {
            rec->record(tt, has_w ? w.data() : nullptr, a.data(), trace);
        }
    } tail{&rec};

    detail::PathResult res = detail::run_path(tbl, cfg, path_index, w0, tail);
    traj.collapsed = res.collapsed;
    traj.final_time = res.final_time;
    traj.steps = res.steps;
    traj.clamped_mass = res.clamped_mass;
    traj.clamp_events = res.clamp_events;
    if (res.collapsed) traj.terminal_point = HypercubePoint{res.terminal, nu.n()};
    return traj;
}

inline LocalizationTrajectory run_localization(const Measure& nu, const SdeConfig& cfg,
                                               std::int64_t stride = 1) {
    return run_localization(nu, cfg, Eigen::VectorXd::Zero(nu.n()), stride);
}

// Terminal point of one localization path started from tilt v; its law
// converges to tilt(nu, v) as dt -> 0.
inline HypercubePoint sample_tilted(const Measure& nu, const TiltVector& v, const SdeConfig& cfg,
                                    std::uint64_t path_index = 0) {
    validate(cfg);
    require(v.size() == nu.n(), "sample_tilted: tilt has wrong dimension");
    const detail::DriftTable tbl(nu);
    detail::NullObserver nobs;
    const detail::PathResult r = detail::run_path(tbl, cfg, path_index, v, nobs);
    return HypercubePoint{r.terminal, nu.n()};
}

struct SampleBatch {
    std::vector<std::int64_t> counts;  // 2^n terminal-point histogram
    std::int64_t truncated = 0;        // paths that hit t_max before collapsing
    std::int64_t paths = 0;

    Eigen::VectorXd empirical_mean(int n) const {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
        if (paths == 0) return m;
        for (std::uint32_t x = 0; x < counts.size(); x++)
            for (int i = 0; i < n; i++) m[i] += double(counts[x]) * sign_bit(x, i);
        return m / double(paths);
    }
};

namespace detail {

inline constexpr int kLanes = 8;

// Lane-parallel terminal sampler under the tilt scheme: kLanes paths advance
// in lockstep, each lane drawing from its own per-path engine, and a finished
// lane immediately takes the next unstarted index, so the vector width stays
// filled regardless of the collapse-time spread.  Per-step arithmetic is
// elementwise across lanes (product-form weights, no horizontal reductions)
// and the tally sees only commutative increments, so the histogram does not
// depend on lane scheduling.
inline void run_tilt_lanes(const DriftTable& tbl, const SdeConfig& cfg, const Eigen::VectorXd& w0,
                           std::uint64_t lo, std::uint64_t hi, SampleBatch& st) {
    constexpr int L = kLanes;
    const int n = tbl.n, s = tbl.s;
    const double sdt = std::sqrt(cfg.dt);
    const std::int64_t max_steps = std::llround(cfg.t_max / cfg.dt);
    const std::int64_t total = std::int64_t(hi - lo);

    // Start-of-path drift is shared by every lane.
    std::vector<double> a0(n), al(n), wl(n), pscr(s), escr(s);
    const double md0 = tbl.tilted_mean(w0.data(), a0.data(), pscr.data(), escr.data());

    auto snap = [&](const double* am, int stride, int l) {
        std::uint32_t t = 0;
        for (int i = 0; i < n; i++)
            if (am[std::size_t(i) * stride + l] > 0.0) t |= (1u << i);
        return t;
    };

    if (md0 < cfg.collapse_tol || max_steps == 0) {
        st.counts[snap(a0.data(), 1, 0)] += total;
        if (!(md0 < cfg.collapse_tol)) st.truncated += total;
        st.paths += total;
        return;
    }

    std::vector<double> w(std::size_t(n) * L), a(std::size_t(n) * L), g(std::size_t(n) * L, 0.0);
    std::vector<double> p(std::size_t(s) * L), earg(std::size_t(2 * n) * L);
    std::vector<double> z(L), md(L, 0.0), dtm(L, 0.0);
    std::vector<std::mt19937_64> eng(L);
    std::vector<std::int64_t> steps(L, 0);
    std::vector<char> active(L, 0);
    const ZigguratNormal& zig = ziggurat();
    std::uint64_t next = lo;
    int live = 0;

    auto fill = [&](int l) {
        if (next >= hi) return;
        eng[l] = path_engine(cfg.seed, next++);
        for (int i = 0; i < n; i++) {
            w[std::size_t(i) * L + l] = w0[i];
            a[std::size_t(i) * L + l] = a0[i];
        }
        steps[l] = 0;
        active[l] = 1;
        dtm[l] = cfg.dt;
        live++;
    };
    for (int l = 0; l < L; l++) fill(l);

    while (live > 0) {
        for (int l = 0; l < L; l++) {
            if (!active[l]) continue;
            std::mt19937_64& e = eng[l];
            for (int i = 0; i < n; i++) g[std::size_t(i) * L + l] = zig(e);
        }
        for (int i = 0; i < n; i++) {
            double* wi = &w[std::size_t(i) * L];
            const double* gi = &g[std::size_t(i) * L];
            const double* ai = &a[std::size_t(i) * L];
            for (int l = 0; l < L; l++) wi[l] += sdt * gi[l] + ai[l] * dtm[l];
        }
        // Product-form weights: p_k = w_k prod_i (lo_i + b_ik (hi_i - lo_i))
        // with lo = exp(-w_i - |w_i|), hi = exp(w_i - |w_i|), all in (0, 1].
        for (int i = 0; i < n; i++) {
            const double* wi = &w[std::size_t(i) * L];
            double* elo = &earg[std::size_t(2 * i) * L];
            double* ehi = &earg[std::size_t(2 * i + 1) * L];
            for (int l = 0; l < L; l++) {
                const double wv = wi[l], av = std::abs(wv);
                elo[l] = -wv - av;
                ehi[l] = wv - av;
            }
        }
        fast_exp_neg_inplace(earg.data(), 2 * n * L);
        for (int i = 0; i < n; i++) {
            const double* elo = &earg[std::size_t(2 * i) * L];
            double* ehi = &earg[std::size_t(2 * i + 1) * L];
            for (int l = 0; l < L; l++) ehi[l] -= elo[l];
        }
        for (int k = 0; k < s; k++) {
            double* pk = &p[std::size_t(k) * L];
            const double wk = tbl.wgt[k];
            for (int l = 0; l < L; l++) pk[l] = wk;
        }
        for (int i = 0; i < n; i++) {
            const double* elo = &earg[std::size_t(2 * i) * L];
            const double* ehi = &earg[std::size_t(2 * i + 1) * L];
            const double* b = &tbl.bpl[std::size_t(i) * s];
            for (int k = 0; k < s; k++) {
                double* pk = &p[std::size_t(k) * L];
                const double bk = b[k];
                for (int l = 0; l < L; l++) pk[l] *= elo[l] + bk * ehi[l];
            }
        }
        for (int l = 0; l < L; l++) z[l] = 0.0;
        for (int k = 0; k < s; k++) {
            const double* pk = &p[std::size_t(k) * L];
            for (int l = 0; l < L; l++) z[l] += pk[l];
        }
        for (int i = 0; i < n; i++) {
            const double* col = &tbl.sgn[std::size_t(i) * s];
            double* ai = &a[std::size_t(i) * L];
            for (int l = 0; l < L; l++) ai[l] = 0.0;
            for (int k = 0; k < s; k++) {
                const double* pk = &p[std::size_t(k) * L];
                const double ck = col[k];
                for (int l = 0; l < L; l++) ai[l] += ck * pk[l];
            }
        }
        for (int l = 0; l < L; l++) md[l] = 1.0 / z[l];
        for (int i = 0; i < n; i++) {
            double* ai = &a[std::size_t(i) * L];
            for (int l = 0; l < L; l++) ai[l] *= md[l];
        }
        for (int l = 0; l < L; l++) {
            if (!active[l]) continue;
            if (!(z[l] >= 1e-280)) {  // whole support underflowed: exact route
                for (int i = 0; i < n; i++) wl[i] = w[std::size_t(i) * L + l];
                md[l] = tbl.tilted_mean(wl.data(), al.data(), pscr.data(), escr.data());
                for (int i = 0; i < n; i++) a[std::size_t(i) * L + l] = al[i];
            } else {
                double worst = 0.0;
                for (int i = 0; i < n; i++) {
                    const double v = a[std::size_t(i) * L + l];
                    const double r = 1.0 - v * v;
                    if (r > worst) worst = r;
                }
                md[l] = worst;
            }
            steps[l]++;
            const bool collapsed = md[l] < cfg.collapse_tol;
            if (collapsed || steps[l] >= max_steps) {
                st.counts[snap(a.data(), L, l)]++;
                if (!collapsed) st.truncated++;
                st.paths++;
                live--;
                active[l] = 0;
                dtm[l] = 0.0;
                for (int i = 0; i < n; i++) g[std::size_t(i) * L + l] = 0.0;
                fill(l);
            }
        }
    }
}

}  // namespace detail

inline SampleBatch sample_tilted_batch(const Measure& nu, const TiltVector& v,
                                       const SdeConfig& cfg, std::int64_t num_paths,
                                       int threads = 1) {
    validate(cfg);
    require(v.size() == nu.n(), "sample_tilted_batch: tilt has wrong dimension");
    const detail::DriftTable tbl(nu);
    SampleBatch init;
    init.counts.assign(nu.size(), 0);
    auto merge = [](SampleBatch& a, const SampleBatch& b) {
        for (std::size_t i = 0; i < a.counts.size(); i++) a.counts[i] += b.counts[i];
        a.truncated += b.truncated;
        a.paths += b.paths;
    };
    if (cfg.scheme == Scheme::TiltEuler && tbl.s <= 4096) {
        return parallel_path_ranges(
            std::uint64_t(num_paths), threads, init,
            [&](SampleBatch& st, std::uint64_t lo, std::uint64_t hi) {
                detail::run_tilt_lanes(tbl, cfg, v, lo, hi, st);
            },
            merge);
    }
    return parallel_paths(
        num_paths, threads, init,
        [&](SampleBatch& st, std::uint64_t p) {
            detail::NullObserver nobs;
            const detail::PathResult r = detail::run_path(tbl, cfg, p, v, nobs);
            st.counts[r.terminal]++;
            if (!r.collapsed) st.truncated++;
            st.paths++;
        },
        merge);
}

// ---------------------------------------------------------------------------
// Report-style audits of the martingale structure and the trace decay bound.

namespace detail {

inline std::vector<std::int64_t> checkpoint_steps(const std::vector<double>& ts, double dt) {
    std::vector<std::int64_t> ks;
    for (double t : ts) ks.push_back(std::llround(t / dt));
    return ks;
}

}  // namespace detail

// Checks E[nu_t(A)] = nu(A) and E[a_t] = mean(nu) at fixed checkpoints.
inline AuditReport martingale_audit(const Measure& nu, const std::vector<std::uint32_t>& set_a,
                                    const SdeConfig& cfg_in, std::int64_t num_paths,
                                    int threads = 1) {
    SdeConfig cfg = cfg_in;
    const std::vector<double> ts = {0.1, 0.5, 1.0, 2.0};
    cfg.t_max = std::max(cfg.t_max, ts.back() + cfg.dt);
    validate(cfg);
    const detail::DriftTable tbl(nu);
    const std::vector<std::int64_t> ks = detail::checkpoint_steps(ts, cfg.dt);
    const int nc = static_cast<int>(ts.size());
    const int n = nu.n();

    // exact targets
    double nu_a = 0.0;
    std::vector<char> in_set(nu.size(), 0);
    for (std::uint32_t x : set_a) {
        require(x < nu.size(), "martingale_audit: set point out of range");
        if (!in_set[x]) nu_a += nu.weight(x);
        in_set[x] = 1;
    }
    const Eigen::VectorXd mean0 = nu.mean();
    std::vector<char> atom_in_set(tbl.s);
    for (int k = 0; k < tbl.s; k++) atom_in_set[k] = in_set[tbl.idx[k]];

    struct State {
        std::vector<double> sum_mass, sum_mass2;      // per checkpoint
        std::vector<Eigen::VectorXd> sum_a, sum_a2;   // per checkpoint
        std::int64_t paths = 0;
    };
    State init;
    init.sum_mass.assign(nc, 0.0);
    init.sum_mass2.assign(nc, 0.0);
    init.sum_a.assign(nc, Eigen::VectorXd::Zero(n));
    init.sum_a2.assign(nc, Eigen::VectorXd::Zero(n));

    struct Obs {
        const detail::DriftTable* tbl;
        const std::vector<char>* atom_in_set;
        const std::vector<std::int64_t>* ks;
        std::int64_t k = 0;
        int next = 0;
        double cur_mass = 0.0;
        Eigen::VectorXd cur_a;
        std::vector<double> mass_at;
        std::vector<Eigen::VectorXd> a_at;
        void step(double, const double*, const double* a, const double* p, double) {
            cur_mass = 0.0;
            for (int kk = 0; kk < tbl->s; kk++)
                if ((*atom_in_set)[kk]) cur_mass += p[kk];
            cur_a = Eigen::Map<const Eigen::VectorXd>(a, tbl->n);
            while (next < static_cast<int>(ks->size()) && k == (*ks)[next]) {
                mass_at[next] = cur_mass;
                a_at[next] = cur_a;
                next++;
            }
            k++;
        }
        void finish(double, bool) {
            // collapsed paths freeze: nu_t(A) and a_t stay at their final values
            while (next < static_cast<int>(ks->size())) {
                mass_at[next] = cur_mass;
                a_at[next] = cur_a;
                next++;
            }
        }
    };

    State st = parallel_paths(
        num_paths, threads, init,
        [&](State& s, std::uint64_t p) {
            Obs obs{&tbl, &atom_in_set, &ks};
            obs.cur_a = Eigen::VectorXd::Zero(n);
            obs.mass_at.assign(nc, 0.0);
            obs.a_at.assign(nc, Eigen::VectorXd::Zero(n));
            detail::run_path(tbl, cfg, p, Eigen::VectorXd::Zero(n), obs);
            for (int c = 0; c < nc; c++) {
                s.sum_mass[c] += obs.mass_at[c];
                s.sum_mass2[c] += obs.mass_at[c] * obs.mass_at[c];
                s.sum_a[c] += obs.a_at[c];
                s.sum_a2[c] += obs.a_at[c].cwiseProduct(obs.a_at[c]);
            }
            s.paths++;
        },
        [](State& a, const State& b) {
            for (std::size_t c = 0; c < a.sum_mass.size(); c++) {
                a.sum_mass[c] += b.sum_mass[c];
                a.sum_mass2[c] += b.sum_mass2[c];
                a.sum_a[c] += b.sum_a[c];
                a.sum_a2[c] += b.sum_a2[c];
            }
            a.paths += b.paths;
        });

    AuditReport rep;
    rep.name = "martingale";
    rep.params["paths"] = num_paths;
    rep.params["dt"] = cfg.dt;
    rep.params["seed"] = cfg.seed;
    rep.params["set_size"] = set_a.size();
    const double np = double(st.paths);
    for (int c = 0; c < nc; c++) {
        const double m = st.sum_mass[c] / np;
        const double var = std::max(0.0, st.sum_mass2[c] / np - m * m);
        const double se = std::sqrt(var / np);
        rep.check_close("E nu_t(A) = nu(A) at t=" + std::to_string(ts[c]), m, nu_a,
                        4.0 * se + 1e-12);
        // worst-coordinate drift of the mean martingale
        double worst_dev = 0.0, worst_se = 0.0, worst_margin = -1e300;
        for (int i = 0; i < n; i++) {
            const double mi = st.sum_a[c][i] / np;
            const double vi = std::max(0.0, st.sum_a2[c][i] / np - mi * mi);
            const double sei = std::sqrt(vi / np);
            const double dev = std::abs(mi - mean0[i]);
            if (dev - 4.0 * sei > worst_margin) {
                worst_margin = dev - 4.0 * sei;
                worst_dev = dev;
                worst_se = sei;
            }
        }
        rep.check_le("E a_t drift (worst coordinate) at t=" + std::to_string(ts[c]), worst_dev,
                     4.0 * worst_se, 1e-12);
    }
    rep.diagnostics["nu_a_exact"] = nu_a;
    rep.diagnostics["paths"] = np;
    return rep;
}

// Checks E[Tr A_t] <= n e^{-t/8} at a grid of times, plus the pathwise
// bookkeeping diag(A_t) = 1 - a_t^2.
inline AuditReport trace_decay_audit(const Measure& nu, const SdeConfig& cfg_in,
                                     std::int64_t num_paths,
                                     std::vector<double> ts = {1.0, 2.0, 4.0, 8.0},
                                     int threads = 1) {
    SdeConfig cfg = cfg_in;
    cfg.t_max = std::max(cfg.t_max, ts.back() + cfg.dt);
    validate(cfg);
    const detail::DriftTable tbl(nu);
    const std::vector<std::int64_t> ks = detail::checkpoint_steps(ts, cfg.dt);
    const int nc = static_cast<int>(ts.size());
    const int n = nu.n();

    struct State {
        std::vector<double> sum_tr, sum_tr2;
        double max_bookkeeping_dev = 0.0;
        std::int64_t paths = 0;
    };
    State init;
    init.sum_tr.assign(nc, 0.0);
    init.sum_tr2.assign(nc, 0.0);

    struct Obs {
        const detail::DriftTable* tbl;
        const std::vector<std::int64_t>* ks;
        std::int64_t k = 0;
        int next = 0;
        double cur_tr = 0.0;
        double book_dev = 0.0;
        std::vector<double> tr_at;
        void step(double, const double*, const double* a, const double* p, double trace) {
            cur_tr = trace;
            bool at_checkpoint = false;
            while (next < static_cast<int>(ks->size()) && k == (*ks)[next]) {
                tr_at[next] = trace;
                at_checkpoint = true;
                next++;
            }
            if (at_checkpoint) {
                // independent second-moment route for diag(A): E(x_i - a_i)^2
                for (int i = 0; i < tbl->n; i++) {
                    const double* col = &tbl->sgn[std::size_t(i) * tbl->s];
                    double m2 = 0.0;
                    for (int kk = 0; kk < tbl->s; kk++) {
                        const double d = col[kk] - a[i];
                        m2 += p[kk] * d * d;
                    }
                    book_dev = std::max(book_dev, std::abs(m2 - (1.0 - a[i] * a[i])));
                }
            }
            k++;
        }
        void finish(double, bool) {
            while (next < static_cast<int>(ks->size())) {
                tr_at[next] = cur_tr;
                next++;
            }
        }
    };

    State st = parallel_paths(
        num_paths, threads, init,
        [&](State& s, std::uint64_t p) {
            Obs obs{&tbl, &ks};
            obs.tr_at.assign(nc, 0.0);
            detail::run_path(tbl, cfg, p, Eigen::VectorXd::Zero(n), obs);
            for (int c = 0; c < nc; c++) {
                s.sum_tr[c] += obs.tr_at[c];
                s.sum_tr2[c] += obs.tr_at[c] * obs.tr_at[c];
            }
            s.max_bookkeeping_dev = std::max(s.max_bookkeeping_dev, obs.book_dev);
            s.paths++;
        },
        [](State& a, const State& b) {
            for (std::size_t c = 0; c < a.sum_tr.size(); c++) {
                a.sum_tr[c] += b.sum_tr[c];
                a.sum_tr2[c] += b.sum_tr2[c];
            }
            a.max_bookkeeping_dev = std::max(a.max_bookkeeping_dev, b.max_bookkeeping_dev);
            a.paths += b.paths;
        });

    AuditReport rep;
    rep.name = "trace_decay";
    rep.params["paths"] = num_paths;
    rep.params["dt"] = cfg.dt;
    rep.params["seed"] = cfg.seed;
    const double np = double(st.paths);
    rep.check_le("Tr A_0 <= n", nu.covariance().trace(), double(n), 1e-12);
    for (int c = 0; c < nc; c++) {
        const double m = st.sum_tr[c] / np;
        const double var = std::max(0.0, st.sum_tr2[c] / np - m * m);
        const double se = std::sqrt(var / np);
        rep.check_le("E Tr A_t <= n exp(-t/8) at t=" + std::to_string(ts[c]), m,
                     n * std::exp(-ts[c] / 8.0), 4.0 * se + 1e-12);
        rep.diagnostics["se_t" + std::to_string(c)] = se;
    }
    rep.check_le("pathwise diag(A) = 1 - a^2 bookkeeping", st.max_bookkeeping_dev, 1e-9);
    rep.diagnostics["paths"] = np;
    return rep;
}

// Trajectory CSV: optional manifest comment line, then a header row.
inline void write_trajectory_csv(std::ostream& os, const LocalizationTrajectory& traj, int n,
                                 const std::string& manifest_line = "") {
    if (!manifest_line.empty()) os << "# manifest: " << manifest_line << "\n";
    os << "t";
    for (int i = 1; i <= n; i++) os << ",w_" << i;
    for (int i = 1; i <= n; i++) os << ",a_" << i;
    os << ",trace_cov\n";
    os.precision(17);
    for (std::size_t k = 0; k < traj.times.size(); k++) {
        os << traj.times[k];
        for (int i = 0; i < n; i++) {
            os << ",";
            if (k < traj.tilts.size())
                os << traj.tilts[k][i];
            else
                os << "nan";
        }
        for (int i = 0; i < n; i++) os << "," << traj.means[k][i];
        os << "," << traj.trace_cov[k] << "\n";
    }
}

}  // namespace cubeloc
