// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure.  Tolerances are pinned here and nowhere else.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "helpers.hpp"

using namespace cubeloc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

// --- 1. cumulant identities against central finite differences ------------

bool criterion_cumulants(std::string& detail) {
    const auto t0 = Clock::now();
    std::mt19937_64 eng(101);
    double max_grad = 0.0, max_hess = 0.0;
    for (int m = 0; m < 50; m++) {
        const int n = 1 + m % 8;
        const Measure nu = testutil::random_measure(eng, n, m % 3 != 0);
        for (int k = 0; k < 20; k++) {
            const TiltVector w = testutil::random_tilt(eng, n, 3.0);
            const TiltedEnsemble e = tilted_ensemble(nu, w, true);
            max_grad = std::max(max_grad,
                                (e.a - testutil::fd_gradient(nu, w)).lpNorm<Eigen::Infinity>());
            max_hess = std::max(
                max_hess, (e.cov - testutil::fd_hessian(nu, w)).cwiseAbs().maxCoeff());
        }
    }
    const double secs = seconds_since(t0);
    detail = "max grad err " + fmt(max_grad) + ", max hess err " + fmt(max_hess) + ", " +
             fmt(secs) + " s";
    return max_grad <= 1e-6 && max_hess <= 1e-4 && secs < 30.0;
}

// --- 2. terminal law of the localization sampler ---------------------------

bool criterion_terminal_law(std::string& detail) {
    const auto t0 = Clock::now();
    std::vector<std::pair<std::string, Measure>> cases;
    cases.emplace_back("uniform3", make_uniform(3));
    cases.emplace_back("two_point3", make_two_point(3));
    cases.emplace_back("slice4", make_slice(4, 0));
    cases.emplace_back("ising3", testutil::corpus_ising3());

    SdeConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 32.0;
    // Stopping at max_i(1 - a_i^2) < 1e-4 leaves each undecided coordinate
    // carrying at most 2.5e-5 of sign mass, so the snap adds < 1e-4 TV.
    cfg.collapse_tol = 1e-4;

    std::mt19937_64 eng(202);
    double max_tv = 0.0;
    std::int64_t truncated = 0;
    bool ok = true;
    std::uint64_t seed = 1;
    for (const auto& [name, nu] : cases) {
        for (int k = 0; k < 3; k++) {
            const TiltVector v = testutil::random_tilt(eng, nu.n(), 2.0);
            cfg.seed = seed++;
            const SampleBatch batch = sample_tilted_batch(nu, v, cfg, 100000, 1);
            std::vector<double> counts(batch.counts.size());
            for (std::size_t x = 0; x < counts.size(); x++) counts[x] = double(batch.counts[x]);
            const double tv = tv_distance(Measure(nu.n(), counts), tilt(nu, v));
            max_tv = std::max(max_tv, tv);
            truncated += batch.truncated;
            if (tv > 0.02) ok = false;
        }
    }
    const double secs = seconds_since(t0);
    detail = "max TV " + fmt(max_tv) + " over 12 runs, " + std::to_string(truncated) +
             " truncated paths, " + fmt(secs) + " s";
    return ok && secs < 300.0;
}

// --- 3. variance decomposition ---------------------------------------------

bool criterion_variance_decomposition(std::string& detail) {
    struct Pair {
        std::string name;
        Measure nu;
        TestFunction phi;
    };
    auto sum_fn = [](int n) {
        TestFunction f;
        f.n = n;
        f.values.resize(std::size_t(1) << n);
        for (std::uint32_t x = 0; x < f.values.size(); x++) {
            double s = 0.0;
            for (int i = 0; i < n; i++) s += sign_bit(x, i);
            f.values[x] = s;
        }
        f.declared_lipschitz = 1.0;
        return f;
    };
    std::vector<Pair> pairs;
    pairs.push_back({"uniform3/sum", make_uniform(3), sum_fn(3)});
    pairs.push_back({"two_point4/sum", make_two_point(4), sum_fn(4)});
    pairs.push_back({"product3/sum", make_product(3, {0.2, -0.5, 0.9}), sum_fn(3)});
    pairs.push_back({"slice4/dist", make_slice(4, 0), hamming_distance_to_set(4, {0b0011})});
    pairs.push_back({"ising3/dist", testutil::corpus_ising3(), hamming_distance_to_set(3, {0, 7})});

    bool ok = true;
    std::string worst;
    double sharp = 0.0;
    std::uint64_t seed = 31;
    for (const Pair& p : pairs) {
        SdeConfig cfg;
        cfg.seed = seed++;
        const AuditReport rep =
            variance_decomposition_audit(p.nu, p.phi, {0.5, 2.0}, 4000, cfg, 1);
        if (!rep.passed()) {
            ok = false;
            worst += " " + p.name;
        }
        if (p.name == "two_point4/sum") sharp = rep.diagnostics.at("exact_variance");
    }
    detail = "5 pairs at t in {0.5,2}, sharp case Var = " + fmt(sharp);
    if (!ok) detail += ", failing:" + worst;
    return ok && std::abs(sharp - 16.0) <= 1e-12;
}

// --- 4. covariance trace decay ---------------------------------------------

bool criterion_trace_decay(std::string& detail) {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string failing;
    std::uint64_t seed = 41;
    for (const auto& [name, nu] : testutil::corpus()) {
        SdeConfig cfg;
        cfg.seed = seed++;
        cfg.t_max = 8.0 + cfg.dt;
        const AuditReport rep = trace_decay_audit(nu, cfg, 10000, {1.0, 2.0, 4.0, 8.0}, 1);
        if (!rep.passed()) {
            ok = false;
            failing += " " + name;
        }
    }
    detail = "8 corpus measures, t in {1,2,4,8}, " + fmt(seconds_since(t0)) + " s";
    if (!ok) detail += ", failing:" + failing;
    return ok;
}

// --- 5. transport bound and exact W1 cross-check ---------------------------

bool criterion_transport_bound(std::string& detail) {
    std::mt19937_64 eng(505);
    bool ok = true;
    int failures = 0;
    double worst_ratio = 0.0;
    for (int k = 0; k < 100; k++) {
        Measure nu = make_uniform(2);
        double beta = 1.0;
        if (k % 2 == 0) {
            nu = make_uniform(2 + int(eng() % 7));
        } else {
            const int m = 4 + 2 * int(eng() % 3);
            nu = make_slice(m, 0);
            beta = 2.0;
        }
        const int n = nu.n();
        const TiltVector v = testutil::random_tilt(eng, n, 1.5);
        const TiltVector theta =
            Eigen::Map<const Eigen::VectorXd>(random_unit_vector(eng, n).data(), n);
        const double eps = 0.001 + 0.098 * uniform01(eng);
        CouplingConfig cfg;
        const AuditReport rep = transport_bound_audit(nu, beta, v, theta, eps, cfg, 0);
        worst_ratio = std::max(worst_ratio, rep.diagnostics.at("ratio"));
        if (!rep.passed()) {
            ok = false;
            failures++;
        }
    }

    double max_gap = 0.0;
    for (int k = 0; k < 40; k++) {
        const int n = 1 + int(eng() % 5);
        const Measure p = testutil::random_measure(eng, n, k % 2 == 0);
        const Measure q = testutil::random_measure(eng, n, k % 3 != 0);
        const W1CrossCheck cc = w1_cross_check(p, q);
        max_gap = std::max(max_gap, cc.gap);
        if (cc.gap > 1e-8) ok = false;
    }
    detail = "100 bound cases (worst lhs/rhs " + fmt(worst_ratio) + ", " +
             std::to_string(failures) + " failures), 40 dual checks (max gap " + fmt(max_gap) +
             ")";
    return ok;
}

// --- 6. hitting lemma --------------------------------------------------------

bool criterion_hitting(std::string& detail) {
    bool ok = true;
    std::string parts;
    for (double eps : {0.05, 0.1}) {
        const AuditReport rep = hitting_lemma_audit(eps, 100000, 61, 0.01, 1);
        if (!rep.passed()) ok = false;
        for (const Assertion& a : rep.assertions)
            if (a.op == "close")
                parts += " eps " + fmt(eps) + ": |emp - exact| = " + fmt(std::abs(a.lhs - a.rhs));
    }
    detail = "s in {0.25,1,4};" + parts;
    return ok;
}

// --- 7. entropy identity -----------------------------------------------------

bool criterion_entropy_identity(std::string& detail) {
    const auto t0 = Clock::now();
    const std::vector<std::string> chosen = {"uniform2",   "two_point3", "product3",
                                             "ising3",     "slice4",     "slice6"};
    bool ok = true;
    std::string failing;
    std::uint64_t seed = 71;
    for (const auto& [name, nu] : testutil::corpus()) {
        if (std::find(chosen.begin(), chosen.end(), name) == chosen.end()) continue;
        SdeConfig cfg;
        cfg.seed = seed++;
        const AuditReport rep =
            entropy_identity_audit(nu, 512, suggested_t_max(nu.n()), cfg, 1);
        if (!rep.passed()) {
            ok = false;
            failing += " " + name;
        }
    }
    detail = "6 corpus measures, 512 paths each, " + fmt(seconds_since(t0)) + " s";
    if (!ok) detail += ", failing:" + failing;
    return ok;
}

// --- 8. entropy theorem: marginal sum vs beta * joint ------------------------

bool criterion_entropy_theorem(std::string& detail) {
    bool ok = true;
    double lhs8 = 0.0, rhs8 = 0.0;
    for (int n : {4, 6, 8}) {
        const AuditReport rep = entropy_theorem_check(make_slice(n, 0), 2.0);
        if (!rep.passed()) ok = false;
        if (n == 8) {
            lhs8 = rep.diagnostics.at("marginal_entropy_sum");
            rhs8 = 2.0 * rep.diagnostics.at("entropy");
        }
    }
    for (const Measure& p : {make_uniform(4), make_product(3, {0.2, -0.5, 0.9})}) {
        const AuditReport rep = entropy_theorem_check(p, 1.0);
        if (!rep.passed()) ok = false;
        const double gap = std::abs(rep.diagnostics.at("marginal_entropy_sum") -
                                    rep.diagnostics.at("entropy"));
        if (gap > 1e-10) ok = false;
    }
    detail = "slice(8,0): " + fmt(lhs8) + " <= " + fmt(rhs8) + "; product equality to 1e-10";
    return ok && std::abs(lhs8 - 8.0 * std::log(2.0)) <= 1e-10 &&
           std::abs(rhs8 - 2.0 * std::log(70.0)) <= 1e-10;
}

// --- 9. variance exponent fit and negative control ---------------------------

bool criterion_exponent(std::string& detail) {
    MainTheoremConfig cfg;
    cfg.proof_chain = false;
    cfg.family_size = 48;
    cfg.seed = 91;
    const AuditReport rep = main_theorem_audit(make_slice(4, 0), 2.0, {}, cfg);
    const double slope = rep.diagnostics.at("fitted_exponent");
    double min_ratio = 1.0;
    for (int m : {4, 8, 16})
        min_ratio = std::min(min_ratio, rep.diagnostics.at("hadamard_ratio_n_" + std::to_string(m)));
    detail = "fitted exponent " + fmt(slope) + " <= 1.95, hadamard ratio >= " + fmt(min_ratio);
    return rep.passed() && slope <= 1.95 && min_ratio >= 0.05;
}

// --- 10. tilt/density identity and harmonic comparison -----------------------

bool criterion_g_identity(std::string& detail) {
    std::mt19937_64 eng(1001);
    double max_res = 0.0;
    for (int k = 0; k < 1000; k++) {
        const int n = 1 + k % 6;
        const Measure nu = testutil::random_measure(eng, n, k % 4 != 0);
        const TiltVector w = testutil::random_tilt(eng, n, 3.0);
        const GIdentityResult r = g_identity_check(nu, w);
        max_res = std::max(max_res, r.residual);
    }
    bool ok = max_res <= 1e-8;

    int harmonic_pass = 0, harmonic_total = 0;
    for (const auto& [name, nu] : testutil::corpus()) {
        harmonic_total++;
        if (fact_harmonic_audit(nu).pass) harmonic_pass++;
    }
    detail = "max residual " + fmt(max_res) + " over 1000 draws; harmonic comparison " +
             std::to_string(harmonic_pass) + "/" + std::to_string(harmonic_total);
    return ok && harmonic_pass == harmonic_total;
}

// --- 11. determinism ----------------------------------------------------------

bool criterion_determinism(std::string& detail) {
    RunManifest man;
    man.command = "acceptance determinism";
    man.seed = 7;

    auto canon = [&](const AuditReport& rep, double wall) {
        RunManifest m = man;
        m.wall_clock_seconds = wall;
        return canonical_json(report_with_manifest(rep, m));
    };

    int same = 0, total = 0;
    auto compare = [&](const AuditReport& a, const AuditReport& b) {
        total++;
        if (canon(a, 1.0) == canon(b, 2.0)) same++;
    };

    const Measure u3 = make_uniform(3);
    SdeConfig cfg;
    cfg.seed = 7;
    cfg.t_max = 8.0 + cfg.dt;

    compare(trace_decay_audit(u3, cfg, 400, {1.0, 2.0, 4.0, 8.0}, 1),
            trace_decay_audit(u3, cfg, 400, {1.0, 2.0, 4.0, 8.0}, 2));

    std::vector<std::uint32_t> set;
    for (std::uint32_t x = 0; x < 8; x++)
        if (x & 1u) set.push_back(x);
    SdeConfig mcfg;
    mcfg.seed = 11;
    mcfg.t_max = 4.0;
    compare(martingale_audit(u3, set, mcfg, 300, 1), martingale_audit(u3, set, mcfg, 300, 2));

    TestFunction sum3;
    sum3.n = 3;
    sum3.values.resize(8);
    for (std::uint32_t x = 0; x < 8; x++)
        sum3.values[x] = sign_bit(x, 0) + sign_bit(x, 1) + sign_bit(x, 2);
    SdeConfig vcfg;
    vcfg.seed = 13;
    compare(variance_decomposition_audit(u3, sum3, {0.5}, 400, vcfg, 1),
            variance_decomposition_audit(u3, sum3, {0.5}, 400, vcfg, 2));

    compare(hitting_lemma_audit(0.1, 20000, 3, 0.01, 1), hitting_lemma_audit(0.1, 20000, 3, 0.01, 2));

    CouplingConfig ccfg;
    ccfg.seed = 17;
    compare(supermartingale_audit(u3, 1.0, 0.1, 300, ccfg, 1),
            supermartingale_audit(u3, 1.0, 0.1, 300, ccfg, 2));

    detail = std::to_string(same) + "/" + std::to_string(total) +
             " audits byte-identical across reruns and thread counts";
    return same == total;
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Entry> criteria = {
        {"cumulant identities", criterion_cumulants},
        {"terminal law", criterion_terminal_law},
        {"variance decomposition", criterion_variance_decomposition},
        {"trace decay", criterion_trace_decay},
        {"transport bound", criterion_transport_bound},
        {"hitting lemma", criterion_hitting},
        {"entropy identity", criterion_entropy_identity},
        {"entropy theorem", criterion_entropy_theorem},
        {"variance exponent", criterion_exponent},
        {"density identity", criterion_g_identity},
        {"determinism", criterion_determinism},
    };

    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); k++) {
        std::string detail;
        bool pass = false;
        try {
            pass = criteria[k].fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (!pass) failed++;
        std::printf("criterion %zu (%s): %s (%s)\n", k + 1, criteria[k].name,
                    pass ? "PASS" : "FAIL", detail.c_str());
        std::fflush(stdout);
    }
    if (failed == 0)
        std::printf("overall: PASS (11/11)\n");
    else
        std::printf("overall: FAIL (%d of 11 criteria failed)\n", failed);
    return failed == 0 ? 0 : 1;
}
