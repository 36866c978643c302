#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"

using namespace cubeloc;

namespace {

TestFunction coordinate_sum(int n) {
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
}

}  // namespace

TEST_CASE("variance decomposes into quadratic variation plus remaining variance") {
    SdeConfig cfg;
    cfg.seed = 701;
    const Measure u3 = make_uniform(3);
    const AuditReport rep =
        variance_decomposition_audit(u3, coordinate_sum(3), {0.0, 1.0}, 2500, cfg, 2);
    INFO(canonical_json(rep.to_json()));
    REQUIRE(rep.passed());
    REQUIRE(std::abs(rep.diagnostics.at("exact_variance") - 3.0) <= 1e-12);
}

TEST_CASE("variance decomposition survives the sharp two point case") {
    SdeConfig cfg;
    cfg.seed = 702;
    const Measure tp = make_two_point(4);
    const AuditReport rep =
        variance_decomposition_audit(tp, coordinate_sum(4), {0.5, 2.0}, 2500, cfg, 2);
    INFO(canonical_json(rep.to_json()));
    REQUIRE(rep.passed());
    REQUIRE(std::abs(rep.diagnostics.at("exact_variance") - 16.0) <= 1e-12);
}

TEST_CASE("tilted variance of a contraction is controlled by the live coordinates") {
    std::mt19937_64 eng(711);
    const int n = 5;
    std::vector<Measure> measures;
    for (int k = 0; k < 10; k++) measures.push_back(testutil::random_measure(eng, n, k % 2 == 0));
    std::vector<TiltVector> tilts;
    for (int k = 0; k < 50; k++) tilts.push_back(testutil::random_tilt(eng, n, 2.5));
    for (int f = 0; f < 100; f++) {
        const TestFunction phi = testutil::random_lipschitz(eng, n);
        const AuditReport rep = smalltail_check(measures[f % measures.size()], phi, tilts);
        REQUIRE(rep.passed());
        REQUIRE(rep.assertions.size() == tilts.size());
    }
    TestFunction too_steep = coordinate_sum(2);
    for (double& v : too_steep.values) v *= 3.0;
    REQUIRE_THROWS_AS(smalltail_check(make_uniform(2), too_steep, {TiltVector::Zero(2)}),
                      DomainError);
}

TEST_CASE("proof chain dominates the worst variance in the family") {
    MainTheoremConfig cfg;
    cfg.num_paths = 6;
    cfg.seed = 721;
    cfg.threads = 2;
    cfg.exponent_fit = false;
    cfg.sampled_directions = 16;
    const Measure s = make_slice(4, 0);
    const std::vector<TestFunction> family = detail::random_distance_family(4, 12, 5);
    const AuditReport rep = main_theorem_audit(s, 2.0, family, cfg);
    INFO(canonical_json(rep.to_json()));
    REQUIRE(rep.passed());
    REQUIRE(rep.diagnostics.at("chain_mc_mean") > 0.0);
}

TEST_CASE("variance exponent stays below two and hadamard rows saturate") {
    MainTheoremConfig cfg;
    cfg.proof_chain = false;
    cfg.family_size = 24;
    cfg.seed = 722;
    const AuditReport rep = main_theorem_audit(make_slice(4, 0), 2.0, {}, cfg);
    INFO(canonical_json(rep.to_json()));
    REQUIRE(rep.passed());
    REQUIRE(rep.diagnostics.at("fitted_exponent") < 1.95);
    for (int m : {4, 8, 16})
        REQUIRE(rep.diagnostics.at("hadamard_ratio_n_" + std::to_string(m)) >= 0.05);
}

TEST_CASE("localization reconstructs the entropy of small measures") {
    SdeConfig cfg;
    cfg.seed = 731;
    const AuditReport one = entropy_identity_audit(make_uniform(1), 400, suggested_t_max(1), cfg, 2);
    INFO(canonical_json(one.to_json()));
    REQUIRE(one.passed());
    REQUIRE(std::abs(one.diagnostics.at("exact_entropy") - std::log(2.0)) <= 1e-12);

    std::mt19937_64 eng(733);
    const Measure ising = testutil::random_ising(eng, 3, 0.4);
    cfg.seed = 732;
    const AuditReport three = entropy_identity_audit(ising, 320, suggested_t_max(3), cfg, 2);
    INFO(canonical_json(three.to_json()));
    REQUIRE(three.passed());
}

TEST_CASE("entropy comparison for products is an equality") {
    const AuditReport u = entropy_theorem_check(make_uniform(4), 1.0);
    REQUIRE(u.passed());
    REQUIRE(std::abs(u.diagnostics.at("entropy") - 4.0 * std::log(2.0)) <= 1e-12);
    REQUIRE(std::abs(u.diagnostics.at("marginal_entropy_sum") - 4.0 * std::log(2.0)) <= 1e-12);

    const AuditReport p = entropy_theorem_check(make_product(3, {0.2, -0.5, 0.9}), 1.0);
    REQUIRE(p.passed());
    REQUIRE(std::abs(p.diagnostics.at("entropy") - p.diagnostics.at("marginal_entropy_sum")) <=
            1e-12);
}

TEST_CASE("entropy comparison for slices at beta two") {
    const AuditReport s6 = entropy_theorem_check(make_slice(6, 0), 2.0);
    REQUIRE(s6.passed());
    REQUIRE(std::abs(s6.diagnostics.at("entropy") - std::log(20.0)) <= 1e-12);
    REQUIRE(std::abs(s6.diagnostics.at("marginal_entropy_sum") - 6.0 * std::log(2.0)) <= 1e-12);

    const AuditReport s8 = entropy_theorem_check(make_slice(8, 0), 2.0);
    REQUIRE(s8.passed());
    REQUIRE(std::abs(s8.diagnostics.at("marginal_entropy_sum") - 8.0 * std::log(2.0)) <= 1e-12);
    REQUIRE(std::abs(s8.diagnostics.at("entropy") - std::log(70.0)) <= 1e-12);
}

TEST_CASE("products make the quadratic drift term an equality") {
    std::mt19937_64 eng(741);
    const Measure p = make_product(4, {0.3, -0.2, 0.7, 0.0});
    for (int trial = 0; trial < 10; trial++) {
        const TiltVector w = testutil::random_tilt(eng, 4, 2.0);
        const Eigen::MatrixXd a = tilt_cov(p, w);
        double quad = 0.0;
        for (int i = 0; i < 4; i++)
            for (int j = 0; j < 4; j++)
                if (a(j, j) > 1e-13) quad += a(i, j) * a(i, j) / a(j, j);
        REQUIRE(std::abs(quad - a.trace()) <= 1e-10);
    }
}

TEST_CASE("marginal entropy sum follows its drift identity along localization") {
    SdeConfig cfg;
    cfg.seed = 751;
    const AuditReport u = h_drift_audit(make_uniform(2), 1200, cfg, std::nullopt, 2);
    INFO(canonical_json(u.to_json()));
    REQUIRE(u.passed());

    cfg.seed = 752;
    const AuditReport s = h_drift_audit(make_slice(4, 0), 1200, cfg, 2.0, 2);
    INFO(canonical_json(s.to_json()));
    REQUIRE(s.passed());
}

TEST_CASE("rayleigh corollary audit runs end to end on a slice") {
    MainTheoremConfig cfg;
    cfg.num_paths = 4;
    cfg.sampled_directions = 8;
    cfg.seed = 761;
    cfg.threads = 2;
    const AuditReport rep = rayleigh_corollary_audit(make_slice(6, 0), cfg);
    INFO(canonical_json(rep.to_json()));
    REQUIRE(rep.passed());
    REQUIRE_THROWS_AS(rayleigh_corollary_audit(make_two_point(3), cfg), DomainError);
}

TEST_CASE("audit reports serialize with sorted keys and strip wall clock") {
    AuditReport rep;
    rep.name = "demo";
    rep.check_le("a le b", 1.0, 2.0);
    RunManifest man;
    man.command = "demo";
    man.seed = 7;
    man.wall_clock_seconds = 123.0;
    const std::string canon = canonical_json(report_with_manifest(rep, man));
    REQUIRE(canon.find("wall_clock_seconds") == std::string::npos);
    REQUIRE(canon.find("\"demo\"") != std::string::npos);
    const nlohmann::json parsed = nlohmann::json::parse(canon);
    REQUIRE(parsed["assertions"][0]["pass"].get<bool>());
    REQUIRE(parsed.contains("manifest"));
}
