#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "helpers.hpp"

using namespace cubeloc;

TEST_CASE("sde config validation") {
    SdeConfig bad;
    bad.dt = 0.0;
    REQUIRE_THROWS_AS(validate(bad), SpecError);
    bad.dt = 1e-3;
    bad.t_max = -1.0;
    REQUIRE_THROWS_AS(validate(bad), SpecError);
    REQUIRE(suggested_t_max(4) == Catch::Approx(16.0 * std::log(4.0) + 40.0).margin(1e-12));
    REQUIRE(suggested_t_max(1) == Catch::Approx(16.0 * std::log(2.0) + 40.0).margin(1e-12));
}

TEST_CASE("tilt step matches the hand-computed euler update") {
    const Measure u1 = make_uniform(1);
    TiltVector w(1);
    w << 0.5;
    const TiltVector next = step_tilt(u1, w, 0.01, Eigen::VectorXd::Zero(1));
    REQUIRE(std::abs(next[0] - (0.5 + std::tanh(0.5) * 0.01)) <= 1e-15);

    // noise enters with the sqrt(dt) scaling
    Eigen::VectorXd g(1);
    g << 2.0;
    const TiltVector noisy = step_tilt(u1, w, 0.01, g);
    REQUIRE(std::abs(noisy[0] - (0.5 + std::tanh(0.5) * 0.01 + 2.0 * 0.1)) <= 1e-15);
}

TEST_CASE("measure step conserves mass before renormalization") {
    std::mt19937_64 eng(211);
    const Measure nu = testutil::random_measure(eng, 3);
    std::vector<double> F(nu.size(), 1.0);
    Eigen::VectorXd a = nu.mean();
    for (int k = 0; k < 50; k++) {
        Eigen::VectorXd g(3);
        for (int i = 0; i < 3; i++) g[i] = standard_normal(eng);
        StepDiagnostics diag;
        F = step_measure(nu, F, a, 1e-3, g, &diag);
        REQUIRE(std::abs(diag.mass_before_renorm - 1.0) <= 0.2);
        double mass = 0.0;
        for (std::uint32_t x = 0; x < nu.size(); x++) mass += F[x] * nu.weight(x);
        REQUIRE(std::abs(mass - 1.0) <= 1e-12);
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
        for (std::uint32_t x = 0; x < nu.size(); x++)
            for (int i = 0; i < 3; i++) mean[i] += F[x] * nu.weight(x) * sign_bit(x, i);
        a = mean;
    }
    // a huge shock triggers the clamp path
    Eigen::VectorXd big(3);
    big << 60.0, 0.0, 0.0;
    StepDiagnostics diag;
    step_measure(nu, std::vector<double>(nu.size(), 1.0), Eigen::VectorXd::Zero(3), 1e-3, big,
                 &diag);
    REQUIRE(diag.clamped);
    REQUIRE(diag.clamped_mass > 0.0);
}

TEST_CASE("trajectories record monotone times and collapse") {
    SdeConfig cfg;
    cfg.seed = 5;
    cfg.t_max = suggested_t_max(3);
    const Measure nu = make_uniform(3);
    const LocalizationTrajectory traj = run_localization(nu, cfg, 10);
    REQUIRE(traj.times.front() == 0.0);
    for (std::size_t k = 1; k < traj.times.size(); k++)
        REQUIRE(traj.times[k] > traj.times[k - 1]);
    REQUIRE(traj.times.back() == Catch::Approx(traj.final_time).margin(1e-12));
    REQUIRE(traj.means.size() == traj.times.size());
    REQUIRE(traj.trace_cov.size() == traj.times.size());
    if (traj.collapsed) {
        REQUIRE(traj.terminal_point.has_value());
        REQUIRE(traj.trace_cov.back() <= 3.0 * cfg.collapse_tol);
    }
}

TEST_CASE("localization is deterministic in the seed and path index") {
    SdeConfig cfg;
    cfg.seed = 42;
    cfg.t_max = 2.0;
    const Measure nu = make_uniform(2);
    const LocalizationTrajectory a = run_localization(nu, cfg, Eigen::VectorXd::Zero(2), 1, 7);
    const LocalizationTrajectory b = run_localization(nu, cfg, Eigen::VectorXd::Zero(2), 1, 7);
    REQUIRE(a.times == b.times);
    for (std::size_t k = 0; k < a.tilts.size(); k++) REQUIRE(a.tilts[k] == b.tilts[k]);
    const LocalizationTrajectory c = run_localization(nu, cfg, Eigen::VectorXd::Zero(2), 1, 8);
    REQUIRE(a.tilts.back() != c.tilts.back());
}

TEST_CASE("csv export has the documented shape") {
    SdeConfig cfg;
    cfg.seed = 1;
    cfg.t_max = 0.05;
    const LocalizationTrajectory traj = run_localization(make_uniform(2), cfg, 1);
    std::ostringstream os;
    write_trajectory_csv(os, traj, 2, "{}");
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    REQUIRE(line == "# manifest: {}");
    std::getline(is, line);
    REQUIRE(line == "t,w_1,w_2,a_1,a_2,trace_cov");
    std::size_t rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) rows++;
    REQUIRE(rows == traj.times.size());
}

TEST_CASE("terminal sample frequencies follow the tilted measure") {
    const Measure u1 = make_uniform(1);
    TiltVector v(1);
    v << 1.0;
    SdeConfig cfg;
    cfg.seed = 3;
    cfg.t_max = suggested_t_max(1);
    const SampleBatch batch = sample_tilted_batch(u1, v, cfg, 20000, 2);
    REQUIRE(batch.paths == 20000);
    REQUIRE(batch.truncated == 0);
    const double se = std::sqrt((1.0 - std::tanh(1.0) * std::tanh(1.0)) / 20000.0);
    REQUIRE(std::abs(batch.empirical_mean(1)[0] - std::tanh(1.0)) <= 4.0 * se);
}

TEST_CASE("terminal law is close in tv for a planted tilt") {
    const Measure nu = make_uniform(2);
    TiltVector v(2);
    v << 0.3, -0.4;
    SdeConfig cfg;
    cfg.seed = 9;
    cfg.t_max = suggested_t_max(2);
    const SampleBatch batch = sample_tilted_batch(nu, v, cfg, 20000, 2);
    const Measure exact = tilt(nu, v);
    std::vector<double> emp(4);
    for (int x = 0; x < 4; x++) emp[x] = double(batch.counts[x]);
    const Measure emp_m(2, emp);
    REQUIRE(tv_distance(emp_m, exact) <= 0.025);
}

TEST_CASE("measure scheme agrees with the tilt scheme in law") {
    const Measure nu = make_uniform(2);
    TiltVector v(2);
    v << 0.5, 0.2;
    SdeConfig cfg;
    cfg.seed = 17;
    cfg.t_max = suggested_t_max(2);
    cfg.scheme = Scheme::MeasureEuler;
    const SampleBatch batch = sample_tilted_batch(nu, v, cfg, 20000, 2);
    const Measure exact = tilt(nu, v);
    std::vector<double> emp(4);
    for (int x = 0; x < 4; x++) emp[x] = double(batch.counts[x]);
    REQUIRE(tv_distance(Measure(2, emp), exact) <= 0.025);
}

TEST_CASE("thread count does not change sampled histograms") {
    const Measure nu = make_uniform(2);
    SdeConfig cfg;
    cfg.seed = 23;
    cfg.t_max = 30.0;
    const SampleBatch one = sample_tilted_batch(nu, Eigen::VectorXd::Zero(2), cfg, 600, 1);
    const SampleBatch three = sample_tilted_batch(nu, Eigen::VectorXd::Zero(2), cfg, 600, 3);
    REQUIRE(one.counts == three.counts);
    REQUIRE(one.truncated == three.truncated);
}

TEST_CASE("conditional measure mass is a martingale") {
    const Measure nu = make_uniform(3);
    std::vector<std::uint32_t> set;
    for (std::uint32_t x = 0; x < 8; x++)
        if (x & 1u) set.push_back(x);
    SdeConfig cfg;
    cfg.seed = 31;
    cfg.t_max = 4.0;
    const AuditReport rep = martingale_audit(nu, set, cfg, 3000, 2);
    INFO(canonical_json(rep.to_json()));
    REQUIRE(rep.passed());
}

TEST_CASE("covariance trace decays exponentially on average") {
    const Measure nu = make_uniform(4);
    SdeConfig cfg;
    cfg.seed = 37;
    cfg.t_max = 8.5;
    const AuditReport rep = trace_decay_audit(nu, cfg, 3000, {1.0, 2.0, 4.0, 8.0}, 2);
    INFO(canonical_json(rep.to_json()));
    REQUIRE(rep.passed());
    REQUIRE(rep.assertions.size() == 6);  // initial trace, four checkpoints, bookkeeping
}

TEST_CASE("terminal sampler accounts for truncation and tiny batches") {
    const Measure nu = make_uniform(2);
    SdeConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 0.05;  // far too short for collapse at this tolerance
    cfg.collapse_tol = 1e-4;
    cfg.seed = 91;
    const SampleBatch sb = sample_tilted_batch(nu, Eigen::VectorXd::Zero(2), cfg, 777, 1);
    REQUIRE(sb.paths == 777);
    REQUIRE(sb.truncated == 777);
    std::int64_t total = 0;
    for (std::int64_t c : sb.counts) total += c;
    REQUIRE(total == 777);

    const SampleBatch tiny = sample_tilted_batch(nu, Eigen::VectorXd::Zero(2), cfg, 5, 1);
    REQUIRE(tiny.paths == 5);
}

TEST_CASE("terminal sampler short-circuits an already collapsed start") {
    const Measure nu = make_dirac(3, 5);
    SdeConfig cfg;
    cfg.seed = 17;
    cfg.collapse_tol = 1e-6;
    const SampleBatch sb = sample_tilted_batch(nu, Eigen::VectorXd::Zero(3), cfg, 4000, 2);
    REQUIRE(sb.paths == 4000);
    REQUIRE(sb.truncated == 0);
    REQUIRE(sb.counts[5] == 4000);
}
