// cubeloc: certification, localization simulation, exact transport, and
// report-producing audits for probability measures on the sign hypercube.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <cubeloc/cubeloc.hpp>

namespace {

using cubeloc::AuditReport;
using cubeloc::Measure;
using cubeloc::RunManifest;
using cubeloc::TiltVector;
using nlohmann::json;

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

std::vector<std::uint32_t> parse_indices(const std::string& s) {
    std::vector<std::uint32_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(static_cast<std::uint32_t>(std::stoul(tok)));
    }
    return out;
}

TiltVector to_vector(const std::vector<double>& v) {
    TiltVector w(v.size());
    for (std::size_t i = 0; i < v.size(); i++) w[i] = v[i];
    return w;
}

struct MeasureFlags {
    std::string spec_file;
    std::string family;
    int n = 4;
    int level = 0;
    std::string means;
    std::optional<std::uint32_t> point;
};

void add_measure_flags(CLI::App* cmd, MeasureFlags& mf) {
    cmd->add_option("--spec", mf.spec_file, "measure spec JSON file");
    cmd->add_option("--family", mf.family,
                    "measure family (uniform, dirac, product, two-point, ising, slice, "
                    "hadamard-rows, explicit)");
    cmd->add_option("--n", mf.n, "dimension");
    cmd->add_option("--k", mf.level, "slice level (sum of signs)");
    cmd->add_option("--means", mf.means, "comma-separated coordinate means (product family)");
    cmd->add_option("--point", mf.point, "atom index (dirac family)");
}

json spec_from_flags(const MeasureFlags& mf) {
    if (!mf.spec_file.empty()) {
        std::ifstream in(mf.spec_file);
        if (!in) throw cubeloc::SpecError("cannot open spec file: " + mf.spec_file);
        json spec;
        try {
            spec = json::parse(in);
        } catch (const json::parse_error& ex) {
            throw cubeloc::SpecError("spec file " + mf.spec_file + ": " + ex.what());
        }
        return spec;
    }
    if (mf.family.empty())
        throw cubeloc::SpecError("either --spec or --family is required");
    std::string fam = mf.family;
    for (char& c : fam)
        if (c == '-') c = '_';
    json spec{{"family", fam}, {"n", mf.n}};
    if (fam == "slice") spec["level"] = mf.level;
    if (fam == "product") spec["means"] = parse_doubles(mf.means);
    if (fam == "dirac") spec["point"] = mf.point ? *mf.point : 0u;
    return spec;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("CUBE_LOCALIZE_SEED")) return std::stoull(env);
    std::random_device rd;
    return (std::uint64_t(rd()) << 32) ^ rd();
}

cubeloc::TestFunction phi_from_flag(int n, const std::string& desc) {
    if (desc == "sum") {
        const std::uint32_t size = std::uint32_t(1) << n;
        cubeloc::TestFunction f;
        f.n = n;
        f.declared_lipschitz = 1.0;
        f.values.resize(size);
        for (std::uint32_t x = 0; x < size; x++) {
            double s = 0.0;
            for (int i = 0; i < n; i++) s += cubeloc::sign_bit(x, i);
            f.values[x] = s;
        }
        return f;
    }
    if (desc.rfind("dist:", 0) == 0)
        return cubeloc::hamming_distance_to_set(n, parse_indices(desc.substr(5)));
    throw cubeloc::SpecError("unknown test function '" + desc + "' (use sum or dist:i,j,...)");
}

RunManifest make_manifest(const std::string& command, json spec, std::uint64_t seed,
                          json parameters, double wall_seconds) {
    RunManifest m;
    m.command = command;
    m.measure_spec = std::move(spec);
    m.seed = seed;
    m.parameters = std::move(parameters);
    m.wall_clock_seconds = wall_seconds;
    return m;
}

std::string manifest_line(const RunManifest& m) {
    json j = m.to_json();
    j.erase("wall_clock_seconds");
    return j.dump();
}

void write_artifact(const std::string& out, const json& payload) {
    if (out.empty()) return;
    std::ofstream os(out);
    if (!os) throw cubeloc::SpecError("cannot open output file: " + out);
    os << cubeloc::canonical_json(payload) << "\n";
}

int finish_audit(const AuditReport& rep, const RunManifest& manifest, const std::string& out) {
    rep.print_table(std::cout);
    write_artifact(out, cubeloc::report_with_manifest(rep, manifest));
    return rep.passed() ? 0 : 2;
}

double elapsed_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"measures on the sign hypercube: curvature certification, stochastic "
                 "localization, reflection coupling, exact W1, and theorem audits"};
    app.require_subcommand(1);
    const auto t0 = std::chrono::steady_clock::now();

    // ---- certify ----
    MeasureFlags cert_mf;
    std::string cert_condition = "semi-lc";
    std::optional<double> cert_threshold;
    cubeloc::SearchConfig cert_search;
    std::optional<std::uint64_t> cert_seed;
    std::string cert_out;
    CLI::App* certify = app.add_subcommand("certify", "search for the worst tilted covariance");
    add_measure_flags(certify, cert_mf);
    certify->add_option("--condition", cert_condition,
                        "semi-lc | diag-dominated | rayleigh | aov");
    certify->add_option("--threshold", cert_threshold, "pass/fail threshold for the criterion");
    certify->add_option("--radius", cert_search.radius, "search box radius");
    certify->add_option("--grid", cert_search.grid, "random probe budget");
    certify->add_option("--starts", cert_search.starts, "ascent starts");
    certify->add_option("--iters", cert_search.iters, "ascent iterations per start");
    certify->add_option("--seed", cert_seed, "search seed");
    certify->add_option("--out", cert_out, "write JSON report here");

    // ---- simulate ----
    MeasureFlags sim_mf;
    cubeloc::SdeConfig sim_cfg;
    std::optional<std::uint64_t> sim_seed;
    std::optional<double> sim_tmax;
    std::string sim_w0, sim_out, sim_scheme = "tilt";
    std::int64_t sim_stride = 1;
    std::uint64_t sim_path_index = 0;
    CLI::App* simulate = app.add_subcommand("simulate", "one localization trajectory as CSV");
    add_measure_flags(simulate, sim_mf);
    simulate->add_option("--dt", sim_cfg.dt, "Euler step");
    simulate->add_option("--t-max", sim_tmax, "horizon (default 16 log n + 40)");
    simulate->add_option("--seed", sim_seed, "seed");
    simulate->add_option("--w0", sim_w0, "starting tilt, comma separated (default 0)");
    simulate->add_option("--stride", sim_stride, "record every k-th step");
    simulate->add_option("--path-index", sim_path_index, "path index within the seed stream");
    simulate->add_option("--scheme", sim_scheme, "tilt | measure");
    simulate->add_option("--out", sim_out, "CSV output file (default stdout)");

    // ---- sample ----
    MeasureFlags samp_mf;
    cubeloc::SdeConfig samp_cfg;
    std::optional<std::uint64_t> samp_seed;
    std::string samp_tilt, samp_out;
    std::int64_t samp_paths = 10000;
    int samp_threads = int(std::thread::hardware_concurrency());
    CLI::App* sample = app.add_subcommand("sample", "terminal-law samples via localization");
    add_measure_flags(sample, samp_mf);
    sample->add_option("--tilt", samp_tilt, "tilt vector, comma separated (default 0)");
    sample->add_option("--paths", samp_paths, "number of samples");
    sample->add_option("--dt", samp_cfg.dt, "Euler step");
    sample->add_option("--seed", samp_seed, "seed");
    sample->add_option("--threads", samp_threads, "worker threads");
    sample->add_option("--out", samp_out, "write JSON artifact here");

    // ---- w1 ----
    std::string w1_spec_a, w1_spec_b, w1_tilt_a, w1_tilt_b, w1_out;
    CLI::App* w1 = app.add_subcommand("w1", "exact Wasserstein-1 between two measures");
    w1->add_option("--spec-a", w1_spec_a, "measure spec JSON file")->required();
    w1->add_option("--spec-b", w1_spec_b, "second spec file (default: same as --spec-a)");
    w1->add_option("--tilt-a", w1_tilt_a, "tilt applied to the first measure");
    w1->add_option("--tilt-b", w1_tilt_b, "tilt applied to the second measure");
    w1->add_option("--out", w1_out, "write JSON artifact here");

    // ---- audit ----
    MeasureFlags aud_mf;
    std::string audit_name;
    std::optional<std::uint64_t> aud_seed;
    std::string aud_out, aud_phi = "sum", aud_set, aud_v, aud_theta;
    std::int64_t aud_paths = 0;
    std::optional<double> aud_dt, aud_tmax, aud_beta, aud_eps;
    std::string aud_ts;
    int aud_threads = int(std::thread::hardware_concurrency());
    int aud_tilts = 50;
    double aud_radius = 2.0;
    bool aud_no_chain = false, aud_no_fit = false;
    CLI::App* audit = app.add_subcommand("audit", "run a named audit and report assertions");
    audit->add_option("name", audit_name,
                      "variance-decomposition | smalltail | main-theorem | entropy-identity | "
                      "entropy-theorem | h-drift | rayleigh-corollary | martingale | trace-decay "
                      "| hitting-lemma | supermartingale | transport-bound")
        ->required();
    add_measure_flags(audit, aud_mf);
    audit->add_option("--paths", aud_paths, "Monte Carlo paths/runs (0 = audit default)");
    audit->add_option("--dt", aud_dt, "Euler step");
    audit->add_option("--t-max", aud_tmax, "horizon");
    audit->add_option("--t", aud_ts, "checkpoint times, comma separated");
    audit->add_option("--beta", aud_beta, "curvature constant");
    audit->add_option("--eps", aud_eps, "perturbation size");
    audit->add_option("--phi", aud_phi, "test function: sum | dist:i,j,...");
    audit->add_option("--set", aud_set, "event atom indices, comma separated (martingale)");
    audit->add_option("--v", aud_v, "base tilt, comma separated");
    audit->add_option("--theta", aud_theta, "unit direction, comma separated");
    audit->add_option("--tilts", aud_tilts, "sampled tilt count (smalltail)");
    audit->add_option("--radius", aud_radius, "sampled tilt radius (smalltail)");
    audit->add_option("--seed", aud_seed, "seed");
    audit->add_option("--threads", aud_threads, "worker threads");
    audit->add_flag("--no-chain", aud_no_chain, "skip the proof-chain part (main-theorem)");
    audit->add_flag("--no-fit", aud_no_fit, "skip the exponent fit part (main-theorem)");
    audit->add_option("--out", aud_out, "write JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (certify->parsed()) {
            const json spec = spec_from_flags(cert_mf);
            const Measure nu = cubeloc::build_measure(spec);
            cert_search.seed = resolve_seed(cert_seed);
            const cubeloc::Condition cond = cubeloc::parse_condition(cert_condition);
            const cubeloc::CertificationReport rep =
                cubeloc::certify(nu, cond, cert_search, cert_threshold);
            json params{{"condition", cubeloc::condition_name(cond)},
                        {"radius", cert_search.radius},
                        {"grid", cert_search.grid},
                        {"starts", cert_search.starts},
                        {"iters", cert_search.iters}};
            if (rep.threshold) params["threshold"] = *rep.threshold;
            const RunManifest manifest =
                make_manifest("certify", spec, cert_search.seed, params, elapsed_since(t0));
            std::cout << "condition: " << cubeloc::condition_name(cond) << "\n"
                      << "certified value: " << std::setprecision(12) << rep.certified_value
                      << "\n"
                      << "points evaluated: " << rep.points_evaluated << "\n";
            if (rep.threshold) std::cout << "threshold: " << *rep.threshold << "\n";
            if (!rep.pass) {
                std::cout << "witness tilt:";
                for (int i = 0; i < rep.witness.size(); i++) std::cout << " " << rep.witness[i];
                std::cout << "\n";
            }
            std::cout << (rep.pass ? "PASS" : "FAIL") << "\n";
            json payload{{"condition", cubeloc::condition_name(cond)},
                         {"certified_value", rep.certified_value},
                         {"points_evaluated", rep.points_evaluated},
                         {"recheck_residual", rep.recheck_residual},
                         {"pass", rep.pass},
                         {"witness", std::vector<double>(rep.witness.data(),
                                                         rep.witness.data() + rep.witness.size())},
                         {"manifest", manifest.to_json()}};
            if (rep.threshold) payload["threshold"] = *rep.threshold;
            write_artifact(cert_out, payload);
            return rep.pass ? 0 : 2;
        }

        if (simulate->parsed()) {
            const json spec = spec_from_flags(sim_mf);
            const Measure nu = cubeloc::build_measure(spec);
            sim_cfg.seed = resolve_seed(sim_seed);
            sim_cfg.t_max = sim_tmax ? *sim_tmax : cubeloc::suggested_t_max(nu.n());
            if (sim_scheme == "measure")
                sim_cfg.scheme = cubeloc::Scheme::MeasureEuler;
            else if (sim_scheme != "tilt")
                throw cubeloc::SpecError("unknown scheme '" + sim_scheme + "'");
            TiltVector w0 = Eigen::VectorXd::Zero(nu.n());
            if (!sim_w0.empty()) w0 = to_vector(parse_doubles(sim_w0));
            const cubeloc::LocalizationTrajectory traj =
                cubeloc::run_localization(nu, sim_cfg, w0, sim_stride, sim_path_index);
            json params{{"dt", sim_cfg.dt},       {"t_max", sim_cfg.t_max},
                        {"stride", sim_stride},   {"path_index", sim_path_index},
                        {"scheme", sim_scheme}};
            const RunManifest manifest =
                make_manifest("simulate", spec, sim_cfg.seed, params, elapsed_since(t0));
            if (sim_out.empty()) {
                cubeloc::write_trajectory_csv(std::cout, traj, nu.n(), manifest_line(manifest));
            } else {
                std::ofstream os(sim_out);
                if (!os) throw cubeloc::SpecError("cannot open output file: " + sim_out);
                cubeloc::write_trajectory_csv(os, traj, nu.n(), manifest_line(manifest));
                std::cout << "wrote " << traj.times.size() << " rows to " << sim_out << "\n";
            }
            return 0;
        }

        if (sample->parsed()) {
            const json spec = spec_from_flags(samp_mf);
            const Measure nu = cubeloc::build_measure(spec);
            samp_cfg.seed = resolve_seed(samp_seed);
            samp_cfg.t_max = cubeloc::suggested_t_max(nu.n());
            TiltVector v = Eigen::VectorXd::Zero(nu.n());
            if (!samp_tilt.empty()) v = to_vector(parse_doubles(samp_tilt));
            const cubeloc::SampleBatch batch =
                cubeloc::sample_tilted_batch(nu, v, samp_cfg, samp_paths, samp_threads);
            const Eigen::VectorXd mean = batch.empirical_mean(nu.n());
            std::cout << "paths: " << batch.paths << "  truncated: " << batch.truncated << "\n";
            std::cout << "empirical mean:";
            for (int i = 0; i < nu.n(); i++) std::cout << " " << std::setprecision(6) << mean[i];
            std::cout << "\n";
            json params{{"paths", samp_paths}, {"dt", samp_cfg.dt}, {"t_max", samp_cfg.t_max},
                        {"threads", samp_threads}};
            if (!samp_tilt.empty()) params["tilt"] = parse_doubles(samp_tilt);
            const RunManifest manifest =
                make_manifest("sample", spec, samp_cfg.seed, params, elapsed_since(t0));
            json payload{{"counts", batch.counts},
                         {"truncated", batch.truncated},
                         {"paths", batch.paths},
                         {"empirical_mean",
                          std::vector<double>(mean.data(), mean.data() + mean.size())},
                         {"manifest", manifest.to_json()}};
            write_artifact(samp_out, payload);
            return 0;
        }

        if (w1->parsed()) {
            std::ifstream ia(w1_spec_a);
            if (!ia) throw cubeloc::SpecError("cannot open spec file: " + w1_spec_a);
            const json spec_a = json::parse(ia);
            json spec_b = spec_a;
            if (!w1_spec_b.empty()) {
                std::ifstream ib(w1_spec_b);
                if (!ib) throw cubeloc::SpecError("cannot open spec file: " + w1_spec_b);
                spec_b = json::parse(ib);
            }
            Measure a = cubeloc::build_measure(spec_a);
            Measure b = cubeloc::build_measure(spec_b);
            if (!w1_tilt_a.empty()) a = cubeloc::tilt(a, to_vector(parse_doubles(w1_tilt_a)));
            if (!w1_tilt_b.empty()) b = cubeloc::tilt(b, to_vector(parse_doubles(w1_tilt_b)));
            const double value = cubeloc::w1_exact(a, b);
            std::cout << std::setprecision(12) << value << "\n";
            json params{{"spec_a", w1_spec_a},
                        {"spec_b", w1_spec_b.empty() ? w1_spec_a : w1_spec_b}};
            if (!w1_tilt_a.empty()) params["tilt_a"] = parse_doubles(w1_tilt_a);
            if (!w1_tilt_b.empty()) params["tilt_b"] = parse_doubles(w1_tilt_b);
            const RunManifest manifest =
                make_manifest("w1", spec_a, 0, params, elapsed_since(t0));
            write_artifact(w1_out, json{{"w1", value}, {"manifest", manifest.to_json()}});
            return 0;
        }

        if (audit->parsed()) {
            const std::uint64_t seed = resolve_seed(aud_seed);
            std::mt19937_64 flag_eng = cubeloc::path_engine(seed, 0xc11u);

            // measure-free audits first
            if (audit_name == "hitting-lemma") {
                const std::int64_t paths = aud_paths > 0 ? aud_paths : 100000;
                // the bridge-corrected barrier simulation is exact at any dt
                AuditReport rep = cubeloc::hitting_lemma_audit(
                    aud_eps ? *aud_eps : 0.1, paths, seed, aud_dt ? *aud_dt : 0.01, aud_threads);
                const RunManifest manifest = make_manifest(
                    "audit hitting-lemma", json::object(), seed, rep.params, elapsed_since(t0));
                return finish_audit(rep, manifest, aud_out);
            }
            if (audit_name == "main-theorem" && aud_mf.family.empty() && aud_mf.spec_file.empty())
                aud_mf.family = "slice", aud_mf.n = 4, aud_mf.level = 0;

            const json spec = spec_from_flags(aud_mf);
            const Measure nu = cubeloc::build_measure(spec);
            const int n = nu.n();
            cubeloc::SdeConfig sde;
            sde.dt = aud_dt ? *aud_dt : 1e-3;
            sde.seed = seed;
            AuditReport rep;

            if (audit_name == "variance-decomposition") {
                const std::vector<double> ts =
                    aud_ts.empty() ? std::vector<double>{0.5, 2.0} : parse_doubles(aud_ts);
                rep = cubeloc::variance_decomposition_audit(
                    nu, phi_from_flag(n, aud_phi), ts, aud_paths > 0 ? aud_paths : 4000, sde,
                    aud_threads);
            } else if (audit_name == "smalltail") {
                std::vector<TiltVector> tilts;
                for (int j = 0; j < aud_tilts; j++) {
                    TiltVector w(n);
                    for (int i = 0; i < n; i++)
                        w[i] = aud_radius * (2.0 * cubeloc::uniform01(flag_eng) - 1.0);
                    tilts.push_back(w);
                }
                rep = cubeloc::smalltail_check(nu, phi_from_flag(n, aud_phi), tilts);
            } else if (audit_name == "main-theorem") {
                cubeloc::MainTheoremConfig cfg;
                cfg.seed = seed;
                cfg.threads = aud_threads;
                cfg.dt = aud_dt ? *aud_dt : 1e-3;
                if (aud_paths > 0) cfg.num_paths = aud_paths;
                cfg.proof_chain = !aud_no_chain;
                cfg.exponent_fit = !aud_no_fit;
                std::vector<cubeloc::TestFunction> family;
                if (cfg.proof_chain) family = cubeloc::detail::random_distance_family(n, 16, seed);
                rep = cubeloc::main_theorem_audit(nu, aud_beta ? *aud_beta : 2.0, family, cfg);
            } else if (audit_name == "entropy-identity") {
                rep = cubeloc::entropy_identity_audit(
                    nu, aud_paths > 0 ? aud_paths : 512,
                    aud_tmax ? *aud_tmax : cubeloc::suggested_t_max(n), sde, aud_threads);
            } else if (audit_name == "entropy-theorem") {
                if (!aud_beta) throw cubeloc::SpecError("entropy-theorem needs --beta");
                rep = cubeloc::entropy_theorem_check(nu, *aud_beta);
            } else if (audit_name == "h-drift") {
                rep = cubeloc::h_drift_audit(nu, aud_paths > 0 ? aud_paths : 2000, sde, aud_beta,
                                             aud_threads);
            } else if (audit_name == "rayleigh-corollary") {
                cubeloc::MainTheoremConfig cfg;
                cfg.seed = seed;
                cfg.threads = aud_threads;
                cfg.dt = aud_dt ? *aud_dt : 1e-3;
                if (aud_paths > 0) cfg.num_paths = aud_paths;
                rep = cubeloc::rayleigh_corollary_audit(nu, cfg);
            } else if (audit_name == "martingale") {
                std::vector<std::uint32_t> set_a;
                if (!aud_set.empty()) {
                    set_a = parse_indices(aud_set);
                } else {
                    for (std::uint32_t x = 0; x < nu.size(); x++)
                        if (x & 1u) set_a.push_back(x);  // default event: x_0 = +1
                }
                rep = cubeloc::martingale_audit(nu, set_a, sde,
                                                aud_paths > 0 ? aud_paths : 4000, aud_threads);
            } else if (audit_name == "trace-decay") {
                rep = cubeloc::trace_decay_audit(nu, sde, aud_paths > 0 ? aud_paths : 10000,
                                                 {1.0, 2.0, 4.0, 8.0}, aud_threads);
            } else if (audit_name == "supermartingale") {
                if (!aud_beta) throw cubeloc::SpecError("supermartingale needs --beta");
                cubeloc::CouplingConfig ccfg;
                ccfg.dt = aud_dt ? *aud_dt : 1e-3;
                ccfg.seed = seed;
                rep = cubeloc::supermartingale_audit(nu, *aud_beta, aud_eps ? *aud_eps : 0.1,
                                                     aud_paths > 0 ? aud_paths : 10000, ccfg,
                                                     aud_threads);
            } else if (audit_name == "transport-bound") {
                if (!aud_beta) throw cubeloc::SpecError("transport-bound needs --beta");
                cubeloc::CouplingConfig ccfg;
                ccfg.dt = aud_dt ? *aud_dt : 1e-3;
                ccfg.seed = seed;
                TiltVector v = Eigen::VectorXd::Zero(n);
                if (!aud_v.empty()) v = to_vector(parse_doubles(aud_v));
                TiltVector theta;
                if (!aud_theta.empty()) {
                    theta = to_vector(parse_doubles(aud_theta));
                    theta /= theta.norm();
                } else {
                    const std::vector<double> u = cubeloc::random_unit_vector(flag_eng, n);
                    theta = to_vector(u);
                }
                rep = cubeloc::transport_bound_audit(nu, *aud_beta, v, theta,
                                                     aud_eps ? *aud_eps : 0.05, ccfg);
            } else {
                throw cubeloc::SpecError("unknown audit '" + audit_name + "'");
            }

            rep.measure_desc = spec.dump();
            const RunManifest manifest = make_manifest("audit " + audit_name, spec, seed,
                                                       rep.params, elapsed_since(t0));
            return finish_audit(rep, manifest, aud_out);
        }
    } catch (const cubeloc::SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const cubeloc::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
