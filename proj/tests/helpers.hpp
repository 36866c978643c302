#pragma once

#include <random>
#include <vector>

#include <cubeloc/cubeloc.hpp>

namespace testutil {

using cubeloc::Measure;
using cubeloc::TestFunction;
using cubeloc::TiltVector;

inline Eigen::VectorXd fd_gradient(const Measure& nu, const TiltVector& w, double h = 1e-4) {
    Eigen::VectorXd g(nu.n());
    for (int i = 0; i < nu.n(); i++) {
        TiltVector wp = w, wm = w;
        wp[i] += h;
        wm[i] -= h;
        g[i] = (cubeloc::log_partition(nu, wp) - cubeloc::log_partition(nu, wm)) / (2.0 * h);
    }
    return g;
}

inline Eigen::MatrixXd fd_hessian(const Measure& nu, const TiltVector& w, double h = 1e-4) {
    const int n = nu.n();
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; i++)
        for (int j = i; j < n; j++) {
            TiltVector wpp = w, wpm = w, wmp = w, wmm = w;
            wpp[i] += h;
            wpp[j] += h;
            wpm[i] += h;
            wpm[j] -= h;
            wmp[i] -= h;
            wmp[j] += h;
            wmm[i] -= h;
            wmm[j] -= h;
            m(i, j) = m(j, i) =
                (cubeloc::log_partition(nu, wpp) - cubeloc::log_partition(nu, wpm) -
                 cubeloc::log_partition(nu, wmp) + cubeloc::log_partition(nu, wmm)) /
                (4.0 * h * h);
        }
    return m;
}

// Log-normal weights; full support by default, otherwise a random nonempty
// support subset.
inline Measure random_measure(std::mt19937_64& eng, int n, bool full_support = true) {
    const std::uint32_t size = std::uint32_t(1) << n;
    std::vector<double> w(size, 0.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::uint32_t x = 0; x < size; x++) w[x] = std::exp(gauss(eng));
    if (!full_support) {
        for (std::uint32_t x = 0; x < size; x++)
            if (eng() % 2 == 0) w[x] = 0.0;
        w[eng() % size] = 1.0;
    }
    return Measure(n, std::move(w));
}

inline TiltVector random_tilt(std::mt19937_64& eng, int n, double radius) {
    TiltVector w(n);
    for (int i = 0; i < n; i++) w[i] = radius * (2.0 * cubeloc::uniform01(eng) - 1.0);
    return w;
}

// Random 1-Lipschitz function by McShane relaxation: clip random values to the
// largest function under each vertex value with per-edge increment 2.
inline TestFunction random_lipschitz(std::mt19937_64& eng, int n) {
    const std::uint32_t size = std::uint32_t(1) << n;
    TestFunction f;
    f.n = n;
    f.declared_lipschitz = 1.0;
    f.values.resize(size);
    for (std::uint32_t x = 0; x < size; x++)
        f.values[x] = 2.0 * n * (2.0 * cubeloc::uniform01(eng) - 1.0);
    for (int round = 0; round < n; round++)
        for (std::uint32_t x = 0; x < size; x++)
            for (int i = 0; i < n; i++) {
                const double relaxed = f.values[x ^ (1u << i)] + 2.0;
                if (relaxed < f.values[x]) f.values[x] = relaxed;
            }
    return f;
}

inline Measure random_ising(std::mt19937_64& eng, int n, double scale = 0.5) {
    std::normal_distribution<double> gauss(0.0, scale);
    Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd field(n);
    for (int i = 0; i < n; i++) {
        field[i] = gauss(eng);
        for (int j = i + 1; j < n; j++) coupling(i, j) = coupling(j, i) = gauss(eng);
    }
    return cubeloc::make_ising(n, coupling, field);
}

// Fixed ferromagnet/antiferromagnet mix used across the corpus.
inline Measure corpus_ising3() {
    Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(3, 3);
    coupling(0, 1) = coupling(1, 0) = 0.3;
    coupling(0, 2) = coupling(2, 0) = -0.2;
    coupling(1, 2) = coupling(2, 1) = 0.5;
    Eigen::VectorXd field(3);
    field << 0.1, -0.4, 0.25;
    return cubeloc::make_ising(3, coupling, field);
}

// Canonical test-measure corpus: products, degenerate supports, slices, a
// dependent-spin system, and the orthogonal-rows stress case.
inline std::vector<std::pair<std::string, Measure>> corpus() {
    std::vector<std::pair<std::string, Measure>> c;
    c.emplace_back("uniform2", cubeloc::make_uniform(2));
    c.emplace_back("uniform4", cubeloc::make_uniform(4));
    c.emplace_back("two_point3", cubeloc::make_two_point(3));
    c.emplace_back("product3", cubeloc::make_product(3, {0.2, -0.5, 0.9}));
    c.emplace_back("slice4", cubeloc::make_slice(4, 0));
    c.emplace_back("slice6", cubeloc::make_slice(6, 0));
    c.emplace_back("ising3", corpus_ising3());
    c.emplace_back("hadamard4", cubeloc::make_hadamard_rows(4));
    return c;
}

}  // namespace testutil
