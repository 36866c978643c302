#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cubeloc/common.hpp"
#include "cubeloc/hypercube.hpp"

namespace cubeloc {

// Probability measure on {-1,1}^n, stored as a dense table of 2^n weights.
// Weights are normalized on construction and immutable afterwards; the support
// is the set of indices with strictly positive weight.
class Measure {
  public:
    Measure(int n, std::vector<double> weights, int dim_cap = kDefaultDimCap)
        : n_(n), w_(std::move(weights)) {
        check_dimension(n, dim_cap);
        const std::size_t size = std::size_t(1) << n_;
        require(w_.size() == size, "weight table must have 2^n entries");
        double total = 0.0;
        for (double v : w_) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw SpecError("weights must be finite and nonnegative");
            total += v;
        }
        require(total > 0.0, "weights must have positive total mass");
        for (double& v : w_) v /= total;
        for (std::uint32_t i = 0; i < size; i++)
            if (w_[i] > 0.0) support_.push_back(i);
    }

    int n() const { return n_; }
    std::uint32_t size() const { return std::uint32_t(1) << n_; }
    double weight(std::uint32_t idx) const { return w_[idx]; }
    const std::vector<double>& weights() const { return w_; }
    const std::vector<std::uint32_t>& support() const { return support_; }

    Eigen::VectorXd mean() const {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(n_);
        for (std::uint32_t x : support_) {
            const double wx = w_[x];
            for (int i = 0; i < n_; i++) a[i] += wx * sign_bit(x, i);
        }
        return a;
    }

    Eigen::MatrixXd covariance() const {
        const Eigen::VectorXd a = mean();
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n_, n_);
        Eigen::VectorXd d(n_);
        for (std::uint32_t x : support_) {
            for (int i = 0; i < n_; i++) d[i] = sign_bit(x, i) - a[i];
            c.selfadjointView<Eigen::Lower>().rankUpdate(d, w_[x]);
        }
        return c.selfadjointView<Eigen::Lower>();
    }

    // P(x_i = +1)
    double marginal(int i) const {
        require(i >= 0 && i < n_, "marginal: coordinate out of range");
        double p = 0.0;
        for (std::uint32_t x : support_)
            if ((x >> i) & 1u) p += w_[x];
        return p;
    }

    double variance(const std::vector<double>& f) const {
        require(f.size() == w_.size(), "function table must have 2^n entries");
        double mu = 0.0;
        for (std::uint32_t x : support_) mu += w_[x] * f[x];
        double var = 0.0;
        for (std::uint32_t x : support_) {
            const double d = f[x] - mu;
            var += w_[x] * d * d;
        }
        return var;
    }

    double expectation(const std::vector<double>& f) const {
        require(f.size() == w_.size(), "function table must have 2^n entries");
        double mu = 0.0;
        for (std::uint32_t x : support_) mu += w_[x] * f[x];
        return mu;
    }

    // Shannon entropy of the weight table, in nats.
    double entropy() const {
        double h = 0.0;
        for (std::uint32_t x : support_) h -= w_[x] * std::log(w_[x]);
        return h;
    }

    // Sum of the coordinate marginals' binary entropies; always >= entropy()
    // (subadditivity), with equality exactly for product measures.
    double marginal_entropy_sum() const {
        double h = 0.0;
        for (int i = 0; i < n_; i++) {
            const double p = marginal(i);
            if (p > 0.0) h -= p * std::log(p);
            if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
        }
        return h;
    }

  private:
    int n_;
    std::vector<double> w_;
    std::vector<std::uint32_t> support_;
};

// Real-valued test function on the cube, stored densely.  The Lipschitz
// constant refers to the l1 metric, so a declared constant L means adjacent
// values may differ by at most 2L.
struct TestFunction {
    int n = 1;
    std::vector<double> values;
    std::optional<double> declared_lipschitz;

    double operator()(std::uint32_t idx) const { return values[idx]; }

    double max_adjacent_increment() const {
        const std::uint32_t size = std::uint32_t(1) << n;
        double m = 0.0;
        for (std::uint32_t x = 0; x < size; x++)
            for (int i = 0; i < n; i++) {
                const std::uint32_t y = x ^ (1u << i);
                if (y > x) m = std::max(m, std::abs(values[x] - values[y]));
            }
        return m;
    }

    bool verify_lipschitz(double tol = 1e-12) const {
        if (!declared_lipschitz) return true;
        return max_adjacent_increment() <= 2.0 * (*declared_lipschitz) + tol;
    }
};

// l1 distance to a set of points, computed by multi-source BFS on the cube
// graph (each hop costs 2).  Exactly 1-Lipschitz.
inline TestFunction hamming_distance_to_set(int n, const std::vector<std::uint32_t>& targets,
                                            int dim_cap = kDefaultDimCap) {
    check_dimension(n, dim_cap);
    require(!targets.empty(), "distance_to_set: target set must be nonempty");
    const std::uint32_t size = std::uint32_t(1) << n;
    std::vector<int> hops(size, -1);
    std::deque<std::uint32_t> queue;
    for (std::uint32_t t : targets) {
        require(t < size, "distance_to_set: point index out of range");
        if (hops[t] != 0) {
            hops[t] = 0;
            queue.push_back(t);
        }
    }
    while (!queue.empty()) {
        const std::uint32_t x = queue.front();
        queue.pop_front();
        for (int i = 0; i < n; i++) {
            const std::uint32_t y = x ^ (1u << i);
            if (hops[y] < 0) {
                hops[y] = hops[x] + 1;
                queue.push_back(y);
            }
        }
    }
    TestFunction f;
    f.n = n;
    f.values.resize(size);
    for (std::uint32_t x = 0; x < size; x++) f.values[x] = 2.0 * hops[x];
    f.declared_lipschitz = 1.0;
    return f;
}

// Total variation distance between two measures on the same cube.
inline double tv_distance(const Measure& p, const Measure& q) {
    require(p.n() == q.n(), "tv_distance: dimension mismatch");
    double s = 0.0;
    for (std::uint32_t x = 0; x < p.size(); x++) s += std::abs(p.weight(x) - q.weight(x));
    return 0.5 * s;
}

// ---------------------------------------------------------------------------
// Builders

inline Measure make_uniform(int n, int dim_cap = kDefaultDimCap) {
    check_dimension(n, dim_cap);
    return Measure(n, std::vector<double>(std::size_t(1) << n, 1.0), dim_cap);
}

inline Measure make_dirac(int n, std::uint32_t point, int dim_cap = kDefaultDimCap) {
    check_dimension(n, dim_cap);
    require(point < (std::uint32_t(1) << n), "dirac: point index out of range");
    std::vector<double> w(std::size_t(1) << n, 0.0);
    w[point] = 1.0;
    return Measure(n, std::move(w), dim_cap);
}

// Independent coordinates with prescribed means in [-1,1].
inline Measure make_product(int n, const std::vector<double>& means,
                            int dim_cap = kDefaultDimCap) {
    check_dimension(n, dim_cap);
    require(static_cast<int>(means.size()) == n, "product: need one mean per coordinate");
    for (double m : means)
        require(m >= -1.0 && m <= 1.0, "product: means must lie in [-1,1]");
    const std::uint32_t size = std::uint32_t(1) << n;
    std::vector<double> w(size, 1.0);
    for (std::uint32_t x = 0; x < size; x++)
        for (int i = 0; i < n; i++)
            w[x] *= 0.5 * (1.0 + means[i] * sign_bit(x, i));
    return Measure(n, std::move(w), dim_cap);
}

// Half mass on the all-plus corner, half on the all-minus corner.
inline Measure make_two_point(int n, int dim_cap = kDefaultDimCap) {
    check_dimension(n, dim_cap);
    std::vector<double> w(std::size_t(1) << n, 0.0);
    w[0] = 0.5;
    w[(std::uint32_t(1) << n) - 1] = 0.5;
    return Measure(n, std::move(w), dim_cap);
}

// Gibbs measure with pair couplings J (symmetric, diagonal ignored) and
// external field h: weight(x) proportional to exp(sum_{i<j} J_ij x_i x_j + <h,x>).
inline Measure make_ising(int n, const Eigen::MatrixXd& coupling, const Eigen::VectorXd& field,
                          int dim_cap = kDefaultDimCap) {
    check_dimension(n, dim_cap);
    require(coupling.rows() == n && coupling.cols() == n, "ising: coupling must be n x n");
    require(field.size() == n, "ising: field must have n entries");
    const std::uint32_t size = std::uint32_t(1) << n;
    std::vector<double> logw(size);
    double maxlog = -std::numeric_limits<double>::infinity();
    for (std::uint32_t x = 0; x < size; x++) {
        double e = 0.0;
        for (int i = 0; i < n; i++) {
            const int xi = sign_bit(x, i);
            e += field[i] * xi;
            for (int j = i + 1; j < n; j++)
                e += 0.5 * (coupling(i, j) + coupling(j, i)) * xi * sign_bit(x, j);
        }
        logw[x] = e;
        maxlog = std::max(maxlog, e);
    }
    std::vector<double> w(size);
    for (std::uint32_t x = 0; x < size; x++) w[x] = std::exp(logw[x] - maxlog);
    return Measure(n, std::move(w), dim_cap);
}

// Uniform measure on the slice {x : sum_i x_i = level}.
inline Measure make_slice(int n, int level, int dim_cap = kDefaultDimCap) {
    check_dimension(n, dim_cap);
    require(std::abs(level) <= n && (n + level) % 2 == 0,
            "slice: level must have the parity of n and |level| <= n");
    const int plus_count = (n + level) / 2;
    const std::uint32_t size = std::uint32_t(1) << n;
    std::vector<double> w(size, 0.0);
    for (std::uint32_t x = 0; x < size; x++)
        if (std::popcount(x) == plus_count) w[x] = 1.0;
    return Measure(n, std::move(w), dim_cap);
}

// Uniform measure on the rows of the order-n Sylvester matrix (n a power of
// two): row r has x_c = +1 iff popcount(r & c) is even.  Coordinates are
// pairwise uncorrelated yet the measure is far from product.
inline Measure make_hadamard_rows(int n, int dim_cap = kDefaultDimCap) {
    check_dimension(n, dim_cap);
    require(std::has_single_bit(static_cast<unsigned>(n)), "hadamard_rows: n must be a power of 2");
    const std::uint32_t size = std::uint32_t(1) << n;
    std::vector<double> w(size, 0.0);
    for (std::uint32_t r = 0; r < static_cast<std::uint32_t>(n); r++) {
        std::uint32_t idx = 0;
        for (int c = 0; c < n; c++)
            if (std::popcount(r & static_cast<std::uint32_t>(c)) % 2 == 0) idx |= (1u << c);
        w[idx] += 1.0;
    }
    return Measure(n, std::move(w), dim_cap);
}

inline std::uint32_t hadamard_row_index(int n, std::uint32_t r) {
    std::uint32_t idx = 0;
    for (int c = 0; c < n; c++)
        if (std::popcount(r & static_cast<std::uint32_t>(c)) % 2 == 0) idx |= (1u << c);
    return idx;
}

inline Measure make_explicit(int n, std::vector<double> weights, int dim_cap = kDefaultDimCap) {
    return Measure(n, std::move(weights), dim_cap);
}

// ---------------------------------------------------------------------------
// JSON measure specs: {"family": ..., "n": ..., family parameters}.

inline Measure build_measure(const nlohmann::json& spec, int dim_cap = kDefaultDimCap) {
    require(spec.is_object(), "measure spec must be a JSON object");
    require(spec.contains("family") && spec["family"].is_string(),
            "measure spec needs a \"family\" string");
    require(spec.contains("n") && spec["n"].is_number_integer(),
            "measure spec needs an integer \"n\"");
    const std::string family = spec["family"];
    const int n = spec["n"];

    auto check_keys = [&](std::initializer_list<const char*> allowed) {
        for (auto it = spec.begin(); it != spec.end(); ++it) {
            const std::string& key = it.key();
            if (key == "family" || key == "n" || key == "seed" || key == "name") continue;
            bool ok = false;
            for (const char* a : allowed)
                if (key == a) ok = true;
            require(ok, "measure spec: unknown key \"" + key + "\" for family " + family);
        }
    };

    if (family == "uniform") {
        check_keys({});
        return make_uniform(n, dim_cap);
    }
    if (family == "dirac") {
        check_keys({"point"});
        require(spec.contains("point"), "dirac: needs \"point\"");
        std::uint32_t idx = 0;
        if (spec["point"].is_array()) {
            Eigen::VectorXd x(n);
            require(static_cast<int>(spec["point"].size()) == n, "dirac: point has wrong length");
            for (int i = 0; i < n; i++) x[i] = spec["point"][i].get<double>();
            idx = encode_point(x);
        } else {
            idx = spec["point"].get<std::uint32_t>();
        }
        return make_dirac(n, idx, dim_cap);
    }
    if (family == "product") {
        check_keys({"means"});
        require(spec.contains("means") && spec["means"].is_array(), "product: needs \"means\"");
        std::vector<double> means = spec["means"].get<std::vector<double>>();
        return make_product(n, means, dim_cap);
    }
    if (family == "two_point") {
        check_keys({});
        return make_two_point(n, dim_cap);
    }
    if (family == "ising") {
        check_keys({"coupling", "field"});
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
        if (spec.contains("coupling")) {
            const auto& rows = spec["coupling"];
            require(rows.is_array() && static_cast<int>(rows.size()) == n,
                    "ising: coupling must be an n x n array");
            for (int i = 0; i < n; i++) {
                require(rows[i].is_array() && static_cast<int>(rows[i].size()) == n,
                        "ising: coupling must be an n x n array");
                for (int j = 0; j < n; j++) J(i, j) = rows[i][j].get<double>();
            }
        }
        if (spec.contains("field")) {
            require(spec["field"].is_array() && static_cast<int>(spec["field"].size()) == n,
                    "ising: field must have n entries");
            for (int i = 0; i < n; i++) h[i] = spec["field"][i].get<double>();
        }
        return make_ising(n, J, h, dim_cap);
    }
    if (family == "slice") {
        check_keys({"level"});
        require(spec.contains("level"), "slice: needs \"level\"");
        return make_slice(n, spec["level"].get<int>(), dim_cap);
    }
    if (family == "hadamard_rows") {
        check_keys({});
        return make_hadamard_rows(n, dim_cap);
    }
    if (family == "explicit") {
        check_keys({"weights"});
        require(spec.contains("weights") && spec["weights"].is_array(),
                "explicit: needs \"weights\" with 2^n entries");
        std::vector<double> w = spec["weights"].get<std::vector<double>>();
        return make_explicit(n, std::move(w), dim_cap);
    }
    throw SpecError("unknown measure family \"" + family + "\"");
}

}  // namespace cubeloc
