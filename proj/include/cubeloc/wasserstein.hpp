#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "cubeloc/common.hpp"
#include "cubeloc/hypercube.hpp"
#include "cubeloc/measure.hpp"

namespace cubeloc {

namespace detail {

// Transportation simplex on the dense bipartite cost table.  Masses are
// floating point; costs here are small integers (twice a Hamming distance),
// so reduced-cost comparisons are well conditioned.
struct TransportSolution {
    double cost = 0.0;
    std::vector<double> u, v;  // node potentials (duals)
    double feasibility_residual = 0.0;
    std::int64_t pivots = 0;
};

class TransportationSimplex {
  public:
    TransportationSimplex(std::vector<double> supply, std::vector<double> demand,
                          std::vector<double> cost)
        : m_(static_cast<int>(supply.size())), k_(static_cast<int>(demand.size())),
          a_(std::move(supply)), b_(std::move(demand)), c_(std::move(cost)) {
        require(c_.size() == std::size_t(m_) * k_, "transport: cost table size mismatch");
        double sa = 0.0, sb = 0.0;
        for (double x : a_) sa += x;
        for (double x : b_) sb += x;
        require(sa > 0.0 && sb > 0.0, "transport: empty marginals");
        for (double& x : b_) x *= sa / sb;  // equalize totals exactly at float level
    }

    TransportSolution solve() {
        northwest_init();
        compute_duals();
        const std::int64_t cap = 2000LL * (m_ + k_) + 2000;
        std::int64_t degenerate_streak = 0;
        TransportSolution sol;
        while (true) {
            require(sol.pivots < cap, "transport: pivot cap exceeded");
            const bool bland = degenerate_streak > 2 * (m_ + k_);
            int ei = -1, ej = -1;
            double best = -1e-12;
            for (int i = 0; i < m_ && (ei < 0 || !bland); i++)
                for (int j = 0; j < k_; j++) {
                    const double rc = c_[std::size_t(i) * k_ + j] - u_[i] - v_[j];
                    if (rc < best) {
                        best = rc;
                        ei = i;
                        ej = j;
                        if (bland) break;
                    }
                }
            if (ei < 0) break;
            const double theta = pivot(ei, ej);
            degenerate_streak = theta > 0.0 ? 0 : degenerate_streak + 1;
            sol.pivots++;
            compute_duals();
        }
        for (std::size_t e = 0; e < basic_i_.size(); e++)
            sol.cost += flow_[e] * c_[std::size_t(basic_i_[e]) * k_ + basic_j_[e]];
        sol.u = u_;
        sol.v = v_;
        sol.feasibility_residual = feasibility_residual();
        return sol;
    }

  private:
    int m_, k_;
    std::vector<double> a_, b_, c_;
    std::vector<int> basic_i_, basic_j_;  // basis cells
    std::vector<double> flow_;
    std::vector<double> u_, v_;
    std::vector<std::vector<int>> adj_;  // node -> incident basis edge ids

    void northwest_init() {
        basic_i_.clear();
        basic_j_.clear();
        flow_.clear();
        std::vector<double> ra = a_, rb = b_;
        int i = 0, j = 0;
        while (true) {
            const double t = std::max(0.0, std::min(ra[i], rb[j]));
            basic_i_.push_back(i);
            basic_j_.push_back(j);
            flow_.push_back(t);
            ra[i] -= t;
            rb[j] -= t;
            if (i == m_ - 1 && j == k_ - 1) break;
            // Rounding can leave residual supply in the last column (the b
            // rescale is not exact); never step past it, walk down instead.
            if (j == k_ - 1 || (ra[i] <= 0.0 && i < m_ - 1))
                i++;
            else
                j++;
        }
    }

    void rebuild_adjacency() {
        adj_.assign(m_ + k_, {});
        for (std::size_t e = 0; e < basic_i_.size(); e++) {
            adj_[basic_i_[e]].push_back(static_cast<int>(e));
            adj_[m_ + basic_j_[e]].push_back(static_cast<int>(e));
        }
    }

    void compute_duals() {
        rebuild_adjacency();
        u_.assign(m_, 0.0);
        v_.assign(k_, 0.0);
        std::vector<char> seen(m_ + k_, 0);
        std::deque<int> queue{0};
        seen[0] = 1;
        while (!queue.empty()) {
            const int node = queue.front();
            queue.pop_front();
            for (int e : adj_[node]) {
                const int other = node < m_ ? m_ + basic_j_[e] : basic_i_[e];
                if (seen[other]) continue;
                seen[other] = 1;
                const double cc = c_[std::size_t(basic_i_[e]) * k_ + basic_j_[e]];
                if (node < m_)
                    v_[basic_j_[e]] = cc - u_[node];
                else
                    u_[basic_i_[e]] = cc - v_[node - m_];
                queue.push_back(other);
            }
        }
    }

    // Path between two nodes in the basis tree, as a list of edge ids.
    std::vector<int> tree_path(int from, int to) const {
        std::vector<int> parent_edge(m_ + k_, -1), parent(m_ + k_, -1);
        std::vector<char> seen(m_ + k_, 0);
        std::deque<int> queue{from};
        seen[from] = 1;
        while (!queue.empty()) {
            const int node = queue.front();
            queue.pop_front();
            if (node == to) break;
            for (int e : adj_[node]) {
                const int other = node < m_ ? m_ + basic_j_[e] : basic_i_[e];
                if (seen[other]) continue;
                seen[other] = 1;
                parent[other] = node;
                parent_edge[other] = e;
                queue.push_back(other);
            }
        }
        std::vector<int> path;
        for (int node = to; node != from; node = parent[node]) {
            require(parent[node] >= 0, "transport: basis tree disconnected");
            path.push_back(parent_edge[node]);
        }
        std::reverse(path.begin(), path.end());
        return path;
    }

    // Pivot in cell (ei, ej); returns the flow shifted around the cycle.
    double pivot(int ei, int ej) {
        const std::vector<int> path = tree_path(ei, m_ + ej);
        // entering cell gets +theta; edges along the path alternate -,+,-,...
        double theta = std::numeric_limits<double>::infinity();
        int leave_pos = -1;
        for (std::size_t p = 0; p < path.size(); p += 2) {
            if (flow_[path[p]] < theta) {
                theta = flow_[path[p]];
                leave_pos = static_cast<int>(p);
            }
        }
        for (std::size_t p = 0; p < path.size(); p++) {
            flow_[path[p]] += (p % 2 == 0) ? -theta : theta;
            if (flow_[path[p]] < 0.0) flow_[path[p]] = 0.0;
        }
        const int leaving = path[leave_pos];
        basic_i_[leaving] = ei;
        basic_j_[leaving] = ej;
        flow_[leaving] = theta;
        return theta;
    }

    double feasibility_residual() const {
        std::vector<double> ra = a_, rb = b_;
        for (std::size_t e = 0; e < basic_i_.size(); e++) {
            ra[basic_i_[e]] -= flow_[e];
            rb[basic_j_[e]] -= flow_[e];
        }
        double r = 0.0;
        for (double x : ra) r = std::max(r, std::abs(x));
        for (double x : rb) r = std::max(r, std::abs(x));
        return r;
    }
};

}  // namespace detail

// Exact Wasserstein-1 distance with ground cost ||x - y||_1, by min-cost flow
// on the bipartite support graph.  Guarded to n <= 10 where the dense support
// tables stay small.
inline double w1_exact(const Measure& nu1, const Measure& nu2) {
    require(nu1.n() == nu2.n(), "w1_exact: dimension mismatch");
    require(nu1.n() <= 10, "w1_exact: n > 10 exceeds the exact-transport guard");
    const auto& sa = nu1.support();
    const auto& sb = nu2.support();
    std::vector<double> a(sa.size()), b(sb.size());
    for (std::size_t i = 0; i < sa.size(); i++) a[i] = nu1.weight(sa[i]);
    for (std::size_t j = 0; j < sb.size(); j++) b[j] = nu2.weight(sb[j]);
    std::vector<double> cost(sa.size() * sb.size());
    for (std::size_t i = 0; i < sa.size(); i++)
        for (std::size_t j = 0; j < sb.size(); j++)
            cost[i * sb.size() + j] = l1_distance(sa[i], sb[j]);
    detail::TransportationSimplex solver(std::move(a), std::move(b), std::move(cost));
    detail::TransportSolution sol = solver.solve();
    if (sol.feasibility_residual > 1e-9)
        throw DomainError("w1_exact: transport feasibility drifted beyond 1e-9");
    return sol.cost;
}

// ---------------------------------------------------------------------------
// Independent dual route: maximize sum (p - q) phi over functions with
// |phi(x) - phi(y)| <= 2 on cube edges, solved as a dense LP with Bland's
// rule.  Cross-checks the flow primal for n <= 5.

struct W1DualResult {
    double value = 0.0;
    std::vector<double> phi;       // optimal potential, phi(0) = 0
    double max_violation = 0.0;    // Lipschitz feasibility of phi
    std::int64_t pivots = 0;
};

inline W1DualResult w1_dual_lp(const Measure& nu1, const Measure& nu2) {
    require(nu1.n() == nu2.n(), "w1_dual_lp: dimension mismatch");
    const int n = nu1.n();
    require(n <= 5, "w1_dual_lp: dual LP cross-check is guarded to n <= 5");
    const std::uint32_t size = nu1.size();
    const int nvar = 2 * (static_cast<int>(size) - 1);  // phi = phi+ - phi-, phi(0) = 0
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t x = 0; x < size; x++)
        for (int i = 0; i < n; i++) edges.emplace_back(x, x ^ (1u << i));
    const int nrow = static_cast<int>(edges.size());
    const int ncol = nvar + nrow;  // structural variables then slacks

    // tableau rows: constraints; extra row: objective (minimized as -obj)
    std::vector<std::vector<double>> t(nrow + 1, std::vector<double>(ncol + 1, 0.0));
    auto var_plus = [](std::uint32_t x) { return 2 * (static_cast<int>(x) - 1); };
    for (int r = 0; r < nrow; r++) {
        const auto [x, y] = edges[r];
        if (x != 0) {
            t[r][var_plus(x)] += 1.0;
            t[r][var_plus(x) + 1] -= 1.0;
        }
        if (y != 0) {
            t[r][var_plus(y)] -= 1.0;
            t[r][var_plus(y) + 1] += 1.0;
        }
        t[r][ncol] = 2.0;
        t[r][nvar + r] = 1.0;
    }
    for (std::uint32_t x = 1; x < size; x++) {
        const double c = nu1.weight(x) - nu2.weight(x);
        t[nrow][var_plus(x)] = -c;
        t[nrow][var_plus(x) + 1] = c;
    }

    std::vector<int> basis(nrow);
    for (int r = 0; r < nrow; r++) basis[r] = nvar + r;

    W1DualResult res;
    const std::int64_t cap = 200000;
    while (true) {
        require(res.pivots < cap, "w1_dual_lp: pivot cap exceeded");
        int col = -1;
        for (int cidx = 0; cidx < ncol; cidx++)
            if (t[nrow][cidx] < -1e-9) {  // Bland: first improving column
                col = cidx;
                break;
            }
        if (col < 0) break;
        int row = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (int r = 0; r < nrow; r++) {
            if (t[r][col] > 1e-12) {
                const double ratio = t[r][ncol] / t[r][col];
                if (ratio < best_ratio - 1e-15 ||
                    (std::abs(ratio - best_ratio) <= 1e-15 && (row < 0 || basis[r] < basis[row]))) {
                    best_ratio = ratio;
                    row = r;
                }
            }
        }
        require(row >= 0, "w1_dual_lp: unbounded (cannot happen on a connected cube)");
        const double piv = t[row][col];
        for (int cidx = 0; cidx <= ncol; cidx++) t[row][cidx] /= piv;
        for (int r = 0; r <= nrow; r++) {
            if (r == row) continue;
            const double f = t[r][col];
            if (f == 0.0) continue;
            for (int cidx = 0; cidx <= ncol; cidx++) t[r][cidx] -= f * t[row][cidx];
        }
        basis[row] = col;
        res.pivots++;
    }

    std::vector<double> xval(ncol, 0.0);
    for (int r = 0; r < nrow; r++) xval[basis[r]] = t[r][ncol];
    res.phi.assign(size, 0.0);
    for (std::uint32_t x = 1; x < size; x++)
        res.phi[x] = xval[var_plus(x)] - xval[var_plus(x) + 1];
    res.value = 0.0;
    for (std::uint32_t x = 0; x < size; x++)
        res.value += (nu1.weight(x) - nu2.weight(x)) * res.phi[x];
    for (const auto& [x, y] : edges)
        res.max_violation = std::max(res.max_violation, std::abs(res.phi[x] - res.phi[y]) - 2.0);
    return res;
}

struct W1CrossCheck {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    double dual_violation = 0.0;
};

inline W1CrossCheck w1_cross_check(const Measure& nu1, const Measure& nu2) {
    W1CrossCheck c;
    c.primal = w1_exact(nu1, nu2);
    W1DualResult d = w1_dual_lp(nu1, nu2);
    c.dual = d.value;
    c.gap = std::abs(c.primal - c.dual);
    c.dual_violation = d.max_violation;
    return c;
}

}  // namespace cubeloc
