#ifndef NSDYN_TRANSPORT_HPP
#define NSDYN_TRANSPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <functional>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include "error.hpp"

namespace nsdyn {

/// Dense cost matrix, row-major, rows = supply side.
struct CostMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> c;

    CostMatrix() = default;
    CostMatrix(std::size_t r, std::size_t k) : rows(r), cols(k), c(r * k, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return c[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return c[i * cols + j]; }
};

inline constexpr std::size_t max_transport_pairs = std::size_t(1024) * 1024;
inline constexpr double transport_certificate_tol = 1e-10;

namespace detail {

inline void check_transport_size(std::size_t n, std::size_t m)
{
    if (n == 0 || m == 0)
        fail(ErrorCode::invalid_argument, "transport between empty measures");
    if (n * m > max_transport_pairs)
        fail(ErrorCode::invalid_argument, "transport problem exceeds 1024x1024 atom pairs; coarsen first");
}

} // namespace detail

/// Minimum-cost perfect matching (Hungarian method with potentials, O(n^3)).
/// Returns the total cost of the optimal permutation.
inline double assignment_cost(const CostMatrix& cost)
{
    const std::size_t n = cost.rows;
    require(cost.cols == n, "assignment needs a square cost matrix");
    detail::check_transport_size(n, n);
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is the virtual start
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j])
                    continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    // dual feasibility and complementary slackness
    double total = 0;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= n; ++j) {
            const double reduced = cost(i - 1, j - 1) - u[i] - v[j];
            if (reduced < -transport_certificate_tol)
                fail(ErrorCode::solver_failed, "assignment dual infeasible");
        }
    for (std::size_t j = 1; j <= n; ++j) {
        const double c = cost(p[j] - 1, j - 1);
        if (std::abs(c - u[p[j]] - v[j]) > transport_certificate_tol)
            fail(ErrorCode::solver_failed, "assignment complementary slackness violated");
        total += c;
    }
    return total;
}

/// Exact transportation problem by successive shortest paths with Dijkstra and
/// node potentials on the dense bipartite residual graph. Supplies and demands
/// are rescaled to a common total of 1. Returns the optimal cost.
inline double transportation_cost(const CostMatrix& cost, std::vector<double> supply, std::vector<double> demand)
{
    const std::size_t n = cost.rows, m = cost.cols;
    detail::check_transport_size(n, m);
    require(supply.size() == n && demand.size() == m, "transport marginal size mismatch");
    const double ss = std::accumulate(supply.begin(), supply.end(), 0.0);
    const double ds = std::accumulate(demand.begin(), demand.end(), 0.0);
    for (auto& s : supply)
        s /= ss;
    for (auto& d : demand)
        d /= ds;
    constexpr double eps = 1e-15;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> flow(n * m, 0.0);
    // potentials: sources 0..n-1, sinks n..n+m-1
    std::vector<double> pot(n + m, 0.0), dist(n + m);
    std::vector<std::ptrdiff_t> prev(n + m);
    std::vector<char> done(n + m);
    auto remaining = [&] {
        double r = 0;
        for (double s : supply)
            r += s;
        return r;
    };
    const std::size_t max_rounds = 8 * (n + m) * (n + m) + 64;
    std::size_t rounds = 0;
    while (remaining() > 1e-13) {
        if (++rounds > max_rounds)
            fail(ErrorCode::solver_failed, "transport did not terminate");
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(prev.begin(), prev.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        for (std::size_t i = 0; i < n; ++i)
            if (supply[i] > eps)
                dist[i] = 0;
        std::ptrdiff_t target = -1;
        using Entry = std::pair<double, std::size_t>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
        for (std::size_t i = 0; i < n; ++i)
            if (dist[i] == 0)
                heap.push({0.0, i});
        while (!heap.empty()) {
            const auto [du, uu] = heap.top();
            heap.pop();
            if (done[uu] || du > dist[uu])
                continue;
            done[uu] = 1;
            if (uu >= n && demand[uu - n] > eps) {
                target = static_cast<std::ptrdiff_t>(uu);
                break;
            }
            if (uu < n) {
                for (std::size_t j = 0; j < m; ++j) {
                    const std::size_t v = n + j;
                    if (done[v])
                        continue;
                    const double nd = du + std::max(0.0, cost(uu, j) + pot[uu] - pot[v]);
                    if (nd < dist[v]) {
                        dist[v] = nd;
                        prev[v] = static_cast<std::ptrdiff_t>(uu);
                        heap.push({nd, v});
                    }
                }
            } else {
                const std::size_t j = uu - n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (done[i] || flow[i * m + j] <= eps)
                        continue;
                    const double nd = du + std::max(0.0, -cost(i, j) + pot[uu] - pot[i]);
                    if (nd < dist[i]) {
                        dist[i] = nd;
                        prev[i] = static_cast<std::ptrdiff_t>(uu);
                        heap.push({nd, i});
                    }
                }
            }
        }
        if (target < 0)
            fail(ErrorCode::solver_failed, "no augmenting path in transport residual graph");
        const double dt = dist[static_cast<std::size_t>(target)];
        for (std::size_t k = 0; k < n + m; ++k)
            pot[k] += std::min(dist[k], dt);
        // bottleneck
        std::size_t v = static_cast<std::size_t>(target);
        double amount = demand[v - n];
        while (prev[v] >= 0) {
            const std::size_t u = static_cast<std::size_t>(prev[v]);
            if (u >= n) // backward arc sink u -> source v
                amount = std::min(amount, flow[v * m + (u - n)]);
            v = u;
        }
        amount = std::min(amount, supply[v]);
        const std::size_t source = v;
        v = static_cast<std::size_t>(target);
        while (prev[v] >= 0) {
            const std::size_t u = static_cast<std::size_t>(prev[v]);
            if (u < n)
                flow[u * m + (v - n)] += amount;
            else
                flow[v * m + (u - n)] -= amount;
            v = u;
        }
        supply[source] -= amount;
        demand[static_cast<std::size_t>(target) - n] -= amount;
    }
    double total = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double reduced = cost(i, j) + pot[i] - pot[n + j];
            if (reduced < -transport_certificate_tol)
                fail(ErrorCode::solver_failed, "transport reduced cost below certificate tolerance");
            if (flow[i * m + j] > eps && reduced > transport_certificate_tol)
                fail(ErrorCode::solver_failed, "transport complementary slackness violated");
            total += flow[i * m + j] * cost(i, j);
        }
    return total;
}

} // namespace nsdyn

#endif
