#ifndef NSDYN_CYCLE_NEWTON_HPP
#define NSDYN_CYCLE_NEWTON_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include "error.hpp"
#include "ratmap.hpp"
#include "sphere.hpp"

namespace nsdyn {

/// Solves a_i d_i - d_{i+1} = rhs_i for i = 0..P-1 with d_P = d_0, by Gaussian
/// elimination with partial pivoting specialized to the cyclic bidiagonal
/// pattern. Fill-in is confined to the last column, so the cost is O(P).
template <class Real>
std::vector<std::complex<Real>> solve_cyclic_bidiagonal(const std::vector<std::complex<Real>>& a,
                                                        const std::vector<std::complex<Real>>& rhs)
{
    using C = std::complex<Real>;
    const std::size_t P = a.size();
    require(P >= 1 && rhs.size() == P, "cyclic system size mismatch");
    if (P == 1) {
        const C piv = a[0] - C(1);
        if (piv == C(0))
            fail(ErrorCode::jacobian_singular, "cycle Jacobian singular (multiplier 1)");
        return {rhs[0] / piv};
    }
    struct Row {
        C k, next, last, r;
    };
    std::vector<Row> pivots(P - 1);
    // carried row: starts as the wrap-around equation (col 0 and col P-1)
    C ck = C(-1), cl = a[P - 1], cr = rhs[P - 1];
    for (std::size_t k = 0; k + 1 < P; ++k) {
        Row row{a[k], C(-1), C(0), rhs[k]};
        if (k + 1 == P - 1) {
            row.last += row.next;
            row.next = C(0);
        }
        Row other{ck, C(0), cl, cr};
        if (norm2(other.k) > norm2(row.k))
            std::swap(row, other);
        if (row.k == C(0))
            fail(ErrorCode::jacobian_singular, "cycle Jacobian singular");
        const C m = other.k / row.k;
        ck = other.next - m * row.next;
        cl = other.last - m * row.last;
        cr = other.r - m * row.r;
        if (k + 1 == P - 1) {
            cl += ck;
            ck = C(0);
        }
        pivots[k] = row;
    }
    if (cl == C(0))
        fail(ErrorCode::jacobian_singular, "cycle Jacobian singular");
    std::vector<C> d(P);
    d[P - 1] = cr / cl;
    for (std::size_t k = P - 1; k-- > 0;) {
        const Row& row = pivots[k];
        C s = row.r - row.last * d[P - 1];
        if (k + 1 < P - 1)
            s -= row.next * d[k + 1];
        d[k] = s / row.k;
    }
    return d;
}

/// Dense LU with partial pivoting on a row-major n x n system. Returns the
/// solution and writes a pivot-ratio condition estimate.
template <class Real>
std::vector<std::complex<Real>> solve_dense(std::vector<std::complex<Real>> m, std::vector<std::complex<Real>> rhs,
                                            Real* condition = nullptr)
{
    using C = std::complex<Real>;
    using std::abs;
    const std::size_t n = rhs.size();
    require(m.size() == n * n, "dense system size mismatch");
    Real pmax(0), pmin(std::numeric_limits<Real>::max());
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (norm2(m[r * n + col]) > norm2(m[piv * n + col]))
                piv = r;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c)
                std::swap(m[piv * n + c], m[col * n + c]);
            std::swap(rhs[piv], rhs[col]);
        }
        const C p = m[col * n + col];
        const Real ap = abs(p);
        pmax = ap > pmax ? ap : pmax;
        pmin = ap < pmin ? ap : pmin;
        if (p == C(0))
            break;
        for (std::size_t r = col + 1; r < n; ++r) {
            const C f = m[r * n + col] / p;
            if (f == C(0))
                continue;
            for (std::size_t c = col; c < n; ++c)
                m[r * n + c] -= f * m[col * n + c];
            rhs[r] -= f * rhs[col];
        }
    }
    const Real cond = pmin > Real(0) ? pmax / pmin : std::numeric_limits<Real>::infinity();
    if (condition)
        *condition = cond;
    if (!(pmin > Real(0)) || cond > Real(1) / std::numeric_limits<Real>::epsilon())
        fail(ErrorCode::jacobian_singular,
             "singular Jacobian (pivot-ratio condition " + std::to_string(static_cast<double>(cond)) + ")");
    std::vector<C> x(n);
    for (std::size_t i = n; i-- > 0;) {
        C s = rhs[i];
        for (std::size_t c = i + 1; c < n; ++c)
            s -= m[i * n + c] * x[c];
        x[i] = s / m[i * n + i];
    }
    return x;
}

/// Linearization of the shooting map at one node: f(x_i) expressed in the
/// canonical chart of x_{i+1} together with its derivatives in x_i's chart.
template <class Real>
struct ShootingNode {
    std::complex<Real> image, first, second;
};

template <class Real>
ShootingNode<Real> shooting_node(const basic_rational_map<Real>& f, const basic_sphere_point<Real>& x,
                                 const basic_sphere_point<Real>& next, int order = 1)
{
    auto j = HomogeneousJet<Real>::lift(x.chart_value(), x.in_finite_chart());
    j = step_jet(f, j, order);
    ShootingNode<Real> n{};
    j.chart(next.in_finite_chart(), n.image, n.first, n.second);
    return n;
}

/// Max chordal defect max_i d(f(x_i), x_{i+1}); `closed` wraps x_P = x_0.
template <class Real>
Real cycle_defect(const basic_rational_map<Real>& f, const std::vector<basic_sphere_point<Real>>& x)
{
    Real worst(0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Real d = chordal_distance(f(x[i]), x[(i + 1) % x.size()]);
        if (!(d <= worst))
            worst = d;
    }
    return worst;
}

template <class Real>
struct CycleSolution {
    std::vector<basic_sphere_point<Real>> points;
    Real defect{};
    int iterations = 0;
    bool converged = false;
};

struct CycleNewtonOptions {
    int max_iterations = 80;
    int max_halvings = 40;
    double tolerance = 1e-14; // target max chordal defect
};

/// Multiple-shooting Newton for a closed cycle x_0 -> x_1 -> ... -> x_{P-1} -> x_0.
/// Each unknown lives in its own canonical chart; the linear system is solved by
/// `solve_cyclic_bidiagonal`. Damped by step halving on defect increase.
template <class Real>
CycleSolution<Real> solve_cycle(const basic_rational_map<Real>& f, std::vector<basic_sphere_point<Real>> x,
                                const CycleNewtonOptions& opt = {})
{
    using C = std::complex<Real>;
    using Point = basic_sphere_point<Real>;
    const std::size_t P = x.size();
    require(P >= 1, "cycle needs at least one point");
    const Real tol(opt.tolerance);
    CycleSolution<Real> out;
    Real defect = cycle_defect(f, x);
    std::vector<C> a(P), rhs(P);
    for (int it = 0; it < opt.max_iterations; ++it) {
        out.iterations = it;
        if (defect <= tol) {
            out.converged = true;
            break;
        }
        bool finite = true;
        for (std::size_t i = 0; i < P; ++i) {
            const Point& nxt = x[(i + 1) % P];
            const auto node = shooting_node(f, x[i], nxt);
            a[i] = node.first;
            rhs[i] = nxt.chart_value() - node.image;
            using std::isfinite;
            if (!isfinite(static_cast<double>(norm2(rhs[i]))) || !isfinite(static_cast<double>(norm2(a[i]))))
                finite = false;
        }
        if (!finite)
            break;
        std::vector<C> delta;
        try {
            delta = solve_cyclic_bidiagonal(a, rhs);
        } catch (const Error&) {
            break;
        }
        Real scale(1);
        bool improved = false;
        std::vector<Point> trial(P);
        for (int h = 0; h <= opt.max_halvings; ++h) {
            bool ok = true;
            for (std::size_t i = 0; i < P && ok; ++i) {
                const C u = x[i].chart_value() + scale * delta[i];
                using std::isfinite;
                if (!isfinite(static_cast<double>(norm2(u)))) {
                    ok = false;
                    break;
                }
                trial[i] = Point::from_chart(u, x[i].in_finite_chart());
            }
            if (ok) {
                const Real d = cycle_defect(f, trial);
                if (d < defect) {
                    x = trial;
                    defect = d;
                    improved = true;
                    break;
                }
            }
            scale /= Real(2);
        }
        if (!improved)
            break;
        out.iterations = it + 1;
    }
    if (defect <= tol)
        out.converged = true;
    out.points = std::move(x);
    out.defect = defect;
    return out;
}

/// Multiplier of a cycle as a complex number (may overflow to infinity) and log|multiplier|.
template <class Real>
void cycle_multiplier(const basic_rational_map<Real>& f, const std::vector<basic_sphere_point<Real>>& x,
                      std::complex<Real>& multiplier, Real& log_abs)
{
    using C = std::complex<Real>;
    using std::abs;
    using std::log;
    multiplier = C(1);
    log_abs = Real(0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto node = shooting_node(f, x[i], x[(i + 1) % x.size()]);
        multiplier *= node.first;
        log_abs += log(abs(node.first));
    }
}

} // namespace nsdyn

#endif
