#ifndef NSDYN_POLYNOMIAL_HPP
#define NSDYN_POLYNOMIAL_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "error.hpp"
#include "sphere.hpp"

namespace nsdyn {

/// Dense polynomial, coefficients in ascending powers.
template <class Real>
using basic_poly = std::vector<std::complex<Real>>;

using Poly = basic_poly<double>;

namespace poly {

/// Index of the highest coefficient whose modulus exceeds rel_tol * max modulus; -1 for zero.
template <class Real>
int degree(const basic_poly<Real>& p, Real rel_tol = Real(0))
{
    Real scale(0);
    for (const auto& c : p)
        scale = std::max(scale, Real(std::sqrt(static_cast<double>(norm2(c)))));
    for (int k = static_cast<int>(p.size()) - 1; k >= 0; --k) {
        using std::abs;
        if (abs(p[k]) > rel_tol * scale && p[k] != std::complex<Real>(0))
            return k;
    }
    return -1;
}

template <class Real>
basic_poly<Real> trimmed(basic_poly<Real> p, Real rel_tol = Real(0))
{
    p.resize(static_cast<std::size_t>(degree(p, rel_tol) + 1));
    return p;
}

template <class Real>
std::complex<Real> eval(const basic_poly<Real>& p, const std::complex<Real>& z)
{
    std::complex<Real> acc(0);
    for (auto it = p.rbegin(); it != p.rend(); ++it)
        acc = acc * z + *it;
    return acc;
}

template <class Real>
basic_poly<Real> derivative(const basic_poly<Real>& p)
{
    if (p.size() <= 1)
        return {};
    basic_poly<Real> d(p.size() - 1);
    for (std::size_t k = 1; k < p.size(); ++k)
        d[k - 1] = p[k] * Real(k);
    return d;
}

template <class Real>
basic_poly<Real> add(const basic_poly<Real>& p, const basic_poly<Real>& q)
{
    basic_poly<Real> r(std::max(p.size(), q.size()));
    for (std::size_t k = 0; k < p.size(); ++k)
        r[k] += p[k];
    for (std::size_t k = 0; k < q.size(); ++k)
        r[k] += q[k];
    return r;
}

template <class Real>
basic_poly<Real> scale(basic_poly<Real> p, const std::complex<Real>& s)
{
    for (auto& c : p)
        c *= s;
    return p;
}

template <class Real>
basic_poly<Real> sub(const basic_poly<Real>& p, const basic_poly<Real>& q)
{
    return add(p, scale(q, std::complex<Real>(-1)));
}

template <class Real>
basic_poly<Real> mul(const basic_poly<Real>& p, const basic_poly<Real>& q)
{
    if (p.empty() || q.empty())
        return {};
    basic_poly<Real> r(p.size() + q.size() - 1);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j)
            r[i + j] += p[i] * q[j];
    return r;
}

inline double max_modulus(const Poly& p)
{
    double m = 0;
    for (const auto& c : p)
        m = std::max(m, std::abs(c));
    return m;
}

/// Ratio p'(z)/p(z), evaluated through the reversed polynomial when |z| > 1.
inline std::complex<double> log_derivative(const Poly& p, const Poly& dp, const std::complex<double>& z)
{
    const int n = static_cast<int>(p.size()) - 1;
    if (std::abs(z) <= 1.0)
        return eval(dp, z) / eval(p, z);
    const std::complex<double> s = 1.0 / z;
    std::complex<double> r(0), dr(0);
    // r(s) = sum p_k s^{n-k}
    for (int k = 0; k <= n; ++k) {
        dr = dr * s + r;
        r = r * s + p[k];
    }
    return s * (double(n) - s * dr / r);
}

} // namespace poly

/// Aberth–Ehrlich simultaneous iteration for the `degree` roots of a polynomial
/// accessible only through its logarithmic derivative `ratio(z) = N'(z)/N(z)`.
///
/// `ratio` may return a non-finite value when z is (numerically) a root; such a
/// root is left in place. Gauss–Seidel updates, so the result is deterministic.
template <class Ratio>
std::vector<std::complex<double>> aberth_roots(std::size_t degree, Ratio&& ratio,
                                               std::vector<std::complex<double>> guesses,
                                               int max_iterations = 500, double tol = 1e-14)
{
    using C = std::complex<double>;
    if (guesses.size() != degree)
        fail(ErrorCode::invalid_argument, "aberth: guess count differs from degree");
    std::vector<bool> done(degree, false);
    for (int iter = 0; iter < max_iterations; ++iter) {
        bool all_done = true;
        for (std::size_t k = 0; k < degree; ++k) {
            if (done[k])
                continue;
            const C zk = guesses[k];
            const C r = ratio(zk);
            if (!std::isfinite(r.real()) || !std::isfinite(r.imag())) {
                done[k] = true;
                continue;
            }
            C sum(0);
            for (std::size_t j = 0; j < degree; ++j)
                if (j != k) {
                    const C diff = zk - guesses[j];
                    if (diff != C(0))
                        sum += 1.0 / diff;
                }
            const C denom = r - sum;
            if (denom == C(0)) {
                done[k] = true;
                continue;
            }
            const C w = 1.0 / denom;
            guesses[k] = zk - w;
            if (std::abs(w) <= tol * (1.0 + std::abs(guesses[k])))
                done[k] = true;
            else
                all_done = false;
        }
        if (all_done)
            break;
    }
    return guesses;
}

/// Evenly spread starting points on a circle of the given radius (rotated off the axes).
inline std::vector<std::complex<double>> circle_guesses(std::size_t n, double radius)
{
    std::vector<std::complex<double>> g(n);
    for (std::size_t k = 0; k < n; ++k)
        g[k] = std::polar(radius, 2 * std::numbers::pi * (double(k) + 0.25) / double(n) + 0.4);
    return g;
}

/// All roots of a polynomial (trailing zero coefficients must already be stripped).
inline std::vector<std::complex<double>> polynomial_roots(const Poly& p)
{
    const int n = static_cast<int>(p.size()) - 1;
    if (n < 1)
        return {};
    if (p.back() == std::complex<double>(0))
        fail(ErrorCode::invalid_argument, "polynomial_roots: zero leading coefficient");
    // zero roots exactly
    std::size_t zeros = 0;
    while (zeros < p.size() && p[zeros] == std::complex<double>(0))
        ++zeros;
    Poly q(p.begin() + static_cast<std::ptrdiff_t>(zeros), p.end());
    std::vector<std::complex<double>> roots(zeros, std::complex<double>(0));
    const int m = static_cast<int>(q.size()) - 1;
    if (m >= 1) {
        const double radius = std::pow(std::abs(q.front()) / std::abs(q.back()), 1.0 / m);
        const Poly dq = poly::derivative(q);
        auto found = aberth_roots(
            static_cast<std::size_t>(m), [&](std::complex<double> z) { return poly::log_derivative(q, dq, z); },
            circle_guesses(static_cast<std::size_t>(m), radius > 0 ? radius : 1.0));
        roots.insert(roots.end(), found.begin(), found.end());
    }
    return roots;
}

} // namespace nsdyn

#endif
