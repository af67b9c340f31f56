#ifndef NSDYN_RATMAP_HPP
#define NSDYN_RATMAP_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "polynomial.hpp"
#include "sphere.hpp"

namespace nsdyn {

namespace detail {

/// Determinant by LU with partial pivoting.
template <class Real>
std::complex<Real> determinant(std::vector<std::complex<Real>> m, std::size_t n)
{
    using C = std::complex<Real>;
    C det(1);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (norm2(m[r * n + col]) > norm2(m[piv * n + col]))
                piv = r;
        if (m[piv * n + col] == C(0))
            return C(0);
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c)
                std::swap(m[piv * n + c], m[col * n + c]);
            det = -det;
        }
        const C p = m[col * n + col];
        det *= p;
        for (std::size_t r = col + 1; r < n; ++r) {
            const C factor = m[r * n + col] / p;
            if (factor == C(0))
                continue;
            for (std::size_t c = col; c < n; ++c)
                m[r * n + c] -= factor * m[col * n + c];
        }
    }
    return det;
}

/// Value, first and second derivative of a polynomial by Horner.
template <class Real>
void horner2(const basic_poly<Real>& p, const std::complex<Real>& t, std::complex<Real>& v, std::complex<Real>& d1,
             std::complex<Real>& d2)
{
    using C = std::complex<Real>;
    v = C(0);
    d1 = C(0);
    d2 = C(0);
    for (auto it = p.rbegin(); it != p.rend(); ++it) {
        d2 = d2 * t + d1;
        d1 = d1 * t + v;
        v = v * t + *it;
    }
    d2 *= Real(2);
}

template <class Real>
std::complex<Real> ipow(std::complex<Real> base, int e)
{
    std::complex<Real> r(1);
    if (e < 0) {
        base = std::complex<Real>(1) / base;
        e = -e;
    }
    while (e > 0) {
        if (e & 1)
            r *= base;
        base *= base;
        e >>= 1;
    }
    return r;
}

} // namespace detail

/// Value and partial derivatives of one homogeneous form of degree d at (a, b).
template <class Real>
struct FormPartials {
    std::complex<Real> v, da, db, daa, dab, dbb;
};

/// Degree-d rational map f = P/Q acting on the sphere through the homogenized
/// forms (P_h, Q_h). Coefficients are in ascending powers, padded to length d+1.
template <class Real>
class basic_rational_map {
public:
    using real_type = Real;
    using complex_type = std::complex<Real>;
    using poly_type = basic_poly<Real>;
    using point_type = basic_sphere_point<Real>;

    basic_rational_map() : basic_rational_map({0, 0, 1}, {1}) {}

    basic_rational_map(poly_type p, poly_type q) : basic_rational_map(std::move(p), std::move(q), 2) {}

    /// Degree-one maps are allowed only as explicit fixtures (e.g. the identity on S^1).
    static basic_rational_map degree_one_fixture(poly_type p, poly_type q)
    {
        return basic_rational_map(std::move(p), std::move(q), 1);
    }

    static basic_rational_map from_coefficients(const std::vector<complex_type>& c, int degree)
    {
        const std::size_t n = static_cast<std::size_t>(degree) + 1;
        require(c.size() == 2 * n, "coefficient vector length must be 2d+2");
        poly_type p(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n));
        poly_type q(c.begin() + static_cast<std::ptrdiff_t>(n), c.end());
        return basic_rational_map(std::move(p), std::move(q), degree < 2 ? 1 : 2);
    }

    int degree() const { return degree_; }
    const poly_type& p() const { return p_; }
    const poly_type& q() const { return q_; }

    /// (p_0..p_d, q_0..q_d)
    std::vector<complex_type> coefficients() const
    {
        std::vector<complex_type> c(p_);
        c.insert(c.end(), q_.begin(), q_.end());
        return c;
    }

    /// Homogeneous resultant of the normalized coefficient vectors.
    complex_type resultant() const { return resultant_; }

    template <class Other>
    basic_rational_map<Other> cast() const
    {
        basic_poly<Other> p, q;
        for (const auto& c : p_)
            p.emplace_back(Other(c.real()), Other(c.imag()));
        for (const auto& c : q_)
            q.emplace_back(Other(c.real()), Other(c.imag()));
        if (degree_ == 1)
            return basic_rational_map<Other>::degree_one_fixture(std::move(p), std::move(q));
        return basic_rational_map<Other>(std::move(p), std::move(q));
    }

    /// Partials of P_h and Q_h at (a, b); `order` 0, 1 or 2 limits the work.
    void partials(const complex_type& a, const complex_type& b, int order, FormPartials<Real>& P,
                  FormPartials<Real>& Q) const
    {
        const bool finite = norm2(a) <= norm2(b);
        const complex_type t = finite ? a / b : b / a;
        const complex_type lead = finite ? b : a;
        const poly_type& pp = finite ? p_ : p_rev_;
        const poly_type& qq = finite ? q_ : q_rev_;
        form(pp, t, lead, finite, order, P);
        form(qq, t, lead, finite, order, Q);
    }

    /// [P_h(x) : Q_h(x)].
    point_type operator()(const point_type& x) const { return evaluate(x); }

    point_type evaluate(const point_type& x) const
    {
        FormPartials<Real> P, Q;
        partials(x.a(), x.b(), 0, P, Q);
        return point_type(P.v, Q.v);
    }

private:
    basic_rational_map(poly_type p, poly_type q, int min_degree)
    {
        auto strip = [](poly_type& v) {
            while (!v.empty() && v.back() == complex_type(0))
                v.pop_back();
        };
        strip(p);
        strip(q);
        require(!p.empty() && !q.empty(), "rational map needs nonzero numerator and denominator");
        const int d = static_cast<int>(std::max(p.size(), q.size())) - 1;
        if (d < min_degree)
            fail(ErrorCode::invalid_argument, "rational map degree " + std::to_string(d) + " below " +
                                                  std::to_string(min_degree));
        p.resize(static_cast<std::size_t>(d) + 1);
        q.resize(static_cast<std::size_t>(d) + 1);
        degree_ = d;
        p_ = std::move(p);
        q_ = std::move(q);
        p_rev_.assign(p_.rbegin(), p_.rend());
        q_rev_.assign(q_.rbegin(), q_.rend());
        resultant_ = compute_resultant();
        using std::abs;
        if (!(abs(resultant_) > Real(1e-10)))
            fail(ErrorCode::invalid_argument, "numerator and denominator share a root (resultant ~ 0)");
    }

    complex_type compute_resultant() const
    {
        const std::size_t d = static_cast<std::size_t>(degree_);
        auto normalized = [](const poly_type& v) {
            Real m(0);
            for (const auto& c : v) {
                using std::abs;
                m = std::max(m, Real(abs(c)));
            }
            poly_type r(v);
            for (auto& c : r)
                c /= m;
            return r;
        };
        const poly_type pn = normalized(p_), qn = normalized(q_);
        // Sylvester matrix of the two degree-d binary forms, descending powers.
        const std::size_t n = 2 * d;
        std::vector<complex_type> m(n * n, complex_type(0));
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t k = 0; k <= d; ++k) {
                m[r * n + r + k] = pn[d - k];
                m[(r + d) * n + r + k] = qn[d - k];
            }
        return detail::determinant(std::move(m), n);
    }

    // Partials of the form F(a,b) = sum c_k a^k b^{d-k}; `pp` is the polynomial in
    // t = a/b (finite) or in s = b/a (reversed).
    void form(const poly_type& pp, const complex_type& t, const complex_type& lead, bool finite, int order,
              FormPartials<Real>& out) const
    {
        const int d = degree_;
        complex_type v, d1, d2;
        detail::horner2(pp, t, v, d1, d2);
        const complex_type ld2 = detail::ipow(lead, d - 2);
        const complex_type ld1 = ld2 * lead;
        out.v = ld1 * lead * v;
        if (order < 1)
            return;
        const Real dd(d);
        const complex_type along = ld1 * d1;                // derivative along the small coordinate
        const complex_type across = ld1 * (dd * v - t * d1); // derivative along the dominant one
        out.da = finite ? along : across;
        out.db = finite ? across : along;
        if (order < 2)
            return;
        const complex_type s_ss = ld2 * d2;
        const complex_type s_sl = ld2 * ((dd - 1) * d1 - t * d2);
        const complex_type s_ll = ld2 * (dd * (dd - 1) * v - Real(2) * (dd - 1) * t * d1 + t * t * d2);
        out.dab = s_sl;
        out.daa = finite ? s_ss : s_ll;
        out.dbb = finite ? s_ll : s_ss;
    }

    int degree_ = 2;
    poly_type p_, q_, p_rev_, q_rev_;
    complex_type resultant_;
};

using RationalMap = basic_rational_map<double>;

/// Homogeneous lift (A, B) of a point together with first and second
/// derivatives with respect to one complex chart parameter.
template <class Real>
struct HomogeneousJet {
    using C = std::complex<Real>;
    C A, B, dA, dB, ddA, ddB;

    /// Lift of the chart coordinate u (finite chart: (u, 1); chart at infinity: (1, u)).
    static HomogeneousJet lift(const C& u, bool finite_chart)
    {
        if (finite_chart)
            return {u, C(1), C(1), C(0), C(0), C(0)};
        return {C(1), u, C(0), C(1), C(0), C(0)};
    }

    basic_sphere_point<Real> point() const { return basic_sphere_point<Real>(A, B); }

    bool dominant_is_a() const { return norm2(A) > norm2(B); }

    /// Chart value with first and second derivatives; the chart is z (finite) or w = 1/z.
    void chart(bool finite_chart, C& v, C& dv, C& ddv) const
    {
        const C& num = finite_chart ? A : B;
        const C& den = finite_chart ? B : A;
        const C& dnum = finite_chart ? dA : dB;
        const C& dden = finite_chart ? dB : dA;
        const C& ddnum = finite_chart ? ddA : ddB;
        const C& ddden = finite_chart ? ddB : ddA;
        v = num / den;
        const C w = (dnum * den - num * dden);
        dv = w / (den * den);
        ddv = (ddnum * den - num * ddden) / (den * den) - Real(2) * dden * w / (den * den * den);
    }
};

/// One application of f to a jet (order 0, 1 or 2); rescales by the dominant component.
template <class Real>
HomogeneousJet<Real> step_jet(const basic_rational_map<Real>& f, const HomogeneousJet<Real>& j, int order)
{
    using C = std::complex<Real>;
    FormPartials<Real> P, Q;
    f.partials(j.A, j.B, order, P, Q);
    HomogeneousJet<Real> out{P.v, Q.v, C(0), C(0), C(0), C(0)};
    if (order >= 1) {
        out.dA = P.da * j.dA + P.db * j.dB;
        out.dB = Q.da * j.dA + Q.db * j.dB;
    }
    if (order >= 2) {
        out.ddA = P.daa * j.dA * j.dA + Real(2) * P.dab * j.dA * j.dB + P.dbb * j.dB * j.dB + P.da * j.ddA +
                  P.db * j.ddB;
        out.ddB = Q.daa * j.dA * j.dA + Real(2) * Q.dab * j.dA * j.dB + Q.dbb * j.dB * j.dB + Q.da * j.ddA +
                  Q.db * j.ddB;
    }
    const C s = out.dominant_is_a() ? out.A : out.B;
    if (s == C(0))
        fail(ErrorCode::solver_failed, "rational map evaluated to [0:0]");
    const C inv = C(1) / s;
    out.A *= inv;
    out.B *= inv;
    out.dA *= inv;
    out.dB *= inv;
    out.ddA *= inv;
    out.ddB *= inv;
    return out;
}

/// Jet of f^n at x in x's canonical chart.
template <class Real>
HomogeneousJet<Real> iterate_jet(const basic_rational_map<Real>& f, const basic_sphere_point<Real>& x, std::size_t n,
                                 int order)
{
    auto j = HomogeneousJet<Real>::lift(x.chart_value(), x.in_finite_chart());
    for (std::size_t i = 0; i < n; ++i)
        j = step_jet(f, j, order);
    return j;
}

template <class Real>
basic_sphere_point<Real> evaluate(const basic_rational_map<Real>& f, const basic_sphere_point<Real>& x)
{
    return f.evaluate(x);
}

/// Derivative of the chart representation of f at x: chart of x on input, chart of f(x) on output.
struct ChartDerivative {
    std::complex<double> value;
    bool input_finite_chart;
    bool output_finite_chart;
};

template <class Real>
struct ChartJet {
    std::complex<Real> value, first, second;
    bool input_finite_chart, output_finite_chart;
};

/// Value, first and second derivative of f^n from the chart of x to a chosen output chart
/// (default: the canonical chart of f^n(x)).
template <class Real>
ChartJet<Real> chart_jet(const basic_rational_map<Real>& f, const basic_sphere_point<Real>& x, std::size_t n = 1,
                         int output_chart = -1)
{
    const auto j = iterate_jet(f, x, n, 2);
    const bool out_finite = output_chart < 0 ? j.point().in_finite_chart() : output_chart == 1;
    ChartJet<Real> r{};
    r.input_finite_chart = x.in_finite_chart();
    r.output_finite_chart = out_finite;
    j.chart(out_finite, r.value, r.first, r.second);
    return r;
}

inline ChartDerivative sphere_derivative(const RationalMap& f, const SpherePoint& x)
{
    const auto cj = chart_jet(f, x, 1);
    return {cj.first, cj.input_finite_chart, cj.output_finite_chart};
}

/// Conjugate g ∘ f ∘ g^{-1}.
inline RationalMap conjugate(const RationalMap& f, const MobiusMap& g)
{
    const MobiusMap h = g.inverse();
    // homogeneous substitution (a, b) -> h(a, b) with b = 1: linear polynomials in z
    const Poly ha = {h(0, 1), h(0, 0)};
    const Poly hb = {h(1, 1), h(1, 0)};
    const int d = f.degree();
    auto substitute = [&](const Poly& c) {
        Poly acc;
        for (int k = 0; k <= d; ++k) {
            Poly term = {c[static_cast<std::size_t>(k)]};
            for (int i = 0; i < k; ++i)
                term = poly::mul(term, ha);
            for (int i = 0; i < d - k; ++i)
                term = poly::mul(term, hb);
            acc = poly::add(acc, term);
        }
        acc.resize(static_cast<std::size_t>(d) + 1);
        return acc;
    };
    const Poly P = substitute(f.p());
    const Poly Q = substitute(f.q());
    Poly np = poly::add(poly::scale(P, g(0, 0)), poly::scale(Q, g(0, 1)));
    Poly nq = poly::add(poly::scale(P, g(1, 0)), poly::scale(Q, g(1, 1)));
    // remove rounding-level leading coefficients so the degree stays exact
    const double s = std::max(poly::max_modulus(np), poly::max_modulus(nq));
    for (auto* v : {&np, &nq})
        for (auto& c : *v)
            if (std::abs(c) < 1e-15 * s)
                c = 0;
    if (d == 1)
        return RationalMap::degree_one_fixture(np, nq);
    return RationalMap(np, nq);
}

struct CriticalPoint {
    SpherePoint point;
    int multiplicity = 1;
};

/// Critical points with multiplicity; multiplicities sum to 2d - 2.
struct CriticalSet {
    std::vector<CriticalPoint> points;

    int total_multiplicity() const
    {
        int s = 0;
        for (const auto& c : points)
            s += c.multiplicity;
        return s;
    }
};

namespace detail {

/// Deterministic order on the sphere: by distance from 0, then argument.
inline bool sphere_less(const SpherePoint& x, const SpherePoint& y)
{
    const double dx = chordal_distance(x, SpherePoint());
    const double dy = chordal_distance(y, SpherePoint());
    if (dx != dy)
        return dx < dy;
    const auto vx = x.value(), vy = y.value();
    return std::arg(vx) < std::arg(vy);
}

/// Greedy merge of points within `radius` (chordal); the merged point is the
/// mean in the chart of the first member.
inline std::vector<CriticalPoint> cluster_points(const std::vector<SpherePoint>& pts, double radius)
{
    std::vector<CriticalPoint> out;
    std::vector<std::vector<SpherePoint>> members;
    for (const auto& p : pts) {
        bool placed = false;
        for (std::size_t c = 0; c < members.size(); ++c)
            if (chordal_distance(members[c].front(), p) < radius) {
                members[c].push_back(p);
                placed = true;
                break;
            }
        if (!placed)
            members.push_back({p});
    }
    for (const auto& m : members) {
        const bool finite = m.front().in_finite_chart();
        std::complex<double> mean(0);
        for (const auto& p : m)
            mean += p.in_chart(finite);
        mean /= double(m.size());
        out.push_back({SpherePoint::from_chart(mean, finite), static_cast<int>(m.size())});
    }
    std::sort(out.begin(), out.end(),
              [](const CriticalPoint& a, const CriticalPoint& b) { return sphere_less(a.point, b.point); });
    return out;
}

} // namespace detail

/// Wronskian W = P'Q - PQ'.
inline Poly wronskian(const RationalMap& f)
{
    return poly::sub(poly::mul(poly::derivative(f.p()), f.q()), poly::mul(f.p(), poly::derivative(f.q())));
}

inline CriticalSet critical_points(const RationalMap& f)
{
    require(f.degree() >= 2, "critical points need degree >= 2");
    const int d = f.degree();
    const int total = 2 * d - 2;
    Poly w = wronskian(f);
    w.resize(static_cast<std::size_t>(total) + 1);
    const Poly wt = poly::trimmed(w, 1e-13);
    const int deg = static_cast<int>(wt.size()) - 1;
    std::vector<SpherePoint> roots;
    if (deg >= 1) {
        const auto r = polynomial_roots(wt);
        const double wn = poly::max_modulus(wt);
        for (const auto& z : r) {
            const double scale = std::pow(std::max(1.0, std::abs(z)), deg);
            if (std::abs(poly::eval(wt, z)) > 1e-8 * wn * scale)
                fail(ErrorCode::root_finding_failed, "Wronskian root residual too large");
            roots.push_back(SpherePoint::finite(z));
        }
    }
    for (int k = deg < 0 ? 0 : deg; k < total; ++k)
        roots.push_back(SpherePoint::infinity());
    CriticalSet set{detail::cluster_points(roots, 1e-6)};
    if (set.total_multiplicity() != total)
        fail(ErrorCode::root_finding_failed, "critical multiplicities do not sum to 2d-2");
    return set;
}

/// Orbit x, f(x), ..., f^n(x).
struct OrbitRecord {
    SpherePoint start;
    std::vector<SpherePoint> points;
    RationalMap map;

    std::size_t length() const { return points.empty() ? 0 : points.size() - 1; }
};

inline OrbitRecord iterate_orbit(const RationalMap& f, const SpherePoint& x, std::size_t n)
{
    require(n >= 1, "iterate_orbit needs n >= 1");
    OrbitRecord rec{x, {}, f};
    rec.points.reserve(n + 1);
    rec.points.push_back(x);
    for (std::size_t i = 0; i < n; ++i)
        rec.points.push_back(f(rec.points.back()));
    return rec;
}

} // namespace nsdyn

#endif
