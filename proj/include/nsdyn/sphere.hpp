#ifndef NSDYN_SPHERE_HPP
#define NSDYN_SPHERE_HPP

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "error.hpp"

namespace nsdyn {

template <class Real>
inline Real norm2(const std::complex<Real>& z)
{
    return z.real() * z.real() + z.imag() * z.imag();
}

/// Projective point [a:b] of the Riemann sphere, z = a/b.
///
/// Stored in a canonical max-modulus form: either b == 1 and |a| <= 1 (the
/// finite chart, coordinate z = a) or a == 1 and |b| < 1 (the chart at
/// infinity, coordinate w = b = 1/z). One coordinate is therefore exactly 1,
/// which makes normalization idempotent bit-for-bit.
template <class Real>
class basic_sphere_point {
public:
    using real_type = Real;
    using complex_type = std::complex<Real>;

    basic_sphere_point() : a_(0), b_(1) {}

    basic_sphere_point(const complex_type& a, const complex_type& b)
    {
        assign(a, b);
    }

    static basic_sphere_point finite(const complex_type& z) { return basic_sphere_point(z, complex_type(1)); }
    static basic_sphere_point infinity() { return basic_sphere_point(complex_type(1), complex_type(0)); }

    /// Point from a value in the chart `finite_chart ? z : w`.
    static basic_sphere_point from_chart(const complex_type& u, bool finite_chart)
    {
        return finite_chart ? basic_sphere_point(u, complex_type(1)) : basic_sphere_point(complex_type(1), u);
    }

    const complex_type& a() const { return a_; }
    const complex_type& b() const { return b_; }

    bool is_infinity() const { return b_ == complex_type(0); }

    /// True when the point is stored in the z-chart (|z| <= 1).
    bool in_finite_chart() const { return b_ == complex_type(1); }

    /// Coordinate in the canonical chart: z when |z| <= 1, w = 1/z otherwise.
    complex_type chart_value() const { return in_finite_chart() ? a_ : b_; }

    /// Coordinate in the requested chart (may be large or infinite off the canonical chart).
    complex_type in_chart(bool finite_chart) const
    {
        if (finite_chart)
            return in_finite_chart() ? a_ : complex_type(1) / b_;
        return in_finite_chart() ? complex_type(1) / a_ : b_;
    }

    /// z = a/b; infinite components when the point is infinity.
    complex_type value() const
    {
        if (in_finite_chart())
            return a_;
        if (is_infinity())
            return complex_type(std::numeric_limits<Real>::infinity(), 0);
        return complex_type(1) / b_;
    }

    template <class Other>
    basic_sphere_point<Other> cast() const
    {
        using oc = std::complex<Other>;
        return basic_sphere_point<Other>(oc(Other(a_.real()), Other(a_.imag())),
                                         oc(Other(b_.real()), Other(b_.imag())));
    }

    /// Same point, bitwise. Use `same_point` for the tolerance-based projective equality.
    friend bool operator==(const basic_sphere_point& x, const basic_sphere_point& y)
    {
        return x.a_ == y.a_ && x.b_ == y.b_;
    }

private:
    void assign(complex_type a, complex_type b)
    {
        const Real one(1);
        const Real slack = one + 4 * std::numeric_limits<Real>::epsilon();
        if (b == complex_type(1) && norm2(a) <= slack) {
            a_ = a;
            b_ = b;
            return;
        }
        if (a == complex_type(1) && norm2(b) < one) {
            a_ = a;
            b_ = b;
            return;
        }
        const Real na = norm2(a);
        const Real nb = norm2(b);
        if (!(na > 0 || nb > 0))
            fail(ErrorCode::invalid_argument, "projective point [0:0]");
        if (!std::isfinite(static_cast<double>(na)) || !std::isfinite(static_cast<double>(nb)))
            fail(ErrorCode::invalid_argument, "non-finite projective coordinates");
        if (na <= nb) {
            a_ = a / b;
            b_ = complex_type(1);
        } else {
            b_ = b / a;
            a_ = complex_type(1);
        }
    }

    complex_type a_;
    complex_type b_;
};

using SpherePoint = basic_sphere_point<double>;

/// Chordal metric on the unit-diameter-2 sphere: 2|a1 b2 - a2 b1| / (|(a1,b1)| |(a2,b2)|).
template <class Real>
Real chordal_distance(const basic_sphere_point<Real>& x, const basic_sphere_point<Real>& y)
{
    using std::abs;
    using std::sqrt;
    const auto cross = x.a() * y.b() - y.a() * x.b();
    const Real nx = norm2(x.a()) + norm2(x.b());
    const Real ny = norm2(y.a()) + norm2(y.b());
    Real d = Real(2) * abs(cross) / sqrt(nx * ny);
    return d > Real(2) ? Real(2) : d;
}

/// Projective equality: cross-product magnitude below `tol` (points are normalized).
template <class Real>
bool same_point(const basic_sphere_point<Real>& x, const basic_sphere_point<Real>& y, Real tol = Real(1e-10))
{
    using std::abs;
    return abs(x.a() * y.b() - y.a() * x.b()) < tol;
}

/// Unit vector in R^3 under inverse stereographic projection; chordal distance is
/// the Euclidean distance between these vectors.
inline std::array<double, 3> to_cartesian(const SpherePoint& p)
{
    const auto& a = p.a();
    const auto& b = p.b();
    const double na = norm2(a);
    const double nb = norm2(b);
    const double s = na + nb;
    const auto ab = a * std::conj(b);
    return {2 * ab.real() / s, 2 * ab.imag() / s, (na - nb) / s};
}

/// Inverse of `to_cartesian` for a unit vector (x, y, t).
inline SpherePoint from_cartesian(double x, double y, double t)
{
    // z = (x + iy)/(1 - t) = (1 + t)/(x - iy); pick the better-conditioned form.
    if (t <= 0)
        return SpherePoint(std::complex<double>(x, y), std::complex<double>(1 - t, 0));
    return SpherePoint(std::complex<double>(1 + t, 0), std::complex<double>(x, -y));
}

/// Möbius transformation acting on homogeneous coordinates by a 2x2 matrix.
class MobiusMap {
public:
    using complex_type = std::complex<double>;

    MobiusMap() : m_{complex_type(1), 0, 0, complex_type(1)} { normalize(); }

    MobiusMap(complex_type m00, complex_type m01, complex_type m10, complex_type m11) : m_{m00, m01, m10, m11}
    {
        normalize();
        using std::abs;
        if (!(abs(det()) > 1e-12))
            fail(ErrorCode::invalid_argument, "singular Möbius matrix");
    }

    static MobiusMap identity() { return {}; }
    static MobiusMap translation(complex_type t) { return {1, t, 0, 1}; }
    static MobiusMap scaling(complex_type s) { return {s, 0, 0, 1}; }
    static MobiusMap inversion() { return {0, 1, 1, 0}; }

    /// Rotation of the sphere from SU(2): [[alpha, -conj(beta)], [beta, conj(alpha)]].
    static MobiusMap rotation(complex_type alpha, complex_type beta)
    {
        return {alpha, -std::conj(beta), beta, std::conj(alpha)};
    }

    /// Rotation from three angles in [0, 1); deterministic given the angles.
    static MobiusMap rotation_from_angles(double u1, double u2, double u3)
    {
        const double two_pi = 2 * std::numbers::pi;
        const double c = std::sqrt(u1);
        const double s = std::sqrt(1 - u1);
        return rotation(std::polar(c, two_pi * u2), std::polar(s, two_pi * u3));
    }

    const complex_type& operator()(int r, int c) const { return m_[2 * r + c]; }

    complex_type det() const { return m_[0] * m_[3] - m_[1] * m_[2]; }

    SpherePoint apply(const SpherePoint& x) const
    {
        return SpherePoint(m_[0] * x.a() + m_[1] * x.b(), m_[2] * x.a() + m_[3] * x.b());
    }

    SpherePoint operator()(const SpherePoint& x) const { return apply(x); }

    MobiusMap inverse() const { return {m_[3], -m_[1], -m_[2], m_[0]}; }

    /// (this ∘ other)
    MobiusMap compose(const MobiusMap& o) const
    {
        return {m_[0] * o.m_[0] + m_[1] * o.m_[2], m_[0] * o.m_[1] + m_[1] * o.m_[3],
                m_[2] * o.m_[0] + m_[3] * o.m_[2], m_[2] * o.m_[1] + m_[3] * o.m_[3]};
    }

private:
    void normalize()
    {
        double f = 0;
        for (const auto& e : m_)
            f += norm2(e);
        f = std::sqrt(f);
        if (f > 0)
            for (auto& e : m_)
                e /= f;
    }

    std::array<complex_type, 4> m_;
};

inline SpherePoint apply_mobius(const MobiusMap& g, const SpherePoint& x) { return g.apply(x); }

} // namespace nsdyn

#endif
