#ifndef NSDYN_BIFURCATION_HPP
#define NSDYN_BIFURCATION_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/float128.hpp>

#include "cycle_newton.hpp"
#include "error.hpp"
#include "family.hpp"
#include "measures.hpp"
#include "orbitstat.hpp"
#include "parallel.hpp"
#include "periodic.hpp"
#include "postcritical.hpp"
#include "ratmap.hpp"

namespace nsdyn {

using quad = boost::multiprecision::float128;

/// Family member with coefficients evaluated in `Real` (no domain check).
template <class Real>
basic_rational_map<Real> family_member_as(const FamilySpec& fam, const std::complex<Real>& lambda)
{
    using C = std::complex<Real>;
    const auto base = fam.base.coefficients();
    std::vector<C> c(base.size());
    for (std::size_t k = 0; k < c.size(); ++k)
        c[k] = C(Real(base[k].real()), Real(base[k].imag())) +
               lambda * C(Real(fam.direction[k].real()), Real(fam.direction[k].imag()));
    try {
        return basic_rational_map<Real>::from_coefficients(c, fam.base.degree());
    } catch (const Error& e) {
        fail(ErrorCode::degenerate_member, std::string("family member degenerate: ") + e.what());
    }
}

template <class Real>
std::string decimal(const Real& x)
{
    std::ostringstream os;
    os.precision(std::numeric_limits<Real>::max_digits10);
    os << x;
    return os.str();
}

namespace detail {

template <class Real>
Real eps_of()
{
    return std::numeric_limits<Real>::epsilon();
}

/// Newton on the chart derivative of g, started at a simple critical point of a nearby map.
template <class Real>
basic_sphere_point<Real> continue_critical(const basic_rational_map<Real>& g, basic_sphere_point<Real> c)
{
    using std::abs;
    const auto start = c;
    for (int it = 0; it < 60; ++it) {
        const auto cj = chart_jet(g, c, 1);
        if (cj.first == std::complex<Real>(0))
            return c;
        if (cj.second == std::complex<Real>(0))
            fail(ErrorCode::continuation_failed, "critical point is not simple");
        const auto step = cj.first / cj.second;
        const auto u = c.chart_value() - step;
        c = basic_sphere_point<Real>::from_chart(u, c.in_finite_chart());
        if (abs(step) <= Real(64) * eps_of<Real>() * std::max(Real(1), Real(abs(u))))
            break;
    }
    const auto cj = chart_jet(g, c, 1);
    if (!(abs(cj.first) <= Real(1e3) * eps_of<Real>() * std::max(Real(1), Real(abs(cj.second)))) ||
        !(chordal_distance(start, c) < Real(0.25)))
        fail(ErrorCode::continuation_failed, "critical point continuation diverged");
    return c;
}

/// Shooting-Newton continuation of a cycle of a nearby map.
template <class Real>
std::vector<basic_sphere_point<Real>> continue_cycle(const basic_rational_map<Real>& g,
                                                     const std::vector<basic_sphere_point<Real>>& x)
{
    CycleNewtonOptions opt;
    opt.tolerance = static_cast<double>(Real(64) * eps_of<Real>());
    const auto sol = solve_cycle(g, x, opt);
    if (!(sol.defect < Real(1e3) * eps_of<Real>()))
        fail(ErrorCode::continuation_failed, "cycle continuation did not converge");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!(chordal_distance(x[i], sol.points[i]) < Real(0.25)))
            fail(ErrorCode::continuation_failed, "cycle continuation jumped");
    return sol.points;
}

/// Data of one preperiodic relation f^{n}(c) = p used by the Phi map.
struct PhiRow {
    SpherePoint critical;
    int landing_step = 0;
    std::vector<SpherePoint> cycle; ///< base cycle, in scan order
    std::size_t landing_index = 0;
};

inline std::vector<PhiRow> phi_rows(const PostcriticalData& data)
{
    std::vector<PhiRow> rows;
    for (const auto& co : data.orbits) {
        if (co.flag != PostcriticalFlag::lands_on_cycle)
            fail(ErrorCode::invalid_argument, "every critical orbit must land on a cycle");
        if (co.critical.multiplicity != 1)
            fail(ErrorCode::invalid_argument, "critical points must be simple");
        rows.push_back({co.critical.point, co.landing_step, co.cycle->points,
                        static_cast<std::size_t>(co.landing_index)});
    }
    return rows;
}

/// Phi_j(g) = chart(g^{n_j}(c_j(g))) - chart(p_j(g)), in the chart of the base landing point.
inline std::complex<double> phi_value(const RationalMap& g, const PhiRow& row)
{
    const auto c = continue_critical(g, row.critical);
    const auto cyc = continue_cycle(g, row.cycle);
    SpherePoint y = c;
    for (int k = 0; k < row.landing_step; ++k)
        y = g(y);
    const bool fin = row.cycle[row.landing_index].in_finite_chart();
    return y.in_chart(fin) - cyc[row.landing_index].in_chart(fin);
}

} // namespace detail

// ---------------------------------------------------------------------------
// transversality

struct TransversalityOptions {
    double rank_tol = 1e-8;
};

struct TransversalityReport {
    std::size_t rows = 0, cols = 0;
    std::vector<std::complex<double>> jacobian; ///< row-major, rows = critical points, cols = free coefficients
    std::vector<double> singular_values;        ///< descending
    int rank_estimate = 0;
    double step_size = 0;
    double rank_tol = 0;
    std::size_t fixed_coefficient = 0; ///< index held at 1 after normalization
    std::vector<std::size_t> free_coefficients;
    std::vector<SpherePoint> critical_points;

    std::complex<double> entry(std::size_t r, std::size_t c) const { return jacobian[r * cols + c]; }

    /// sigma_min / sigma_1 over the rows (0 when sigma_1 = 0).
    double sigma_ratio() const
    {
        if (singular_values.empty() || singular_values.front() == 0)
            return 0;
        return singular_values.back() / singular_values.front();
    }
};

/// Coefficient vector scaled so its largest entry is exactly 1.
inline std::vector<std::complex<double>> normalized_coefficients(const RationalMap& f, std::size_t& fixed)
{
    auto c = f.coefficients();
    fixed = 0;
    for (std::size_t k = 1; k < c.size(); ++k)
        if (std::abs(c[k]) > std::abs(c[fixed]))
            fixed = k;
    const auto s = c[fixed];
    for (auto& v : c)
        v /= s;
    c[fixed] = 1;
    return c;
}

namespace detail {

inline std::vector<std::complex<double>> phi_jacobian(const RationalMap& f, const std::vector<PhiRow>& rows,
                                                      double step, std::size_t& fixed,
                                                      std::vector<std::size_t>& free_idx)
{
    const auto c = normalized_coefficients(f, fixed);
    const int d = f.degree();
    free_idx.clear();
    for (std::size_t k = 0; k < c.size(); ++k)
        if (k != fixed)
            free_idx.push_back(k);
    std::vector<std::complex<double>> J(rows.size() * free_idx.size());
    for (std::size_t col = 0; col < free_idx.size(); ++col) {
        auto cp = c, cm = c;
        cp[free_idx[col]] += step;
        cm[free_idx[col]] -= step;
        RationalMap gp, gm;
        try {
            gp = RationalMap::from_coefficients(cp, d);
            gm = RationalMap::from_coefficients(cm, d);
        } catch (const Error&) {
            fail(ErrorCode::continuation_failed, "finite-difference step leaves the space of degree-d maps");
        }
        for (std::size_t r = 0; r < rows.size(); ++r)
            J[r * free_idx.size() + col] = (phi_value(gp, rows[r]) - phi_value(gm, rows[r])) / (2 * step);
    }
    return J;
}

inline Eigen::MatrixXcd to_eigen(const std::vector<std::complex<double>>& J, std::size_t rows, std::size_t cols)
{
    Eigen::MatrixXcd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = J[r * cols + c];
    return M;
}

} // namespace detail

/// Finite-difference Jacobian of the preperiodicity map Phi over the 2d+1 free
/// (normalized) coefficients, its singular values and numerical rank.
inline TransversalityReport transversality_rank(const RationalMap& f, const PostcriticalData& data, double step,
                                                const TransversalityOptions& opt = {})
{
    require(step > 0 && step < 0.1, "finite-difference step must lie in (0, 0.1)");
    const auto rows = detail::phi_rows(data);
    TransversalityReport rep;
    rep.step_size = step;
    rep.rank_tol = opt.rank_tol;
    rep.jacobian = detail::phi_jacobian(f, rows, step, rep.fixed_coefficient, rep.free_coefficients);
    rep.rows = rows.size();
    rep.cols = rep.free_coefficients.size();
    for (const auto& r : rows)
        rep.critical_points.push_back(r.critical);
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(detail::to_eigen(rep.jacobian, rep.rows, rep.cols));
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        rep.singular_values.push_back(svd.singularValues()(i));
    const double s1 = rep.singular_values.empty() ? 0 : rep.singular_values.front();
    for (double s : rep.singular_values)
        if (s > opt.rank_tol * s1)
            ++rep.rank_estimate;
    return rep;
}

// ---------------------------------------------------------------------------
// preperiodic parameters

struct PreperiodicOptions {
    double radius = -1;               ///< search disk; negative means the family domain radius
    int grid = 7;                     ///< grid x grid starts (clipped to the disk), plus the center
    int max_iterations = 60;
    double residual_tol = 1e-10;
    std::size_t target_index = 0;     ///< which point of the target cycle must be hit
    double continuation_step = 0.05;
    unsigned workers = 1;
};

struct PreperiodicRoot {
    std::complex<double> lambda;
    double residual = 0;          ///< |h(lambda)| in the chart of the target point
    double landing_distance = 0;  ///< chordal d(f^L(c), q) on re-evaluation
    std::complex<double> derivative; ///< h'(lambda)
    bool finite_chart = true;        ///< chart of the target point in which h is measured
    SpherePoint critical;
    SpherePoint target_point;
    std::size_t start_index = 0;
};

struct PreperiodicResult {
    std::vector<PreperiodicRoot> roots;
    std::size_t starts = 0;
    std::size_t failed_starts = 0;
};

namespace detail {

struct PreperiodicState {
    std::complex<double> lambda;
    SpherePoint critical;
    std::vector<SpherePoint> cycle;
};

inline PreperiodicState advance(const FamilySpec& fam, PreperiodicState s, std::complex<double> to, double step)
{
    const auto from = s.lambda;
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(to - from) / step)));
    for (int k = 1; k <= n; ++k) {
        const auto lam = from + (to - from) * (double(k) / n);
        const auto g = fam.unchecked_member(lam);
        s.critical = continue_critical(g, s.critical);
        s.cycle = continue_cycle(g, s.cycle);
        s.lambda = lam;
    }
    return s;
}

inline std::complex<double> h_value(const FamilySpec& fam, const PreperiodicState& s, int steps, std::size_t idx,
                                    bool fin)
{
    const auto g = fam.unchecked_member(s.lambda);
    SpherePoint y = s.critical;
    for (int k = 0; k < steps; ++k)
        y = g(y);
    return y.in_chart(fin) - s.cycle[idx].in_chart(fin);
}

} // namespace detail

/// Parameters where critical point `crit_index` of f_lambda lands after
/// `landing_steps` iterations on the continuation of `target` (a cycle of f_0)
/// along the straight segment from 0 to lambda.
inline PreperiodicResult solve_preperiodic(const FamilySpec& fam, std::size_t crit_index, int landing_steps,
                                           const PeriodicOrbit& target, const PreperiodicOptions& opt = {})
{
    require(landing_steps >= 0, "landing_steps must be >= 0");
    require(opt.target_index < target.points.size(), "target_index out of range");
    const double radius = opt.radius < 0 ? fam.domain_radius : opt.radius;
    require(radius <= fam.domain_radius * (1 + 1e-12), "search radius exceeds the family domain");
    const auto crit = critical_points(fam.base);
    require(crit_index < crit.points.size(), "critical index out of range");
    if (crit.points[crit_index].multiplicity != 1)
        fail(ErrorCode::invalid_argument, "critical point must be simple");
    const detail::PreperiodicState base{0, crit.points[crit_index].point, target.points};
    // one chart for the whole solve, so h stays smooth when the target crosses |z| = 1
    const bool fin = target.points[opt.target_index].in_finite_chart();

    std::vector<std::complex<double>> starts{0};
    for (int i = 0; i < opt.grid; ++i)
        for (int j = 0; j < opt.grid; ++j) {
            const std::complex<double> s(radius * (2.0 * (i + 0.5) / opt.grid - 1),
                                         radius * (2.0 * (j + 0.5) / opt.grid - 1));
            if (std::abs(s) <= radius)
                starts.push_back(s);
        }

    std::vector<std::optional<PreperiodicRoot>> found(starts.size());
    parallel_for(starts.size(), opt.workers, [&](std::size_t si) {
        try {
            auto s = detail::advance(fam, base, starts[si], opt.continuation_step);
            auto h = detail::h_value(fam, s, landing_steps, opt.target_index, fin);
            std::complex<double> dh = 0;
            for (int it = 0; it < opt.max_iterations && std::abs(h) > 1e-15; ++it) {
                const double delta = 1e-7 * std::max(1.0, std::abs(s.lambda));
                const auto sp = detail::advance(fam, s, s.lambda + delta, opt.continuation_step);
                const auto sm = detail::advance(fam, s, s.lambda - delta, opt.continuation_step);
                dh = (detail::h_value(fam, sp, landing_steps, opt.target_index, fin) -
                      detail::h_value(fam, sm, landing_steps, opt.target_index, fin)) /
                     (2 * delta);
                if (dh == 0.0)
                    break;
                const auto full = -h / dh;
                double scale = 1;
                bool improved = false;
                for (int k = 0; k <= 40; ++k, scale *= 0.5) {
                    const auto cand = s.lambda + scale * full;
                    if (std::abs(cand) > radius * (1 + 1e-12))
                        continue;
                    try {
                        auto t = detail::advance(fam, s, cand, opt.continuation_step);
                        const auto ht = detail::h_value(fam, t, landing_steps, opt.target_index, fin);
                        if (std::abs(ht) < std::abs(h)) {
                            s = std::move(t);
                            h = ht;
                            improved = true;
                            break;
                        }
                    } catch (const Error&) {
                    }
                }
                if (!improved || std::abs(scale * full) < 1e-16 * std::max(1.0, std::abs(s.lambda)))
                    break;
            }
            if (!(std::abs(h) < opt.residual_tol))
                return;
            // the Newton path may wind around a branch point and swap cycle points; the root
            // counts only on the branch continued along the straight segment from the base
            s = detail::advance(fam, base, s.lambda, opt.continuation_step);
            h = detail::h_value(fam, s, landing_steps, opt.target_index, fin);
            if (!(std::abs(h) < opt.residual_tol))
                return;
            {
                const double delta = 1e-7 * std::max(1.0, std::abs(s.lambda));
                const auto sp = detail::advance(fam, s, s.lambda + delta, opt.continuation_step);
                const auto sm = detail::advance(fam, s, s.lambda - delta, opt.continuation_step);
                dh = (detail::h_value(fam, sp, landing_steps, opt.target_index, fin) -
                      detail::h_value(fam, sm, landing_steps, opt.target_index, fin)) /
                     (2 * delta);
            }
            const auto g = fam.unchecked_member(s.lambda);
            SpherePoint y = s.critical;
            for (int k = 0; k < landing_steps; ++k)
                y = g(y);
            PreperiodicRoot r;
            r.lambda = s.lambda;
            r.residual = std::abs(h);
            r.landing_distance = chordal_distance(y, s.cycle[opt.target_index]);
            r.derivative = dh;
            r.finite_chart = fin;
            r.critical = s.critical;
            r.target_point = s.cycle[opt.target_index];
            r.start_index = si;
            found[si] = r;
        } catch (const Error&) {
        }
    });
    PreperiodicResult res;
    res.starts = starts.size();
    for (auto& r : found) {
        if (!r) {
            ++res.failed_starts;
            continue;
        }
        bool dup = false;
        for (const auto& q : res.roots)
            if (std::abs(q.lambda - r->lambda) < 1e-8)
                dup = true;
        if (!dup)
            res.roots.push_back(*r);
    }
    if (res.roots.empty())
        fail(ErrorCode::no_roots, "no preperiodic parameter found in the search disk");
    std::sort(res.roots.begin(), res.roots.end(), [](const PreperiodicRoot& a, const PreperiodicRoot& b) {
        if (std::abs(a.lambda) != std::abs(b.lambda))
            return std::abs(a.lambda) < std::abs(b.lambda);
        return std::arg(a.lambda) < std::arg(b.lambda);
    });
    return res;
}

// ---------------------------------------------------------------------------
// parabolic cycles

struct ParabolicNewtonOptions {
    int max_iterations = 80;
    int max_halvings = 40;
};

template <class Real>
struct ParabolicState {
    std::complex<Real> lambda;
    std::vector<basic_sphere_point<Real>> x;
};

template <class Real>
struct ParabolicNewtonOutcome {
    ParabolicState<Real> state;
    Real merit{};
    Real condition{};
    int iterations = 0;
    bool converged = false;
    bool singular = false;
};

namespace detail {

template <class Real>
struct ParabolicSystem {
    std::vector<std::complex<Real>> F; // P shooting rows + multiplier row
    std::vector<std::complex<Real>> a, second;
    Real merit{};
};

template <class Real>
ParabolicSystem<Real> parabolic_system(const basic_rational_map<Real>& g, const ParabolicState<Real>& s,
                                       const std::complex<Real>& mu)
{
    using C = std::complex<Real>;
    using std::abs;
    const std::size_t P = s.x.size();
    ParabolicSystem<Real> sys;
    sys.F.resize(P + 1);
    sys.a.resize(P);
    sys.second.resize(P);
    C m(1);
    Real defect(0);
    for (std::size_t i = 0; i < P; ++i) {
        const auto& nxt = s.x[(i + 1) % P];
        const auto node = shooting_node(g, s.x[i], nxt, 2);
        sys.F[i] = node.image - nxt.chart_value();
        sys.a[i] = node.first;
        sys.second[i] = node.second;
        m *= node.first;
        const Real d = chordal_distance(g(s.x[i]), nxt);
        if (!(d <= defect))
            defect = d;
    }
    sys.F[P] = m - mu;
    const Real mres = abs(sys.F[P]) / std::max(Real(1), Real(abs(mu)));
    sys.merit = std::max(defect, mres);
    using std::isfinite;
    if (!isfinite(static_cast<double>(sys.merit)))
        sys.merit = std::numeric_limits<Real>::infinity();
    return sys;
}

} // namespace detail

/// Bordered Newton for (lambda, x_0..x_{P-1}) on
///   chart(f_lambda(x_i)) = chart(x_{i+1}),  prod_i (f_lambda)'(x_i) = mu,
/// lambda-derivatives by central differences, x-derivatives analytic.
template <class Real>
ParabolicNewtonOutcome<Real> parabolic_newton(const FamilySpec& fam, ParabolicState<Real> s,
                                              const std::complex<Real>& mu, const ParabolicNewtonOptions& opt = {})
{
    using C = std::complex<Real>;
    using Point = basic_sphere_point<Real>;
    using std::abs;
    using std::cbrt;
    const std::size_t P = s.x.size();
    const Real tol = Real(256) * detail::eps_of<Real>();
    ParabolicNewtonOutcome<Real> out;
    auto g = family_member_as<Real>(fam, s.lambda);
    auto sys = detail::parabolic_system(g, s, mu);
    for (int it = 0; it < opt.max_iterations; ++it) {
        out.iterations = it;
        if (sys.merit <= tol)
            break;
        const Real h = cbrt(detail::eps_of<Real>()) * std::max(Real(1), Real(abs(s.lambda)));
        const auto gp = family_member_as<Real>(fam, s.lambda + C(h));
        const auto gm = family_member_as<Real>(fam, s.lambda - C(h));
        const std::size_t n = P + 1;
        std::vector<C> J(n * n, C(0)), rhs(n);
        C mp(1), mm(1);
        for (std::size_t i = 0; i < P; ++i) {
            const auto& nxt = s.x[(i + 1) % P];
            const auto np = shooting_node(gp, s.x[i], nxt, 1);
            const auto nm = shooting_node(gm, s.x[i], nxt, 1);
            mp *= np.first;
            mm *= nm.first;
            J[i * n + i] += sys.a[i];
            J[i * n + (i + 1) % P] -= C(1);
            J[i * n + P] = (np.image - nm.image) / (Real(2) * h);
            C partial(1);
            for (std::size_t k = 0; k < P; ++k)
                if (k != i)
                    partial *= sys.a[k];
            J[P * n + i] = sys.second[i] * partial;
            rhs[i] = -sys.F[i];
        }
        J[P * n + P] = (mp - mm) / (Real(2) * h);
        rhs[P] = -sys.F[P];
        std::vector<C> delta;
        try {
            delta = solve_dense(J, rhs, &out.condition);
        } catch (const Error&) {
            out.singular = true;
            break;
        }
        Real scale(1);
        bool improved = false;
        for (int k = 0; k <= opt.max_halvings; ++k, scale /= Real(2)) {
            ParabolicState<Real> t;
            t.lambda = s.lambda + scale * delta[P];
            t.x.resize(P);
            for (std::size_t i = 0; i < P; ++i)
                t.x[i] = Point::from_chart(s.x[i].chart_value() + scale * delta[i], s.x[i].in_finite_chart());
            try {
                auto gt = family_member_as<Real>(fam, t.lambda);
                auto st = detail::parabolic_system(gt, t, mu);
                if (st.merit < sys.merit) {
                    s = std::move(t);
                    g = std::move(gt);
                    sys = std::move(st);
                    improved = true;
                    break;
                }
            } catch (const Error&) {
            }
        }
        if (!improved)
            break;
        out.iterations = it + 1;
    }
    out.merit = sys.merit;
    out.converged = sys.merit <= Real(1e6) * tol;
    out.state = std::move(s);
    return out;
}

/// Fresh-composition residuals of a cycle: |f^P(z) - z| and |(f^P)'(z) - 1| at the
/// cycle point whose forward partial derivative products stay smallest.
template <class Real>
void parabolic_residuals(const basic_rational_map<Real>& g, const std::vector<basic_sphere_point<Real>>& x,
                         std::size_t& start, Real& r_fixed, Real& r_mult)
{
    using std::abs;
    using std::log;
    const std::size_t P = x.size();
    std::vector<Real> la(P);
    for (std::size_t i = 0; i < P; ++i)
        la[i] = log(std::max(Real(abs(shooting_node(g, x[i], x[(i + 1) % P]).first)),
                             std::numeric_limits<Real>::min()));
    start = 0;
    Real best = std::numeric_limits<Real>::infinity();
    for (std::size_t s = 0; s < P; ++s) {
        // largest log-gain from any intermediate step to the end of the loop
        Real suffix(0), worst(0);
        for (std::size_t k = P; k-- > 0;) {
            suffix += la[(s + k) % P];
            if (suffix > worst)
                worst = suffix;
        }
        if (worst < best) {
            best = worst;
            start = s;
        }
    }
    const auto& z = x[start];
    const auto cj = chart_jet(g, z, P, z.in_finite_chart() ? 1 : 0);
    r_fixed = abs(cj.value - z.chart_value());
    r_mult = abs(cj.first - std::complex<Real>(1));
}

struct ParabolicOptions {
    ParabolicNewtonOptions newton{};
    unsigned workers = 1;
    std::optional<PeriodicOrbit> companion; ///< repelling cycle q(f) whose dwell is measured
    double dwell_radius = 0;                ///< 0: linearization radius of the companion
    double residual_tol = 1e-9;
};

struct ParabolicSolveResult {
    std::complex<double> lambda_star;
    std::string lambda_text_re, lambda_text_im; ///< full-precision decimal of the solver's lambda
    SpherePoint z_star;
    int period = 0;
    double residual_fixed = 0;      ///< |f^P(z) - z| in the chart of z
    double residual_multiplier = 0; ///< |(f^P)'(z) - 1|
    std::complex<double> multiplier;
    std::vector<SpherePoint> cycle;
    int dwell_near_q = -1;          ///< -1 when no companion was supplied
    double dwell_fraction = 0;
    std::size_t seed_index = 0;
    std::string precision = "double";
};

struct ParabolicFailure {
    std::size_t seed_index = 0;
    ErrorCode code = ErrorCode::no_convergence;
    std::string message;
    std::complex<double> lambda;
    SpherePoint z;
    int minimal_period = 0;
    double condition = 0;
};

struct ParabolicReport {
    std::vector<ParabolicSolveResult> solutions;
    std::vector<ParabolicFailure> failures;
};

namespace detail {

/// Count of cycle points within `radius` of any point of the companion cycle.
inline int dwell_count(const std::vector<SpherePoint>& x, const PeriodicOrbit& q, double radius)
{
    int n = 0;
    for (const auto& p : x)
        for (const auto& c : q.points)
            if (chordal_distance(p, c) < radius) {
                ++n;
                break;
            }
    return n;
}

template <class Real>
std::vector<SpherePoint> to_double(const std::vector<basic_sphere_point<Real>>& x)
{
    std::vector<SpherePoint> out;
    out.reserve(x.size());
    for (const auto& p : x)
        out.push_back(p.template cast<double>());
    return out;
}

/// Turns a converged Newton state into a certified result, or describes why it is not one.
template <class Real>
std::optional<ParabolicSolveResult> certify_parabolic(const FamilySpec& fam, const ParabolicNewtonOutcome<Real>& o,
                                                      std::size_t seed, const ParabolicOptions& opt,
                                                      ParabolicFailure& why)
{
    const auto& s = o.state;
    const std::size_t P = s.x.size();
    const auto xd = to_double(s.x);
    why.seed_index = seed;
    why.lambda = {static_cast<double>(s.lambda.real()), static_cast<double>(s.lambda.imag())};
    why.z = xd.front();
    why.condition = static_cast<double>(o.condition);
    // collapse onto a lower period is checked first: it is what a singular Newton run converges to
    // an unresolved double root (P-cycle merging into a q-cycle) leaves the points
    // separated by about sqrt(condition * eps), far above the plain exact-period tolerance
    const double unresolved =
        4 * std::sqrt(static_cast<double>(o.condition) * static_cast<double>(detail::eps_of<Real>()));
    const double ptol = o.converged ? std::max(exact_period_tol, unresolved) : std::max(1e-5, unresolved);
    const std::size_t q = minimal_period(xd, ptol);
    why.minimal_period = static_cast<int>(q);
    if (q < P) {
        why.code = ErrorCode::exact_period_failure;
        why.message = "period-" + std::to_string(P) + " solve converged to a point of exact period " +
                      std::to_string(q);
        return std::nullopt;
    }
    if (o.singular && !o.converged) {
        why.code = ErrorCode::jacobian_singular;
        why.message = "Jacobian singular (condition estimate " + std::to_string(why.condition) + ")";
        return std::nullopt;
    }
    if (!o.converged) {
        why.code = ErrorCode::no_convergence;
        why.message = "Newton stalled at merit " + decimal(static_cast<double>(o.merit));
        return std::nullopt;
    }
    const auto g = family_member_as<Real>(fam, s.lambda);
    std::size_t start = 0;
    Real rf, rm;
    parabolic_residuals(g, s.x, start, rf, rm);
    if (!(rf < Real(opt.residual_tol) && rm < Real(opt.residual_tol))) {
        why.code = ErrorCode::residual_too_large;
        why.message = "fresh-composition residuals " + decimal(static_cast<double>(rf)) + ", " +
                      decimal(static_cast<double>(rm));
        return std::nullopt;
    }
    ParabolicSolveResult r;
    r.lambda_star = why.lambda;
    r.lambda_text_re = decimal(s.lambda.real());
    r.lambda_text_im = decimal(s.lambda.imag());
    r.period = static_cast<int>(P);
    r.residual_fixed = static_cast<double>(rf);
    r.residual_multiplier = static_cast<double>(rm);
    r.cycle.resize(P);
    for (std::size_t i = 0; i < P; ++i)
        r.cycle[i] = xd[(start + i) % P];
    r.z_star = r.cycle.front();
    std::complex<Real> m;
    Real la;
    cycle_multiplier(g, s.x, m, la);
    r.multiplier = {static_cast<double>(m.real()), static_cast<double>(m.imag())};
    r.seed_index = seed;
    r.precision = std::numeric_limits<Real>::digits > 53 ? "float128" : "double";
    if (opt.companion) {
        const double rad = opt.dwell_radius > 0 ? opt.dwell_radius : linearization_radius(fam.base, *opt.companion);
        r.dwell_near_q = dwell_count(r.cycle, *opt.companion, rad);
        r.dwell_fraction = double(r.dwell_near_q) / double(P);
    }
    return r;
}

} // namespace detail

/// Parabolic cycles of period P: f_lambda^P(z) = z with multiplier 1, one coupled
/// Newton solve per (lambda, z) seed. Seeds that fail are reported, not thrown.
inline ParabolicReport solve_parabolic(const FamilySpec& fam, int period,
                                       const std::vector<std::pair<std::complex<double>, SpherePoint>>& seeds,
                                       const ParabolicOptions& opt = {})
{
    require(period >= 1, "period must be >= 1");
    const std::size_t P = static_cast<std::size_t>(period);
    std::vector<std::optional<ParabolicSolveResult>> ok(seeds.size());
    std::vector<std::optional<ParabolicFailure>> bad(seeds.size());
    parallel_for(seeds.size(), opt.workers, [&](std::size_t si) {
        ParabolicFailure why;
        why.seed_index = si;
        why.lambda = seeds[si].first;
        why.z = seeds[si].second;
        try {
            ParabolicState<double> s;
            s.lambda = seeds[si].first;
            const auto g = fam.unchecked_member(s.lambda);
            s.x.push_back(seeds[si].second);
            for (std::size_t k = 1; k < P; ++k)
                s.x.push_back(g(s.x.back()));
            const auto o = parabolic_newton<double>(fam, s, 1.0, opt.newton);
            if (std::abs(o.state.lambda) > fam.domain_radius * (1 + 1e-12)) {
                why.code = ErrorCode::newton_escaped;
                why.message = "parameter left the family domain";
                bad[si] = why;
                return;
            }
            auto r = detail::certify_parabolic<double>(fam, o, si, opt, why);
            if (r)
                ok[si] = std::move(*r);
            else
                bad[si] = why;
        } catch (const Error& e) {
            why.code = e.code();
            why.message = e.what();
            bad[si] = why;
        }
    });
    ParabolicReport rep;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
        if (bad[si])
            rep.failures.push_back(*bad[si]);
        if (!ok[si])
            continue;
        bool dup = false;
        for (const auto& r : rep.solutions) {
            if (std::abs(r.lambda_star - ok[si]->lambda_star) > 1e-9 * std::max(1.0, std::abs(r.lambda_star)))
                continue;
            for (const auto& p : r.cycle)
                if (chordal_distance(p, ok[si]->z_star) < 1e-7)
                    dup = true;
        }
        if (!dup)
            rep.solutions.push_back(*ok[si]);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// scenario

struct ScenarioBudgets {
    int levels = 4;            ///< number of dwell lengths tried in stage (c); 0 gives an empty report
    int first_dwell = 16;
    int dwell_increment = 4;
    double family_radius = 0.5;
    int preperiodic_grid = 5;
    double fd_step = 1e-5;
    int pcf_steps = 64;
    std::size_t stat_starts = 50;
    std::size_t stat_horizon = 1 << 15;
    std::size_t stat_first_checkpoint = 1 << 10;
    std::size_t stat_coarsen_to = 64;
    double cluster_radius = 0.05;
    double near_threshold = 0.2;
    unsigned workers = 1;
    std::uint64_t seed = 0;
};

struct ScenarioLevel {
    int dwell = 0;                    ///< n
    int period = 0;                   ///< N + n
    bool solved = false;
    std::string error;
    ParabolicSolveResult solution;
    double measure_to_target = 0;     ///< d_w(cycle measure, e_inf(target cycle))
    std::vector<double> constraint_residuals; ///< |Phi_j(f_lambda)| for the other critical points
    double center_lambda_abs = 0;     ///< |lambda| of the superattracting center the continuation started from
};

struct ScenarioDiagnostics {
    bool run = false;
    std::size_t level = 0;            ///< index into levels of the parabolic map used
    std::size_t starts = 0;
    std::vector<double> nearest_center_distance; ///< per start: min over accumulation centers of d_w to the cycle measure
    std::vector<double> oscillation_diameter;
    double fraction_near = 0;         ///< share of starts with distance <= near_threshold
    double near_threshold = 0;
    std::vector<std::size_t> checkpoints;
};

struct ScenarioReport {
    bool empty = true;
    std::string failed_stage;         ///< empty when every stage completed
    std::string error;
    // (a)
    std::size_t critical_index = 0;   ///< c_1, the critical point sent onto the target
    int landing_steps = 0;
    std::vector<std::complex<double>> direction;
    std::complex<double> target_row_value;          ///< DPhi_1 . v
    std::vector<std::complex<double>> constraint_row_values; ///< DPhi_j . v, j != 1
    std::vector<double> jacobian_singular_values;
    double family_radius = 0;
    // (b)
    std::complex<double> lambda_star;
    double lambda_star_residual = 0;
    std::complex<double> lambda_star_derivative;
    std::size_t preperiodic_roots = 0;
    // (c)
    SpherePoint c_tilde;
    int c_tilde_depth = 0;            ///< steps from c_tilde to c_1
    int transit_steps = 0;            ///< N = depth + landing steps
    double linearization_radius = 0;
    std::vector<ScenarioLevel> levels;
    // (d)
    ScenarioDiagnostics diagnostics;
};

namespace detail {

/// Preimage of y under g nearest to `guess`, by Newton on g(z) = y in the chart of `guess`.
template <class Real>
basic_sphere_point<Real> local_preimage(const basic_rational_map<Real>& g, const basic_sphere_point<Real>& y,
                                        basic_sphere_point<Real> guess)
{
    using std::abs;
    const bool yfin = y.in_finite_chart();
    for (int it = 0; it < 200; ++it) {
        const auto cj = chart_jet(g, guess, 1, yfin ? 1 : 0);
        const auto step = (cj.value - y.chart_value()) / cj.first;
        const auto u = guess.chart_value() - step;
        guess = basic_sphere_point<Real>::from_chart(u, guess.in_finite_chart());
        if (abs(step) <= Real(16) * eps_of<Real>() * std::max(Real(1), Real(abs(u))))
            break;
    }
    return guess;
}

inline std::vector<std::complex<double>> phi_at(const RationalMap& g, const std::vector<PhiRow>& rows,
                                                std::size_t skip)
{
    std::vector<std::complex<double>> out;
    for (std::size_t r = 0; r < rows.size(); ++r)
        if (r != skip)
            out.push_back(phi_value(g, rows[r]));
    return out;
}

} // namespace detail

/// Parameter-perturbation chain around a strictly pcf map: family direction (a),
/// preperiodic parameter (b), parabolic returns with growing dwell (c) and
/// empirical-measure diagnostics at the parabolic parameter (d). Failures stop
/// the pipeline and are recorded in the report.
inline ScenarioReport scenario_driver(const RationalMap& f, const PeriodicOrbit& target, const ScenarioBudgets& b)
{
    ScenarioReport rep;
    if (b.levels <= 0)
        return rep;
    rep.empty = false;

    // preconditions
    const auto data = postcritical_scan(f, b.pcf_steps);
    const auto cert = is_strictly_pcf(data);
    if (!cert.strictly_pcf)
        fail(ErrorCode::invalid_argument, "scenario needs a strictly pcf map");
    const auto target_cycle = make_periodic_orbit(f, target.points);
    if (target_cycle.classification != CycleClass::repelling)
        fail(ErrorCode::invalid_argument, "target cycle must be repelling");
    if (target_cycle.period != 1)
        fail(ErrorCode::invalid_argument, "scenario dwell seeding supports repelling fixed points only");
    const auto crit = critical_points(f);
    for (const auto& c : crit.points) {
        if (target_cycle.contains(f(c.point)))
            fail(ErrorCode::invalid_argument, "target cycle contains a critical value; the return construction "
                                              "needs the critical orbit to reach the cycle from outside");
        if (target_cycle.contains(c.point))
            fail(ErrorCode::invalid_argument, "target cycle contains a critical point");
    }

    std::vector<detail::PhiRow> rows;
    auto stage = std::string("a");
    try {
        rows = detail::phi_rows(data);
        // c_1: first critical point whose orbit lands on the target cycle
        bool found = false;
        for (std::size_t r = 0; r < rows.size() && !found; ++r)
            for (const auto& p : rows[r].cycle)
                if (target_cycle.contains(p)) {
                    rep.critical_index = r;
                    found = true;
                    break;
                }
        if (!found)
            fail(ErrorCode::invalid_argument, "no critical orbit lands on the target cycle");
        rep.landing_steps = rows[rep.critical_index].landing_step;

        // (a) least-squares direction: DPhi_1 v = 1, DPhi_j v = 0
        std::size_t fixed;
        std::vector<std::size_t> free_idx;
        const auto J = detail::phi_jacobian(f, rows, b.fd_step, fixed, free_idx);
        const auto M = detail::to_eigen(J, rows.size(), free_idx.size());
        Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(rows.size()));
        rhs(static_cast<Eigen::Index>(rep.critical_index)) = 1.0;
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-8);
        const Eigen::VectorXcd v = svd.solve(rhs);
        for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
            rep.jacobian_singular_values.push_back(svd.singularValues()(i));
        const Eigen::VectorXcd Mv = M * v;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (r == rep.critical_index)
                rep.target_row_value = Mv(static_cast<Eigen::Index>(r));
            else
                rep.constraint_row_values.push_back(Mv(static_cast<Eigen::Index>(r)));
        }
        const auto c = normalized_coefficients(f, fixed);
        rep.direction.assign(c.size(), 0.0);
        for (std::size_t k = 0; k < free_idx.size(); ++k)
            rep.direction[free_idx[k]] = v(static_cast<Eigen::Index>(k));
        const auto base = RationalMap::from_coefficients(c, f.degree());
        double radius = b.family_radius;
        std::optional<FamilySpec> fam;
        for (int k = 0; k < 20 && !fam; ++k, radius *= 0.5) {
            try {
                fam = FamilySpec::coefficient_line(base, rep.direction, radius);
            } catch (const Error&) {
            }
        }
        if (!fam)
            fail(ErrorCode::degenerate_member, "no valid family disk along the direction");
        rep.family_radius = fam->domain_radius;

        // (b)
        stage = "b";
        PreperiodicOptions popt;
        popt.grid = b.preperiodic_grid;
        popt.workers = b.workers;
        // the landing point in the scan's cycle order is what the relation targets
        const std::size_t tindex = rows[rep.critical_index].landing_index;
        popt.target_index = tindex;
        PeriodicOrbit landing_cycle = target_cycle;
        landing_cycle.points = rows[rep.critical_index].cycle;
        const auto base_crit = critical_points(base);
        std::size_t base_index = 0;
        for (std::size_t i = 0; i < base_crit.points.size(); ++i)
            if (chordal_distance(base_crit.points[i].point, rows[rep.critical_index].critical) <
                chordal_distance(base_crit.points[base_index].point, rows[rep.critical_index].critical))
                base_index = i;
        const auto pre = solve_preperiodic(*fam, base_index, rep.landing_steps, landing_cycle, popt);
        rep.preperiodic_roots = pre.roots.size();
        const auto& root = pre.roots.front();
        rep.lambda_star = root.lambda;
        rep.lambda_star_residual = root.residual;
        rep.lambda_star_derivative = root.derivative;
        if (!(root.residual < 1e-10))
            fail(ErrorCode::residual_too_large, "preperiodic residual above 1e-10");

        // (c)
        stage = "c";
        const auto gstar = fam->unchecked_member(root.lambda);
        const auto q_point = root.target_point;
        PeriodicOrbit qcycle = make_periodic_orbit(gstar, detail::continue_cycle(gstar, landing_cycle.points));
        rep.linearization_radius = linearization_radius(gstar, qcycle);
        // c_tilde: shallowest preimage of c_1 inside the linearization domain of q
        const double r_lin = rep.linearization_radius;
        std::vector<SpherePoint> level{root.critical};
        std::vector<std::vector<std::size_t>> parent;
        std::optional<std::pair<int, SpherePoint>> ct;
        for (int depth = 1; depth <= 16 && !ct; ++depth) {
            std::vector<SpherePoint> next;
            for (const auto& y : level)
                for (const auto& z : detail::preimages(gstar, y))
                    next.push_back(z);
            if (next.size() > (1u << 16))
                next.resize(1u << 16);
            double best = r_lin;
            for (const auto& z : next) {
                const double dq = chordal_distance(z, q_point);
                if (dq < best && dq > 0) {
                    best = dq;
                    ct = std::make_pair(depth, z);
                }
            }
            level = std::move(next);
        }
        if (!ct)
            fail(ErrorCode::transition_not_found, "no preimage of the critical point in the linearization domain");
        rep.c_tilde_depth = ct->first;
        rep.c_tilde = ct->second;
        rep.transit_steps = rep.c_tilde_depth + rep.landing_steps;
        const int N = rep.transit_steps;

        using CQ = std::complex<quad>;
        auto to_q = [](std::complex<double> z) { return CQ(quad(z.real()), quad(z.imag())); };
        const CQ lam_star = to_q(root.lambda);
        const auto gq = family_member_as<quad>(*fam, lam_star);
        const auto qq = q_point.cast<quad>();
        // refine c_tilde in quad: pull the critical point back along the recorded chain
        std::vector<basic_sphere_point<quad>> path(static_cast<std::size_t>(N));
        {
            auto cq = detail::continue_critical(gq, root.critical.cast<quad>());
            // backward chain c_1 <- ... <- c_tilde, using double points as guesses
            std::vector<SpherePoint> chain{ct->second};
            for (int k = 1; k < rep.c_tilde_depth; ++k)
                chain.push_back(gstar(chain.back()));
            auto y = cq;
            std::vector<basic_sphere_point<quad>> back(static_cast<std::size_t>(rep.c_tilde_depth));
            for (int k = rep.c_tilde_depth - 1; k >= 0; --k) {
                y = detail::local_preimage(gq, y, chain[static_cast<std::size_t>(k)].cast<quad>());
                back[static_cast<std::size_t>(k)] = y;
            }
            for (int k = 0; k < rep.c_tilde_depth; ++k)
                path[static_cast<std::size_t>(k)] = back[static_cast<std::size_t>(k)];
            auto w = cq;
            for (int k = rep.c_tilde_depth; k < N; ++k) {
                path[static_cast<std::size_t>(k)] = w;
                w = gq(w);
            }
        }
        const auto qcyc_q = detail::continue_cycle(gq, std::vector<basic_sphere_point<quad>>{qq});
        const auto q_exact = qcyc_q.front();
        const bool qfin = root.finite_chart;
        const CQ dh = to_q(root.derivative);
        const CQ q_chart = q_exact.in_chart(qfin);
        const CQ q_slope = chart_jet(gq, q_exact, 1, q_exact.in_finite_chart() ? 1 : 0).first;

        ParabolicOptions popts;
        popts.companion = qcycle;
        popts.dwell_radius = r_lin;
        popts.residual_tol = 1e-8;
        for (int L = 0; L < b.levels; ++L) {
            ScenarioLevel lv;
            lv.dwell = b.first_dwell + L * b.dwell_increment;
            lv.period = N + lv.dwell;
            try {
                // dwell guesses: local inverse branch of q applied to c_tilde
                std::vector<basic_sphere_point<quad>> dwell(static_cast<std::size_t>(lv.dwell));
                auto y = path.front();
                for (int k = lv.dwell - 1; k >= 0; --k) {
                    const auto guess = basic_sphere_point<quad>::from_chart(
                        q_chart + (y.in_chart(qfin) - q_chart) / q_slope, qfin);
                    y = detail::local_preimage(gq, y, guess);
                    dwell[static_cast<std::size_t>(k)] = y;
                }
                ParabolicState<quad> s;
                s.x = path;
                s.x.insert(s.x.end(), dwell.begin(), dwell.end());
                // landing offset must equal the first dwell point
                s.lambda = lam_star + (dwell.front().in_chart(qfin) - q_chart) / dh;
                // The guess passes through c_1, where the multiplier vanishes (to higher order when
                // c_1 maps onto another critical point) and the multiplier row carries no
                // information. Shift c_1 off itself until the guessed multiplier is small but nonzero.
                const std::size_t kc = static_cast<std::size_t>(rep.c_tilde_depth);
                const auto c1 = s.x[kc];
                const auto g0 = family_member_as<quad>(*fam, s.lambda);
                CQ mu0(0);
                quad shift(1e-2);
                for (int k = 0; k < 200; ++k, shift /= quad(2)) {
                    s.x[kc] = basic_sphere_point<quad>::from_chart(c1.chart_value() + CQ(shift),
                                                                   c1.in_finite_chart());
                    for (std::size_t i = kc + 1; i < static_cast<std::size_t>(N); ++i)
                        s.x[i] = g0(s.x[i - 1]);
                    mu0 = detail::parabolic_system(g0, s, CQ(0)).F.back();
                    if (abs(mu0) <= quad(1e-6))
                        break;
                }
                if (!(abs(mu0) > quad(0)))
                    fail(ErrorCode::continuation_failed, "could not seed a nonzero multiplier");
                auto o = parabolic_newton<quad>(*fam, s, mu0, {});
                if (!o.converged)
                    fail(ErrorCode::no_convergence, "near-center solve did not converge");
                lv.center_lambda_abs = static_cast<double>(abs(o.state.lambda - lam_star));
                // multiplier continuation mu0^(1-t), t: 0 -> 1
                const CQ logmu0 = log(mu0);
                const double span = static_cast<double>(abs(logmu0));
                double t = 0, dt = std::min(1.0, std::log(std::sqrt(10.0)) / std::max(span, 1e-300));
                while (t < 1) {
                    const double next = std::min(1.0, t + dt);
                    const CQ mu = next >= 1 ? CQ(1) : exp(quad(1 - next) * logmu0);
                    auto trial = parabolic_newton<quad>(*fam, o.state, mu, {});
                    if (!trial.converged) {
                        dt /= 2;
                        if (dt < 1e-6)
                            fail(ErrorCode::continuation_failed,
                                 "multiplier continuation stalled at t = " + std::to_string(t));
                        continue;
                    }
                    o = std::move(trial);
                    t = next;
                }
                ParabolicFailure why;
                auto r = detail::certify_parabolic<quad>(*fam, o, static_cast<std::size_t>(L), popts, why);
                if (!r)
                    fail(why.code, why.message);
                lv.solution = *r;
                lv.solved = true;
                lv.measure_to_target = wasserstein(DiscreteMeasure::uniform(r->cycle),
                                                   periodic_measure(qcycle).measure);
                lv.constraint_residuals.clear();
                const auto gl = fam->unchecked_member(r->lambda_star);
                for (const auto& v : detail::phi_at(gl, rows, rep.critical_index))
                    lv.constraint_residuals.push_back(std::abs(v));
            } catch (const Error& e) {
                lv.error = e.what();
            }
            rep.levels.push_back(std::move(lv));
        }

        // (d)
        stage = "d";
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < rep.levels.size(); ++i)
            if (rep.levels[i].solved &&
                (!best || rep.levels[i].measure_to_target < rep.levels[*best].measure_to_target))
                best = i;
        if (best && b.stat_starts > 0) {
            auto& dg = rep.diagnostics;
            dg.run = true;
            dg.level = *best;
            dg.starts = b.stat_starts;
            dg.near_threshold = b.near_threshold;
            const auto& sol = rep.levels[*best].solution;
            const auto cycle_measure = DiscreteMeasure::uniform(sol.cycle);
            const CQ lam(quad(sol.lambda_text_re), quad(sol.lambda_text_im));
            const auto gp = family_member_as<quad>(*fam, lam);
            dg.checkpoints = geometric_checkpoints(b.stat_first_checkpoint, b.stat_horizon);
            const auto starts =
                sample_reference({SamplerKind::spherical_area_uniform, b.seed, {}}, b.stat_starts);
            dg.nearest_center_distance.assign(b.stat_starts, 0);
            dg.oscillation_diameter.assign(b.stat_starts, 0);
            parallel_for(b.stat_starts, b.workers, [&](std::size_t i) {
                EmpiricalSequence seq;
                seq.start = starts[i];
                seq.checkpoints = dg.checkpoints;
                std::vector<SpherePoint> orbit;
                orbit.reserve(dg.checkpoints.back());
                auto x = starts[i].cast<quad>();
                std::size_t next = 0;
                while (next < dg.checkpoints.size()) {
                    orbit.push_back(x.cast<double>());
                    if (orbit.size() == dg.checkpoints[next]) {
                        auto cr = coarsen(DiscreteMeasure::uniform(orbit), b.stat_coarsen_to);
                        seq.measures.push_back(cr.measure);
                        seq.coarsen_bounds.push_back(cr.transport_bound);
                        seq.coarsen_radii.push_back(cr.radius);
                        ++next;
                    }
                    x = gp(x);
                }
                const double tail = std::min(1.0, 3.0 / double(dg.checkpoints.size()) + 1e-9);
                const auto acc = accumulation_report(seq, std::max(0.5, tail), b.cluster_radius,
                                                     {b.stat_coarsen_to, 1, 0});
                double bestd = std::numeric_limits<double>::infinity();
                for (const auto& c : acc.cluster_centers)
                    bestd = std::min(bestd, wasserstein(c, cycle_measure));
                dg.nearest_center_distance[i] = bestd;
                dg.oscillation_diameter[i] = acc.oscillation_diameter;
            });
            std::size_t near = 0;
            for (double d : dg.nearest_center_distance)
                if (d <= b.near_threshold)
                    ++near;
            dg.fraction_near = double(near) / double(b.stat_starts);
        }
        stage.clear();
    } catch (const Error& e) {
        rep.failed_stage = stage;
        rep.error = e.what();
    }
    return rep;
}

} // namespace nsdyn

#endif
