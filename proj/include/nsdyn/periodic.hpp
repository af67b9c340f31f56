#ifndef NSDYN_PERIODIC_HPP
#define NSDYN_PERIODIC_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cycle_newton.hpp"
#include "error.hpp"
#include "measures.hpp"
#include "parallel.hpp"
#include "polynomial.hpp"
#include "ratmap.hpp"
#include "sphere.hpp"

namespace nsdyn {

enum class CycleClass { repelling, attracting, parabolic_candidate, indifferent };

inline std::string to_string(CycleClass c)
{
    switch (c) {
    case CycleClass::repelling: return "repelling";
    case CycleClass::attracting: return "attracting";
    case CycleClass::parabolic_candidate: return "parabolic_candidate";
    case CycleClass::indifferent: return "indifferent";
    }
    return "unknown";
}

inline constexpr double cycle_step_tol = 1e-10;
inline constexpr double exact_period_tol = 1e-8;

/// Classification of a multiplier given log|m| (robust when |m| overflows).
inline CycleClass classify_multiplier(std::complex<double> m, double log_abs)
{
    if (log_abs > std::log1p(1e-8))
        return CycleClass::repelling;
    if (log_abs < std::log1p(-1e-8))
        return CycleClass::attracting;
    for (int q = 1; q <= 64; ++q)
        for (int p = 0; p < q; ++p) {
            if (std::gcd(p, q) != 1)
                continue;
            if (std::abs(m - std::polar(1.0, 2 * std::numbers::pi * p / q)) < 1e-6)
                return CycleClass::parabolic_candidate;
        }
    return CycleClass::indifferent;
}

struct PeriodicOrbit {
    std::vector<SpherePoint> points;
    int period = 0;
    std::complex<double> multiplier;
    double log_abs_multiplier = 0;
    CycleClass classification = CycleClass::indifferent;
    double defect = 0; ///< max_i d(f(x_i), x_{i+1})

    bool contains(const SpherePoint& x, double tol = exact_period_tol) const
    {
        for (const auto& p : points)
            if (chordal_distance(p, x) < tol)
                return true;
        return false;
    }
};

/// Smallest q dividing P with d(x_{k+q}, x_k) < tol for every k.
inline std::size_t minimal_period(const std::vector<SpherePoint>& x, double tol = exact_period_tol)
{
    const std::size_t P = x.size();
    for (std::size_t q = 1; q < P; ++q) {
        if (P % q != 0)
            continue;
        bool repeats = true;
        for (std::size_t k = 0; k + q < P && repeats; ++k)
            repeats = chordal_distance(x[k + q], x[k]) < tol;
        if (repeats)
            return q;
    }
    return P;
}

/// Builds a verified PeriodicOrbit from cycle points x_0..x_{P-1}; reduces to the
/// exact period and optionally rotates to a canonical starting point.
inline PeriodicOrbit make_periodic_orbit(const RationalMap& f, std::vector<SpherePoint> x, bool canonical = true)
{
    require(!x.empty(), "empty cycle");
    const double defect = cycle_defect(f, x);
    if (!(defect < cycle_step_tol))
        fail(ErrorCode::residual_too_large, "cycle consistency defect " + std::to_string(defect));
    const std::size_t q = minimal_period(x);
    x.resize(q);
    if (canonical) {
        const auto it = std::min_element(x.begin(), x.end(), detail::sphere_less);
        std::rotate(x.begin(), it, x.end());
    }
    PeriodicOrbit o;
    o.defect = cycle_defect(f, x);
    if (!(o.defect < cycle_step_tol))
        fail(ErrorCode::residual_too_large, "reduced cycle defect " + std::to_string(o.defect));
    if (minimal_period(x) != q)
        fail(ErrorCode::residual_too_large, "cycle is not of exact period");
    o.points = std::move(x);
    o.period = static_cast<int>(q);
    cycle_multiplier(f, o.points, o.multiplier, o.log_abs_multiplier);
    o.classification = classify_multiplier(o.multiplier, o.log_abs_multiplier);
    return o;
}

struct PeriodicMeasure {
    PeriodicOrbit orbit;
    DiscreteMeasure measure;
};

inline PeriodicMeasure periodic_measure(const PeriodicOrbit& p)
{
    return {p, DiscreteMeasure::uniform(p.points)};
}

struct FindPeriodicOptions {
    bool exhaustive = false;
    bool include_divisors = false; ///< keep cycles whose exact period properly divides `period`
    unsigned workers = 1;
    std::uint64_t seed = 0; ///< rotation used by the exhaustive solve
    CycleNewtonOptions newton{};
};

struct FindPeriodicResult {
    std::vector<PeriodicOrbit> orbits;
    std::vector<std::size_t> failed_seeds; ///< NoConvergence, reported per seed
};

namespace detail {

/// Roots of N(z) = A_P(z) - z B_P(z), the fixed points of h^P, by implicit Aberth.
inline std::vector<std::complex<double>> periodic_points_exhaustive(const RationalMap& h, int period)
{
    std::size_t n = 1;
    for (int k = 0; k < period; ++k)
        n *= static_cast<std::size_t>(h.degree());
    n += 1;
    auto ratio = [&](std::complex<double> z) {
        auto j = HomogeneousJet<double>::lift(z, true);
        for (int k = 0; k < period; ++k)
            j = step_jet(h, j, 1);
        const auto N = j.A - z * j.B;
        const auto dN = j.dA - j.B - z * j.dB;
        return dN / N;
    };
    return aberth_roots(n, ratio, circle_guesses(n, 1.0), 2000, 1e-15);
}

inline bool same_cycle(const PeriodicOrbit& a, const PeriodicOrbit& b)
{
    return a.period == b.period && b.contains(a.points.front());
}

inline std::vector<PeriodicOrbit> dedupe(std::vector<PeriodicOrbit> c)
{
    std::stable_sort(c.begin(), c.end(), [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
        if (a.period != b.period)
            return a.period < b.period;
        return sphere_less(a.points.front(), b.points.front());
    });
    std::vector<PeriodicOrbit> out;
    for (auto& o : c) {
        bool dup = false;
        for (const auto& k : out)
            if (same_cycle(o, k)) {
                dup = true;
                break;
            }
        if (!dup)
            out.push_back(std::move(o));
    }
    return out;
}

} // namespace detail

/// Cycles of exact period `period` from seeds (multiple-shooting Newton on the
/// seed's orbit segment) or, when `opt.exhaustive`, from all roots of
/// f^period(z) = z after a random rotation that keeps infinity off the cycles.
inline FindPeriodicResult find_periodic(const RationalMap& f, int period, const std::vector<SpherePoint>& seeds,
                                        const FindPeriodicOptions& opt = {})
{
    require(period >= 1, "period must be >= 1");
    std::vector<SpherePoint> starts = seeds;
    if (opt.exhaustive) {
        const double total = std::pow(double(f.degree()), period);
        if (total > 1e4)
            fail(ErrorCode::invalid_argument, "exhaustive search limited to d^period <= 1e4");
        RandomStream rng(opt.seed, 0x5eed);
        const MobiusMap g = MobiusMap::rotation_from_angles(rng.uniform(), rng.uniform(), rng.uniform());
        const RationalMap h = conjugate(f, g);
        const MobiusMap gi = g.inverse();
        starts.clear();
        for (const auto& z : detail::periodic_points_exhaustive(h, period))
            if (std::isfinite(z.real()) && std::isfinite(z.imag()))
                starts.push_back(gi(SpherePoint::finite(z)));
    }
    std::vector<std::optional<PeriodicOrbit>> found(starts.size());
    std::vector<char> failed(starts.size(), 0);
    parallel_for(starts.size(), opt.workers, [&](std::size_t s) {
        std::vector<SpherePoint> x{starts[s]};
        for (int k = 1; k < period; ++k)
            x.push_back(f(x.back()));
        auto sol = solve_cycle(f, x, opt.newton);
        if (!(sol.defect < cycle_step_tol)) {
            failed[s] = 1;
            return;
        }
        try {
            found[s] = make_periodic_orbit(f, sol.points);
        } catch (const Error&) {
            failed[s] = 1;
        }
    });
    FindPeriodicResult r;
    std::vector<PeriodicOrbit> cand;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        if (failed[s])
            r.failed_seeds.push_back(s);
        else if (found[s] && (found[s]->period == period || opt.include_divisors))
            cand.push_back(*found[s]);
    }
    r.orbits = detail::dedupe(std::move(cand));
    for (const auto& o : r.orbits) {
        // |f^period(p) - p| re-verified on a fresh composition
        SpherePoint y = o.points.front();
        for (int k = 0; k < o.period; ++k)
            y = f(y);
        if (!(chordal_distance(y, o.points.front()) <= 1e-9))
            fail(ErrorCode::residual_too_large, "periodic point residual above 1e-9");
    }
    return r;
}

// ---------------------------------------------------------------------------
// closing

struct ClosingOptions {
    std::size_t candidates = 64;  ///< near-return pairs tried, longest segment first
    std::size_t coarsen_to = 256; ///< measure gap is computed on coarsened measures above this size
    CycleNewtonOptions newton{};
};

struct ClosingResult {
    OrbitRecord source_orbit;
    std::size_t offset = 0;       ///< segment start i
    std::size_t length = 0;       ///< segment length n = j - i
    double return_distance = 0;   ///< d(f^j(x), f^i(x))
    PeriodicOrbit periodic;       ///< exact-period cycle, aligned so points[0] shadows f^i(x)
    double shadow_distance = 0;   ///< max_k d(f^{i+k}(x), f^k(p)), k < n
    double measure_gap = 0;       ///< d_w(e_n(f^i x), e_n(p)) as computed
    double gap_tolerance = 0;     ///< coarsening bound folded into measure_gap (0 when exact)
};

namespace detail {

/// W1 between two equal-size uniform point lists; coarsened above `limit` atoms.
inline double uniform_gap(const std::vector<SpherePoint>& a, const std::vector<SpherePoint>& b, std::size_t limit,
                          double& tolerance)
{
    tolerance = 0;
    DiscreteMeasure ma = DiscreteMeasure::uniform(a), mb = DiscreteMeasure::uniform(b);
    if (a.size() > limit) {
        auto ca = coarsen(ma, limit), cb = coarsen(mb, limit);
        tolerance = ca.transport_bound + cb.transport_bound;
        return wasserstein(ca.measure, cb.measure);
    }
    return wasserstein(ma, mb);
}

} // namespace detail

/// Closes a near-returning orbit segment into a periodic orbit. Near returns are
/// pairs i < j with d(f^j x, f^i x) < return_tol; the longest segments are tried
/// first, and each is closed by multiple-shooting Newton seeded with the segment.
inline ClosingResult close_orbit(const RationalMap& f, const OrbitRecord& orbit, double return_tol,
                                 const ClosingOptions& opt = {})
{
    const auto& x = orbit.points;
    require(x.size() >= 3, "orbit length must be >= 2");
    require(return_tol > 0, "return_tol must be positive");
    struct Pair {
        std::size_t i, j;
        double d;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double d = chordal_distance(x[i], x[j]);
            if (d < return_tol)
                pairs.push_back({i, j, d});
        }
    if (pairs.empty())
        fail(ErrorCode::no_near_return, "no pair of orbit points within return_tol");
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.j - a.i != b.j - b.i)
            return a.j - a.i > b.j - b.i;
        return a.d < b.d;
    });
    // segments sharing a length with a tried one add little; keep distinct lengths
    std::vector<Pair> tried;
    for (const auto& p : pairs) {
        if (tried.size() >= opt.candidates)
            break;
        if (!tried.empty() && tried.back().j - tried.back().i == p.j - p.i)
            continue;
        tried.push_back(p);
    }
    bool escaped = false;
    for (const auto& pr : tried) {
        const std::size_t n = pr.j - pr.i;
        std::vector<SpherePoint> seg(x.begin() + static_cast<std::ptrdiff_t>(pr.i),
                                     x.begin() + static_cast<std::ptrdiff_t>(pr.j));
        auto sol = solve_cycle(f, seg, opt.newton);
        if (!(sol.defect < cycle_step_tol))
            continue;
        double shadow = 0;
        for (std::size_t k = 0; k < n; ++k)
            shadow = std::max(shadow, chordal_distance(seg[k], sol.points[k]));
        if (shadow > 10 * return_tol) {
            escaped = true;
            continue;
        }
        PeriodicOrbit po;
        try {
            po = make_periodic_orbit(f, sol.points, false);
        } catch (const Error&) {
            continue;
        }
        ClosingResult r{orbit, pr.i, n, pr.d, po, shadow, 0.0, 0.0};
        r.measure_gap = detail::uniform_gap(seg, sol.points, opt.coarsen_to, r.gap_tolerance);
        return r;
    }
    if (escaped)
        fail(ErrorCode::newton_escaped, "Newton converged to a cycle farther than 10*return_tol");
    fail(ErrorCode::no_convergence, "no near-return segment could be closed");
}

// ---------------------------------------------------------------------------
// transit

/// Chart radius around each cycle point within which the one-step affine model
/// predicts the next iterate to 10% relative error; the minimum over the cycle.
inline double linearization_radius(const RationalMap& f, const PeriodicOrbit& o)
{
    double best = 0.5;
    const std::size_t P = o.points.size();
    for (std::size_t i = 0; i < P; ++i) {
        const SpherePoint& p = o.points[i];
        const SpherePoint& q = o.points[(i + 1) % P];
        const auto node = shooting_node(f, p, q);
        const auto base = q.chart_value();
        double r = best;
        for (; r > 1e-12; r *= 0.5) {
            bool ok = true;
            for (int k = 0; k < 16 && ok; ++k) {
                const auto dz = std::polar(r, 2 * std::numbers::pi * k / 16.0);
                const SpherePoint z = SpherePoint::from_chart(p.chart_value() + dz, p.in_finite_chart());
                const auto fz = f(z).in_chart(q.in_finite_chart());
                const auto lin = node.first * dz;
                if (!(std::abs(fz - (base + lin)) <= 0.1 * std::abs(lin)))
                    ok = false;
            }
            if (ok)
                break;
        }
        best = std::min(best, r);
    }
    return best;
}

/// Finite forward orbits of the critical points (first `steps` images).
inline std::vector<SpherePoint> postcritical_points(const RationalMap& f, std::size_t steps = 64)
{
    std::vector<SpherePoint> out;
    for (const auto& c : critical_points(f).points) {
        SpherePoint y = c.point;
        for (std::size_t k = 0; k < steps; ++k) {
            y = f(y);
            out.push_back(y);
        }
    }
    return out;
}

struct TransitOptions {
    int max_depth = 14;             ///< preimage-tree depth budget per transition
    double max_epsilon = 0.05;      ///< departure neighbourhood cap (chordal)
    double postcritical_margin = 1e-4;
    std::size_t coarsen_to = 256;
    CycleNewtonOptions newton{};
};

struct TransitResult {
    PeriodicOrbit orbit;
    double gap = 0;                         ///< d_w(e_N(orbit), sum c_i e_inf(p_i))
    double gap_tolerance = 0;               ///< coarsening bound included in gap (0 when exact)
    std::vector<int> dwell;                 ///< designed dwell n_i per target
    std::vector<double> dwell_fractions;    ///< n_i / sum_j n_j
    std::vector<double> period_fractions;   ///< n_i / N
    std::vector<int> transition_lengths;
    std::vector<bool> near_postcritical;    ///< target within the margin of the computed postcritical set
    double shadow_distance = 0;             ///< max distance pseudo-orbit to solution
    double epsilon = 0;                     ///< departure neighbourhood used
};

namespace detail {

/// Preimages of y: roots of P - y Q (with infinity when the degree drops).
inline std::vector<SpherePoint> preimages(const RationalMap& f, const SpherePoint& y)
{
    // homogeneous: b P_h(z) - a Q_h(z) with y = [a:b]
    const int d = f.degree();
    Poly g(static_cast<std::size_t>(d) + 1);
    for (int k = 0; k <= d; ++k)
        g[static_cast<std::size_t>(k)] = y.b() * f.p()[static_cast<std::size_t>(k)] - y.a() * f.q()[static_cast<std::size_t>(k)];
    const Poly gt = poly::trimmed(g, 1e-14);
    std::vector<SpherePoint> out;
    const int deg = static_cast<int>(gt.size()) - 1;
    if (deg >= 1)
        for (const auto& z : polynomial_roots(gt))
            out.push_back(SpherePoint::finite(z));
    for (int k = std::max(deg, 0); k < d; ++k)
        out.push_back(SpherePoint::infinity());
    return out;
}

struct Transition {
    std::vector<SpherePoint> chain; ///< z, f(z), ..., f^{k-1}(z); f^k(z) = to.points[entry]
    std::size_t departure = 0;      ///< index in `from` that z approximates
    std::size_t entry = 0;
};

inline Transition find_transition(const RationalMap& f, const PeriodicOrbit& from, const PeriodicOrbit& to,
                                  double eps, int max_depth)
{
    struct Node {
        SpherePoint z;
        std::size_t parent; // index into previous level
    };
    std::vector<std::vector<Node>> levels;
    levels.push_back({});
    for (std::size_t e = 0; e < to.points.size(); ++e)
        levels[0].push_back({to.points[e], e});
    for (int k = 1; k <= max_depth; ++k) {
        std::vector<Node> next;
        double best = eps;
        std::optional<std::pair<std::size_t, std::size_t>> hit; // (node index, departure)
        for (std::size_t pi = 0; pi < levels.back().size(); ++pi)
            for (const auto& z : preimages(f, levels.back()[pi].z)) {
                if (to.contains(z, 1e-9))
                    continue;
                next.push_back({z, pi});
                for (std::size_t a = 0; a < from.points.size(); ++a) {
                    const double d = chordal_distance(z, from.points[a]);
                    if (d < best) {
                        best = d;
                        hit = std::make_pair(next.size() - 1, a);
                    }
                }
            }
        levels.push_back(std::move(next));
        if (hit) {
            Transition t;
            t.departure = hit->second;
            std::size_t idx = hit->first;
            for (int lv = k; lv >= 1; --lv) {
                t.chain.push_back(levels[static_cast<std::size_t>(lv)][idx].z);
                idx = levels[static_cast<std::size_t>(lv)][idx].parent;
            }
            t.entry = idx;
            return t;
        }
        if (levels.back().size() > (std::size_t(1) << 16))
            break;
    }
    fail(ErrorCode::transition_not_found, "no preimage chain within the depth budget");
}

} // namespace detail

/// Single periodic orbit whose empirical measure approximates sum c_i e_inf(p_i):
/// dwell near each target, hop along preimage chains, close by shooting Newton.
inline TransitResult transit_periodic(const RationalMap& f, const std::vector<PeriodicOrbit>& targets,
                                      const std::vector<double>& coefficients, int dwell_budget,
                                      const TransitOptions& opt = {})
{
    require(!targets.empty() && targets.size() == coefficients.size(), "targets and coefficients differ in size");
    double csum = 0;
    for (double c : coefficients) {
        require(c >= 0, "coefficients must be nonnegative");
        csum += c;
    }
    require(std::abs(csum - 1) <= 1e-12, "coefficients must sum to 1");
    require(dwell_budget >= 1, "dwell budget must be positive");
    for (const auto& t : targets)
        require(t.classification == CycleClass::repelling, "transit targets must be repelling");

    TransitResult r;
    const auto pcs = postcritical_points(f);
    for (const auto& t : targets) {
        bool near = false;
        for (const auto& p : t.points)
            for (const auto& c : pcs)
                near = near || chordal_distance(p, c) <= opt.postcritical_margin;
        r.near_postcritical.push_back(near);
    }
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (coefficients[i] > 0)
            active.push_back(i);
    std::vector<DiscreteMeasure> parts;
    for (const auto& t : targets)
        parts.push_back(DiscreteMeasure::uniform(t.points));
    const DiscreteMeasure goal = mixture(parts, coefficients);
    r.dwell.assign(targets.size(), 0);
    r.dwell_fractions.assign(targets.size(), 0.0);
    r.period_fractions.assign(targets.size(), 0.0);

    if (active.size() == 1) {
        const auto& t = targets[active.front()];
        r.orbit = t;
        r.dwell[active.front()] = t.period;
        r.dwell_fractions[active.front()] = 1.0;
        r.period_fractions[active.front()] = 1.0;
        r.gap = wasserstein(DiscreteMeasure::uniform(t.points), goal);
        return r;
    }

    double eps = opt.max_epsilon;
    for (std::size_t i : active)
        eps = std::min(eps, linearization_radius(f, targets[i]));
    r.epsilon = eps;

    const std::size_t K = active.size();
    std::vector<detail::Transition> hops(K);
    for (std::size_t k = 0; k < K; ++k)
        hops[k] = detail::find_transition(f, targets[active[k]], targets[active[(k + 1) % K]], eps, opt.max_depth);

    // dwell m_k walks target k from its entry point to the predecessor of the departure point
    std::vector<SpherePoint> pseudo;
    for (std::size_t k = 0; k < K; ++k) {
        const auto& t = targets[active[k]];
        const std::size_t per = t.points.size();
        const std::size_t entry = hops[(k + K - 1) % K].entry;
        const std::size_t dep = hops[k].departure;
        const std::size_t residue = (dep + per - entry) % per;
        const double want = coefficients[active[k]] * dwell_budget;
        long m = static_cast<long>(residue) +
                 static_cast<long>(per) * std::lround((want - double(residue)) / double(per));
        while (m < 1)
            m += static_cast<long>(per);
        for (long s = 0; s < m; ++s)
            pseudo.push_back(t.points[(entry + static_cast<std::size_t>(s)) % per]);
        for (const auto& z : hops[k].chain)
            pseudo.push_back(z);
        r.dwell[active[k]] = static_cast<int>(m);
        r.transition_lengths.push_back(static_cast<int>(hops[k].chain.size()));
    }
    auto sol = solve_cycle(f, pseudo, opt.newton);
    if (!(sol.defect < cycle_step_tol))
        fail(ErrorCode::no_convergence, "shooting Newton did not close the transit pseudo-orbit");
    for (std::size_t k = 0; k < pseudo.size(); ++k)
        r.shadow_distance = std::max(r.shadow_distance, chordal_distance(pseudo[k], sol.points[k]));
    if (r.shadow_distance > 10 * eps)
        fail(ErrorCode::newton_escaped, "closed transit orbit left the pseudo-orbit neighbourhood");
    r.orbit = make_periodic_orbit(f, sol.points, false);

    double total = 0;
    for (int n : r.dwell)
        total += n;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        r.dwell_fractions[i] = r.dwell[i] / total;
        r.period_fractions[i] = r.dwell[i] / double(pseudo.size());
    }
    DiscreteMeasure e = DiscreteMeasure::uniform(sol.points);
    if (e.size() * goal.size() > max_transport_pairs || e.size() > 4 * opt.coarsen_to) {
        const auto c = coarsen(e, opt.coarsen_to);
        r.gap_tolerance = c.transport_bound;
        e = c.measure;
    }
    r.gap = wasserstein(e, goal);
    return r;
}

} // namespace nsdyn

#endif
