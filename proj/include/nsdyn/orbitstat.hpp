#ifndef NSDYN_ORBITSTAT_HPP
#define NSDYN_ORBITSTAT_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "family.hpp"
#include "measures.hpp"
#include "parallel.hpp"
#include "ratmap.hpp"

namespace nsdyn {

/// Phase space for orbit computations. `unit_circle` projects every iterate back
/// to |z| = 1 (valid only when f maps the circle into itself). `automatic`
/// selects it for starts on the circle when the circle is invariant.
enum class PhaseSpace { sphere, unit_circle, automatic };

inline std::string to_string(PhaseSpace p)
{
    switch (p) {
    case PhaseSpace::sphere: return "sphere";
    case PhaseSpace::unit_circle: return "unit_circle";
    case PhaseSpace::automatic: return "automatic";
    }
    return "unknown";
}

inline PhaseSpace phase_space_from_string(const std::string& s)
{
    if (s == "sphere")
        return PhaseSpace::sphere;
    if (s == "unit_circle")
        return PhaseSpace::unit_circle;
    if (s == "automatic")
        return PhaseSpace::automatic;
    fail(ErrorCode::invalid_argument, "unknown phase space '" + s + "'");
}

/// f(S^1) in S^1, tested at 64 angles.
inline bool preserves_unit_circle(const RationalMap& f)
{
    for (int k = 0; k < 64; ++k) {
        const auto z = SpherePoint::finite(std::polar(1.0, 2 * std::numbers::pi * (k + 0.5) / 64.0));
        const auto w = f(z);
        if (w.is_infinity() || std::abs(std::abs(w.value()) - 1.0) > 1e-12)
            return false;
    }
    return true;
}

inline bool on_unit_circle(const SpherePoint& x)
{
    return x.in_finite_chart() && std::abs(std::abs(x.a()) - 1.0) <= 1e-12;
}

/// Resolves `automatic` for a start point.
inline PhaseSpace resolve_phase(PhaseSpace p, const RationalMap& f, const SpherePoint& x)
{
    if (p == PhaseSpace::automatic)
        return on_unit_circle(x) && preserves_unit_circle(f) ? PhaseSpace::unit_circle : PhaseSpace::sphere;
    if (p == PhaseSpace::unit_circle)
        require(preserves_unit_circle(f), "unit_circle phase space needs f(S^1) in S^1");
    return p;
}

inline SpherePoint phase_step(const RationalMap& f, const SpherePoint& x, PhaseSpace resolved)
{
    SpherePoint y = f(x);
    if (resolved == PhaseSpace::unit_circle) {
        const auto z = y.value();
        y = SpherePoint::finite(z / std::abs(z));
    }
    return y;
}

/// Geometric checkpoint grid first, 2 first, 4 first, ... up to `last` (inclusive if hit).
inline std::vector<std::size_t> geometric_checkpoints(std::size_t first, std::size_t last, std::size_t factor = 2)
{
    require(first >= 1 && factor >= 2, "invalid checkpoint grid");
    std::vector<std::size_t> g;
    for (std::size_t n = first; n <= last; n *= factor)
        g.push_back(n);
    return g;
}

struct EmpiricalOptions {
    PhaseSpace phase = PhaseSpace::automatic;
    std::size_t coarsen_to = 0; ///< 0 keeps the exact n-atom measures
};

struct EmpiricalSequence {
    SpherePoint start;
    std::vector<std::size_t> checkpoints;
    std::vector<DiscreteMeasure> measures;
    std::vector<double> coarsen_bounds; ///< transport bound per checkpoint (0 when exact)
    std::vector<double> coarsen_radii;
    PhaseSpace phase = PhaseSpace::sphere;
};

inline void check_checkpoints(const std::vector<std::size_t>& cps)
{
    require(!cps.empty(), "checkpoints must be nonempty");
    require(cps.front() >= 1, "checkpoints must be >= 1");
    for (std::size_t i = 1; i < cps.size(); ++i)
        require(cps[i] > cps[i - 1], "checkpoints must be increasing");
}

/// e_n(x) = (1/n) sum_{i<n} delta_{f^i x} at each checkpoint, from one orbit pass.
inline EmpiricalSequence empirical_sequence(const RationalMap& f, const SpherePoint& x,
                                            const std::vector<std::size_t>& checkpoints,
                                            const EmpiricalOptions& opt = {})
{
    check_checkpoints(checkpoints);
    EmpiricalSequence s;
    s.start = x;
    s.checkpoints = checkpoints;
    s.phase = resolve_phase(opt.phase, f, x);
    std::vector<SpherePoint> orbit;
    orbit.reserve(checkpoints.back());
    SpherePoint y = x;
    std::size_t next = 0;
    while (next < checkpoints.size()) {
        orbit.push_back(y);
        if (orbit.size() == checkpoints[next]) {
            DiscreteMeasure m = DiscreteMeasure::uniform(orbit);
            if (opt.coarsen_to > 0) {
                auto c = coarsen(m, opt.coarsen_to);
                s.measures.push_back(std::move(c.measure));
                s.coarsen_bounds.push_back(c.transport_bound);
                s.coarsen_radii.push_back(c.radius);
            } else {
                s.measures.push_back(std::move(m));
                s.coarsen_bounds.push_back(0);
                s.coarsen_radii.push_back(0);
            }
            ++next;
        }
        if (next < checkpoints.size())
            y = phase_step(f, y, s.phase);
    }
    return s;
}

struct LawOptions {
    unsigned workers = 1;
    PhaseSpace phase = PhaseSpace::automatic;
};

struct LawSequence {
    ReferenceSampler sampler;
    std::size_t sample_count = 0;
    std::vector<std::size_t> checkpoints;
    std::vector<MetaMeasure> laws;
    std::vector<double> coarsen_tolerance; ///< per checkpoint: mean coarsening transport bound over samples
    std::vector<double> coarsen_radius;    ///< per checkpoint: max coarsening radius over samples
};

/// Monte-Carlo law of e_n: pushforward of the reference measure, sample by sample.
inline LawSequence law_sequence(const RationalMap& f, const ReferenceSampler& sampler, std::size_t sample_count,
                                const std::vector<std::size_t>& checkpoints, std::size_t coarsen_to,
                                const LawOptions& opt = {})
{
    require(sample_count >= 2, "sample_count must be >= 2");
    require(coarsen_to >= 1, "coarsen_to must be >= 1");
    check_checkpoints(checkpoints);
    const auto starts = sample_reference(sampler, sample_count);
    std::vector<EmpiricalSequence> seqs(sample_count);
    parallel_for(sample_count, opt.workers, [&](std::size_t s) {
        seqs[s] = empirical_sequence(f, starts[s], checkpoints, {opt.phase, coarsen_to});
    });
    LawSequence law{sampler, sample_count, checkpoints, {}, {}, {}};
    for (std::size_t j = 0; j < checkpoints.size(); ++j) {
        std::vector<DiscreteMeasure> atoms;
        double tol = 0, rad = 0;
        for (const auto& s : seqs) {
            atoms.push_back(s.measures[j]);
            tol += s.coarsen_bounds[j];
            rad = std::max(rad, s.coarsen_radii[j]);
        }
        law.laws.push_back(MetaMeasure::uniform(std::move(atoms)));
        law.coarsen_tolerance.push_back(tol / double(sample_count));
        law.coarsen_radius.push_back(rad);
    }
    return law;
}

struct AccumulationReport {
    std::vector<std::size_t> tail_checkpoints;
    std::vector<DiscreteMeasure> cluster_centers;
    std::vector<std::size_t> center_checkpoints; ///< checkpoint each center was taken from
    std::vector<std::size_t> assignment;         ///< tail checkpoint -> nearest center
    std::vector<double> distance_to_center;
    double oscillation_diameter = 0;
    std::size_t tail_start = 0;
    double coarsen_tolerance = 0;  ///< bound on the error of any pairwise d_w from coarsening
    double sampling_tolerance = 0;
    bool non_statistical = false;  ///< diameter > 10 x (coarsen + sampling) tolerance
    double cluster_radius = 0;
};

struct AccumulationOptions {
    std::size_t coarsen_to = 256;
    unsigned workers = 1;
    double sampling_tolerance = 0;
};

/// Clusters the tail measures under d_w: connected components of the graph with
/// edges d_w <= cluster_radius, each represented by its medoid; every tail
/// checkpoint is then assigned to its nearest center.
inline AccumulationReport accumulation_report(const EmpiricalSequence& seq, double tail_fraction,
                                              double cluster_radius, const AccumulationOptions& opt = {})
{
    require(tail_fraction > 0 && tail_fraction <= 1, "tail_fraction must lie in (0, 1]");
    require(cluster_radius >= 0, "cluster_radius must be >= 0");
    const std::size_t k = seq.checkpoints.size();
    const auto tail_len = static_cast<std::size_t>(std::ceil(tail_fraction * double(k) - 1e-9));
    if (tail_len < 3)
        fail(ErrorCode::insufficient_tail, "fewer than 3 tail checkpoints");
    AccumulationReport r;
    r.cluster_radius = cluster_radius;
    r.tail_start = k - tail_len;
    r.sampling_tolerance = opt.sampling_tolerance;
    std::vector<DiscreteMeasure> tail;
    double worst_bound = 0;
    for (std::size_t j = r.tail_start; j < k; ++j) {
        r.tail_checkpoints.push_back(seq.checkpoints[j]);
        auto c = coarsen(seq.measures[j], opt.coarsen_to);
        worst_bound = std::max(worst_bound, c.transport_bound + seq.coarsen_bounds[j]);
        tail.push_back(std::move(c.measure));
    }
    r.coarsen_tolerance = 2 * worst_bound;
    const std::size_t n = tail.size();
    std::vector<double> D(n * n, 0.0);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            pairs.push_back({a, b});
    parallel_for(pairs.size(), opt.workers, [&](std::size_t p) {
        const auto [a, b] = pairs[p];
        D[a * n + b] = D[b * n + a] = wasserstein(tail[a], tail[b]);
    });
    for (double d : D)
        r.oscillation_diameter = std::max(r.oscillation_diameter, d);
    // single-linkage components
    std::vector<std::size_t> comp(n);
    for (std::size_t a = 0; a < n; ++a)
        comp[a] = a;
    auto find = [&](std::size_t a) {
        while (comp[a] != a)
            a = comp[a] = comp[comp[a]];
        return a;
    };
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (D[a * n + b] <= cluster_radius) {
                const auto ra = find(a), rb = find(b);
                if (ra != rb)
                    comp[std::max(ra, rb)] = std::min(ra, rb);
            }
    std::vector<std::size_t> roots;
    for (std::size_t a = 0; a < n; ++a)
        if (find(a) == a)
            roots.push_back(a);
    std::vector<std::size_t> medoids;
    for (std::size_t root : roots) {
        std::size_t best = root;
        double best_cost = -1;
        for (std::size_t a = 0; a < n; ++a) {
            if (find(a) != root)
                continue;
            double cost = 0;
            for (std::size_t b = 0; b < n; ++b)
                if (find(b) == root)
                    cost += D[a * n + b];
            if (best_cost < 0 || cost < best_cost) {
                best_cost = cost;
                best = a;
            }
        }
        medoids.push_back(best);
        r.cluster_centers.push_back(tail[best]);
        r.center_checkpoints.push_back(seq.checkpoints[r.tail_start + best]);
    }
    for (std::size_t a = 0; a < n; ++a) {
        std::size_t arg = 0;
        for (std::size_t c = 1; c < medoids.size(); ++c)
            if (D[a * n + medoids[c]] < D[a * n + medoids[arg]])
                arg = c;
        r.assignment.push_back(arg);
        r.distance_to_center.push_back(D[a * n + medoids[arg]]);
    }
    r.non_statistical = r.oscillation_diameter > 10 * (r.coarsen_tolerance + r.sampling_tolerance);
    return r;
}

struct LawParams {
    ReferenceSampler sampler;
    std::size_t sample_count = 16;
    std::size_t coarsen_to = 64;
    std::size_t first_checkpoint = 10;
    std::size_t grid_factor = 2;
    unsigned workers = 1;
    PhaseSpace phase = PhaseSpace::automatic;
};

struct EkProbe {
    std::vector<std::size_t> checkpoints;
    std::vector<MetaMeasure> laws;
    std::vector<double> coarsen_tolerance;
    double diameter = 0; ///< max pairwise meta-d_w among the returned laws
    double diameter_tolerance = 0;
};

/// Finite-sample skeleton of E_k(f): laws at grid checkpoints n with k < n <= horizon.
inline EkProbe finite_Ek_probe(const RationalMap& f, std::size_t k, std::size_t horizon, const LawParams& p)
{
    require(horizon > k, "horizon must exceed k");
    std::vector<std::size_t> grid;
    for (std::size_t n : geometric_checkpoints(p.first_checkpoint, horizon, p.grid_factor))
        if (n > k)
            grid.push_back(n);
    if (grid.empty() || grid.back() != horizon)
        grid.push_back(horizon);
    const auto law = law_sequence(f, p.sampler, p.sample_count, grid, p.coarsen_to, {p.workers, p.phase});
    EkProbe e{grid, law.laws, law.coarsen_tolerance, 0, 0};
    for (std::size_t a = 0; a < grid.size(); ++a)
        for (std::size_t b = a + 1; b < grid.size(); ++b) {
            const double d = meta_wasserstein(law.laws[a], law.laws[b], p.workers);
            if (d > e.diameter) {
                e.diameter = d;
            }
            e.diameter_tolerance =
                std::max(e.diameter_tolerance, law.coarsen_tolerance[a] + law.coarsen_tolerance[b]);
        }
    return e;
}

struct ProbeEntry {
    std::complex<double> parameter;
    std::size_t checkpoint = 0;
    MetaMeasure law;
    double coarsen_tolerance = 0;
    std::size_t cluster = 0;         ///< target/cluster index approached at the final checkpoint
    double distance_to_target = 0;   ///< meta-d_w to that target
};

struct BifurcationProbeReport {
    std::string label = "finite-sample probe";
    std::vector<ProbeEntry> entries;           ///< one per (parameter, checkpoint)
    std::vector<std::complex<double>> parameters;
    std::vector<MetaMeasure> targets;          ///< supplied, or discovered cluster representatives
    bool discovered_targets = false;
    double cluster_threshold = 0;
};

struct ProbeOptions {
    std::vector<MetaMeasure> targets; ///< when empty, targets are discovered by clustering
    double cluster_threshold = 0;     ///< 0: max(1e-3, 10 x the largest pairwise coarsening tolerance)
    std::uint64_t seed = 0;
};

/// Laws of f_lambda for parameters in the disk |lambda - center| <= radius: the
/// center first, then `probes - 1` uniformly drawn parameters.
inline BifurcationProbeReport bifurcation_probe(const FamilySpec& fam, std::complex<double> center, double radius,
                                                std::size_t probes, const std::vector<std::size_t>& checkpoints,
                                                const LawParams& p, const ProbeOptions& opt = {})
{
    require(probes >= 1, "probes must be >= 1");
    require(radius >= 0, "radius must be >= 0");
    BifurcationProbeReport rep;
    for (std::size_t m = 0; m < probes; ++m) {
        if (m == 0) {
            rep.parameters.push_back(center);
            continue;
        }
        RandomStream rng(opt.seed, m);
        const double r = radius * std::sqrt(rng.uniform());
        rep.parameters.push_back(center + std::polar(r, 2 * std::numbers::pi * rng.uniform()));
    }
    std::vector<LawSequence> laws;
    for (const auto& lambda : rep.parameters)
        laws.push_back(law_sequence(member(fam, lambda), p.sampler, p.sample_count, checkpoints, p.coarsen_to,
                                    {p.workers, p.phase}));
    const std::size_t last = checkpoints.size() - 1;
    double max_tol = 0;
    for (const auto& l : laws)
        max_tol = std::max(max_tol, l.coarsen_tolerance[last]);
    rep.cluster_threshold = opt.cluster_threshold > 0 ? opt.cluster_threshold : std::max(1e-3, 10 * 2 * max_tol);
    std::vector<std::size_t> target_of(laws.size(), 0);
    std::vector<double> dist_of(laws.size(), 0);
    if (!opt.targets.empty()) {
        rep.targets = opt.targets;
    } else {
        // greedy discovery over final laws in parameter order
        rep.discovered_targets = true;
        for (const auto& l : laws) {
            bool near = false;
            for (const auto& t : rep.targets)
                if (meta_wasserstein(l.laws[last], t, p.workers) <= rep.cluster_threshold) {
                    near = true;
                    break;
                }
            if (!near)
                rep.targets.push_back(l.laws[last]);
        }
    }
    for (std::size_t m = 0; m < laws.size(); ++m) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < rep.targets.size(); ++t) {
            const double d = meta_wasserstein(laws[m].laws[last], rep.targets[t], p.workers);
            if (d < best) {
                best = d;
                target_of[m] = t;
            }
        }
        dist_of[m] = best;
    }
    for (std::size_t m = 0; m < laws.size(); ++m)
        for (std::size_t j = 0; j < checkpoints.size(); ++j)
            rep.entries.push_back({rep.parameters[m], checkpoints[j], laws[m].laws[j],
                                   laws[m].coarsen_tolerance[j], target_of[m],
                                   j == last ? dist_of[m]
                                             : meta_wasserstein(laws[m].laws[j], rep.targets[target_of[m]], p.workers)});
    return rep;
}

} // namespace nsdyn

#endif
