#ifndef NSDYN_POSTCRITICAL_HPP
#define NSDYN_POSTCRITICAL_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cycle_newton.hpp"
#include "error.hpp"
#include "periodic.hpp"
#include "ratmap.hpp"

namespace nsdyn {

enum class PostcriticalFlag { lands_on_cycle, escaping_resolution, undecided };

inline std::string to_string(PostcriticalFlag f)
{
    switch (f) {
    case PostcriticalFlag::lands_on_cycle: return "lands_on_cycle";
    case PostcriticalFlag::escaping_resolution: return "escaping_resolution";
    case PostcriticalFlag::undecided: return "undecided";
    }
    return "unknown";
}

inline constexpr double landing_tol = 1e-8;

struct CriticalOrbit {
    CriticalPoint critical;
    std::vector<SpherePoint> orbit;      ///< c, f(c), ..., as far as computed
    PostcriticalFlag flag = PostcriticalFlag::undecided;
    std::optional<PeriodicOrbit> cycle;  ///< refined cycle the orbit approaches
    int landing_step = -1;               ///< n_i: first k with f^k(c) on the cycle (within 1e-8)
    int landing_index = -1;              ///< index of p_i in cycle->points
    double landing_distance = 0;         ///< d(f^{n_i}(c), p_i) on re-evaluation
};

/// Sub-conditions of the stronger class (simple critical points, postcritical set
/// free of critical points) reported as margins, not thresholded.
struct KappaStarMargins {
    int max_multiplicity = 0;
    double min_critical_separation = 2;  ///< min pairwise chordal distance of critical points
    double min_postcritical_distance = 2; ///< min d(f^k(c_i), c_j), k >= 1, over computed orbits and cycles
};

struct PostcriticalData {
    RationalMap map;
    std::vector<CriticalOrbit> orbits;
    KappaStarMargins margins;
    int max_steps = 0;
    double cycle_tol = 0;
};

struct PostcriticalOptions {
    CycleNewtonOptions newton{};
};

/// Iterates each critical point, detects the first near-return of its tail,
/// refines the cycle by shooting Newton and records landing data.
inline PostcriticalData postcritical_scan(const RationalMap& f, int max_steps, double cycle_tol = 1e-6,
                                          const PostcriticalOptions& opt = {})
{
    require(max_steps >= 1, "max_steps must be >= 1");
    require(cycle_tol > 0, "cycle_tol must be positive");
    PostcriticalData data{f, {}, {}, max_steps, cycle_tol};
    const CriticalSet crit = critical_points(f);
    for (const auto& c : crit.points) {
        CriticalOrbit co;
        co.critical = c;
        co.orbit.push_back(c.point);
        std::optional<std::pair<std::size_t, std::size_t>> ret;
        for (int k = 1; k <= max_steps && !ret; ++k) {
            co.orbit.push_back(f(co.orbit.back()));
            const std::size_t j = co.orbit.size() - 1;
            for (std::size_t i = 0; i < j; ++i)
                if (chordal_distance(co.orbit[i], co.orbit[j]) < cycle_tol) {
                    ret = std::make_pair(i, j);
                    break;
                }
        }
        if (ret) {
            std::vector<SpherePoint> seg(co.orbit.begin() + static_cast<std::ptrdiff_t>(ret->first),
                                         co.orbit.begin() + static_cast<std::ptrdiff_t>(ret->second));
            const auto sol = solve_cycle(f, seg, opt.newton);
            if (sol.defect < 1e-12) {
                try {
                    co.cycle = make_periodic_orbit(f, sol.points);
                } catch (const Error&) {
                    co.cycle.reset();
                }
            }
        }
        if (co.cycle) {
            co.flag = PostcriticalFlag::escaping_resolution;
            // continue the raw orbit if needed: landing may come after the near-return
            while (static_cast<int>(co.orbit.size()) <= max_steps)
                co.orbit.push_back(f(co.orbit.back()));
            for (std::size_t k = 0; k < co.orbit.size() && co.landing_step < 0; ++k)
                for (std::size_t i = 0; i < co.cycle->points.size(); ++i)
                    if (chordal_distance(co.orbit[k], co.cycle->points[i]) < landing_tol) {
                        co.landing_step = static_cast<int>(k);
                        co.landing_index = static_cast<int>(i);
                        break;
                    }
            if (co.landing_step >= 0) {
                // re-evaluation on a fresh iteration
                SpherePoint y = c.point;
                for (int k = 0; k < co.landing_step; ++k)
                    y = f(y);
                co.landing_distance =
                    chordal_distance(y, co.cycle->points[static_cast<std::size_t>(co.landing_index)]);
                if (co.landing_distance < landing_tol)
                    co.flag = PostcriticalFlag::lands_on_cycle;
                else
                    co.landing_step = co.landing_index = -1;
            }
            if (co.landing_step >= 0)
                co.orbit.resize(std::min(co.orbit.size(), static_cast<std::size_t>(co.landing_step) + 1));
        }
        data.orbits.push_back(std::move(co));
    }
    auto& m = data.margins;
    for (std::size_t a = 0; a < crit.points.size(); ++a) {
        m.max_multiplicity = std::max(m.max_multiplicity, crit.points[a].multiplicity);
        for (std::size_t b = a + 1; b < crit.points.size(); ++b)
            m.min_critical_separation =
                std::min(m.min_critical_separation, chordal_distance(crit.points[a].point, crit.points[b].point));
    }
    if (m.max_multiplicity > 1)
        m.min_critical_separation = 0;
    for (const auto& co : data.orbits) {
        std::vector<SpherePoint> post(co.orbit.begin() + 1, co.orbit.end());
        if (co.cycle)
            post.insert(post.end(), co.cycle->points.begin(), co.cycle->points.end());
        for (const auto& y : post)
            for (const auto& c : crit.points)
                m.min_postcritical_distance = std::min(m.min_postcritical_distance, chordal_distance(y, c.point));
    }
    return data;
}

struct PcfCertificateEntry {
    SpherePoint critical;
    int landing_step = 0;
    SpherePoint landing_point;
    std::complex<double> multiplier;
    double log_abs_multiplier = 0;
    int cycle_period = 0;
};

struct PcfCertificate {
    bool strictly_pcf = false;
    std::vector<PcfCertificateEntry> entries;
    std::vector<std::string> reasons; ///< why the verdict is false
};

/// Numerical strict-pcf certificate. Throws Undecidable if any critical orbit is undecided.
inline PcfCertificate is_strictly_pcf(const PostcriticalData& data)
{
    PcfCertificate cert;
    for (const auto& co : data.orbits)
        if (co.flag == PostcriticalFlag::undecided)
            fail(ErrorCode::undecidable, "critical orbit without near-return within max_steps");
    const CriticalSet crit = critical_points(data.map);
    bool ok = true;
    for (const auto& co : data.orbits) {
        if (co.flag != PostcriticalFlag::lands_on_cycle) {
            ok = false;
            cert.reasons.push_back("critical orbit converges to a cycle but does not land on it");
            continue;
        }
        const auto& cyc = *co.cycle;
        PcfCertificateEntry e{co.critical.point, co.landing_step,
                              cyc.points[static_cast<std::size_t>(co.landing_index)], cyc.multiplier,
                              cyc.log_abs_multiplier, cyc.period};
        cert.entries.push_back(e);
        for (const auto& c : crit.points)
            if (cyc.contains(c.point)) {
                ok = false;
                cert.reasons.push_back("periodic critical point on a landing cycle");
                break;
            }
        if (cyc.classification != CycleClass::repelling) {
            ok = false;
            cert.reasons.push_back("landing cycle is not repelling");
        }
    }
    cert.strictly_pcf = ok;
    return cert;
}

} // namespace nsdyn

#endif
