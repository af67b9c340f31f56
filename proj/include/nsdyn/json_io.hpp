#ifndef NSDYN_JSON_IO_HPP
#define NSDYN_JSON_IO_HPP

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bifurcation.hpp"
#include "error.hpp"
#include "family.hpp"
#include "measures.hpp"
#include "orbitstat.hpp"
#include "periodic.hpp"
#include "postcritical.hpp"
#include "ratmap.hpp"
#include "sphere.hpp"

namespace nsdyn {

using json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

#ifdef NSDYN_VERSION
inline constexpr const char* tool_version = NSDYN_VERSION;
#else
inline constexpr const char* tool_version = "1.0.0";
#endif

/// 64-bit FNV-1a of a byte string.
inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4)
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return out;
}

inline std::string config_hash(const json& config) { return hex64(fnv1a(config.dump())); }

// ---------------------------------------------------------------------------
// scalars, points, maps, measures

inline json to_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

inline std::complex<double> complex_from_json(const json& j)
{
    if (j.is_number())
        return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    fail(ErrorCode::invalid_argument, "expected a complex number [re, im], got " + j.dump());
}

inline json point_to_json(const SpherePoint& x)
{
    if (x.is_infinity())
        return "inf";
    return to_json(x.value());
}

inline SpherePoint point_from_json(const json& j)
{
    if (j.is_string()) {
        if (j.get<std::string>() == "inf")
            return SpherePoint::infinity();
        fail(ErrorCode::invalid_argument, "unknown point string '" + j.get<std::string>() + "'");
    }
    return SpherePoint::finite(complex_from_json(j));
}

inline json points_to_json(const std::vector<SpherePoint>& pts)
{
    json a = json::array();
    for (const auto& p : pts)
        a.push_back(point_to_json(p));
    return a;
}

inline std::vector<SpherePoint> points_from_json(const json& j)
{
    require(j.is_array(), "expected an array of points");
    std::vector<SpherePoint> out;
    for (const auto& e : j)
        out.push_back(point_from_json(e));
    return out;
}

inline json complex_list_to_json(const std::vector<std::complex<double>>& v)
{
    json a = json::array();
    for (const auto& z : v)
        a.push_back(to_json(z));
    return a;
}

inline std::vector<std::complex<double>> complex_list_from_json(const json& j)
{
    require(j.is_array(), "expected an array of complex numbers");
    std::vector<std::complex<double>> out;
    for (const auto& e : j)
        out.push_back(complex_from_json(e));
    return out;
}

inline json map_to_json(const RationalMap& f)
{
    return json{{"p", complex_list_to_json(f.p())}, {"q", complex_list_to_json(f.q())}};
}

/// {"p": [...], "q": [...]}, ascending coefficients. Degree-one inputs are accepted
/// as explicit fixtures (the identity of criterion-style experiments).
inline RationalMap map_from_json(const json& j)
{
    require(j.is_object() && j.contains("p") && j.contains("q"), "map must be an object with fields p and q");
    auto p = complex_list_from_json(j.at("p"));
    auto q = complex_list_from_json(j.at("q"));
    const int d = std::max(poly::degree(p), poly::degree(q));
    if (d <= 1)
        return RationalMap::degree_one_fixture(std::move(p), std::move(q));
    return RationalMap(std::move(p), std::move(q));
}

inline json measure_to_json(const DiscreteMeasure& m)
{
    return json{{"atoms", points_to_json(m.atoms())}, {"weights", m.weights()}};
}

inline DiscreteMeasure measure_from_json(const json& j)
{
    require(j.is_object() && j.contains("atoms"), "measure must have an atoms field");
    auto atoms = points_from_json(j.at("atoms"));
    if (!j.contains("weights"))
        return DiscreteMeasure::uniform(std::move(atoms));
    return DiscreteMeasure(std::move(atoms), j.at("weights").get<std::vector<double>>());
}

inline json meta_measure_to_json(const MetaMeasure& m)
{
    json atoms = json::array();
    for (const auto& a : m.atoms())
        atoms.push_back(measure_to_json(a));
    return json{{"atoms", atoms}, {"weights", m.weights()}};
}

inline MetaMeasure meta_measure_from_json(const json& j)
{
    std::vector<DiscreteMeasure> atoms;
    for (const auto& a : j.at("atoms"))
        atoms.push_back(measure_from_json(a));
    if (!j.contains("weights"))
        return MetaMeasure::uniform(std::move(atoms));
    return MetaMeasure(std::move(atoms), j.at("weights").get<std::vector<double>>());
}

/// {"builtin": name, "radius": r} or {"base": map, "direction": [...], "radius": r}.
inline FamilySpec family_from_json(const json& j)
{
    require(j.is_object(), "family must be an object");
    const double r = j.value("radius", 1.0);
    if (j.contains("builtin"))
        return FamilySpec::builtin(j.at("builtin").get<std::string>(), r);
    require(j.contains("base") && j.contains("direction"), "family needs builtin, or base and direction");
    return FamilySpec::coefficient_line(map_from_json(j.at("base")), complex_list_from_json(j.at("direction")), r);
}

inline json family_to_json(const FamilySpec& f)
{
    json j;
    if (f.kind == FamilySpec::Kind::builtin)
        j["builtin"] = f.name;
    else {
        j["base"] = map_to_json(f.base);
        j["direction"] = complex_list_to_json(f.direction);
    }
    j["radius"] = f.domain_radius;
    return j;
}

inline ReferenceSampler sampler_from_json(const json& j, std::uint64_t seed)
{
    ReferenceSampler s;
    s.seed = seed;
    if (j.is_string()) {
        s.kind = sampler_kind_from_string(j.get<std::string>());
        return s;
    }
    s.kind = sampler_kind_from_string(j.value("kind", std::string("spherical_area_uniform")));
    if (j.contains("atoms"))
        s.custom_atoms = points_from_json(j.at("atoms"));
    return s;
}

// ---------------------------------------------------------------------------
// reports

inline json periodic_to_json(const PeriodicOrbit& o)
{
    return json{{"points", points_to_json(o.points)},
                {"period", o.period},
                {"multiplier", to_json(o.multiplier)},
                {"log_abs_multiplier", o.log_abs_multiplier},
                {"classification", to_string(o.classification)}};
}

inline PeriodicOrbit periodic_from_json(const RationalMap& f, const json& j)
{
    const auto& pts = j.is_object() ? j.at("points") : j;
    return make_periodic_orbit(f, points_from_json(pts));
}

inline json orbit_to_json(const OrbitRecord& r)
{
    return json{{"start", point_to_json(r.start)}, {"length", r.length()}, {"points", points_to_json(r.points)}};
}

inline json empirical_to_json(const EmpiricalSequence& s, bool with_measures)
{
    json j{{"start", point_to_json(s.start)},
           {"phase_space", to_string(s.phase)},
           {"checkpoints", s.checkpoints},
           {"coarsen_bounds", s.coarsen_bounds},
           {"coarsen_radii", s.coarsen_radii}};
    if (with_measures) {
        json m = json::array();
        for (const auto& x : s.measures)
            m.push_back(measure_to_json(x));
        j["measures"] = m;
    }
    return j;
}

inline json accumulation_to_json(const AccumulationReport& r)
{
    json clusters = json::array();
    for (const auto& c : r.cluster_centers)
        clusters.push_back(measure_to_json(c));
    return json{{"checkpoints", r.tail_checkpoints},
                {"oscillation_diameter", r.oscillation_diameter},
                {"clusters", clusters},
                {"tolerances", {{"coarsen", r.coarsen_tolerance}, {"sampling", r.sampling_tolerance}}},
                {"center_checkpoints", r.center_checkpoints},
                {"assignment", r.assignment},
                {"distance_to_center", r.distance_to_center},
                {"cluster_radius", r.cluster_radius},
                {"non_statistical", r.non_statistical}};
}

inline json law_to_json(const LawSequence& l, bool with_laws)
{
    json j{{"sampler", to_string(l.sampler.kind)},
           {"seed", l.sampler.seed},
           {"sample_count", l.sample_count},
           {"checkpoints", l.checkpoints},
           {"coarsen_tolerance", l.coarsen_tolerance},
           {"coarsen_radius", l.coarsen_radius}};
    if (with_laws) {
        json a = json::array();
        for (const auto& m : l.laws)
            a.push_back(meta_measure_to_json(m));
        j["laws"] = a;
    }
    return j;
}

inline json ek_to_json(const EkProbe& e)
{
    return json{{"checkpoints", e.checkpoints},
                {"coarsen_tolerance", e.coarsen_tolerance},
                {"diameter", e.diameter},
                {"diameter_tolerance", e.diameter_tolerance}};
}

inline json find_periodic_to_json(const FindPeriodicResult& r)
{
    json orbits = json::array();
    for (const auto& o : r.orbits)
        orbits.push_back(periodic_to_json(o));
    return json{{"orbits", orbits}, {"failed_seeds", r.failed_seeds}};
}

inline json closing_to_json(const ClosingResult& c)
{
    return json{{"offset", c.offset},
                {"length", c.length},
                {"return_distance", c.return_distance},
                {"periodic", periodic_to_json(c.periodic)},
                {"shadow_distance", c.shadow_distance},
                {"measure_gap", c.measure_gap},
                {"gap_tolerance", c.gap_tolerance}};
}

inline json transit_to_json(const TransitResult& t)
{
    return json{{"orbit", periodic_to_json(t.orbit)},
                {"gap", t.gap},
                {"gap_tolerance", t.gap_tolerance},
                {"dwell", t.dwell},
                {"dwell_fractions", t.dwell_fractions},
                {"period_fractions", t.period_fractions},
                {"transition_lengths", t.transition_lengths},
                {"near_postcritical", t.near_postcritical},
                {"shadow_distance", t.shadow_distance},
                {"epsilon", t.epsilon}};
}

inline json pcf_to_json(const PostcriticalData& d, const std::optional<PcfCertificate>& cert)
{
    json orbits = json::array();
    for (const auto& co : d.orbits) {
        json o{{"critical", point_to_json(co.critical.point)},
               {"multiplicity", co.critical.multiplicity},
               {"flag", to_string(co.flag)},
               {"landing_step", co.landing_step},
               {"landing_index", co.landing_index},
               {"landing_distance", co.landing_distance},
               {"orbit", points_to_json(co.orbit)}};
        o["cycle"] = co.cycle ? periodic_to_json(*co.cycle) : json(nullptr);
        orbits.push_back(o);
    }
    json j{{"max_steps", d.max_steps},
           {"cycle_tol", d.cycle_tol},
           {"orbits", orbits},
           {"margins",
            {{"max_multiplicity", d.margins.max_multiplicity},
             {"min_critical_separation", d.margins.min_critical_separation},
             {"min_postcritical_distance", d.margins.min_postcritical_distance}}}};
    if (cert) {
        json entries = json::array();
        for (const auto& e : cert->entries)
            entries.push_back({{"critical", point_to_json(e.critical)},
                               {"landing_step", e.landing_step},
                               {"landing_point", point_to_json(e.landing_point)},
                               {"multiplier", to_json(e.multiplier)},
                               {"log_abs_multiplier", e.log_abs_multiplier},
                               {"cycle_period", e.cycle_period}});
        j["certificate"] = {{"strictly_pcf", cert->strictly_pcf}, {"entries", entries}, {"reasons", cert->reasons}};
    } else {
        j["certificate"] = nullptr;
    }
    return j;
}

inline json transversality_to_json(const TransversalityReport& r)
{
    json rows = json::array();
    for (std::size_t i = 0; i < r.rows; ++i) {
        json row = json::array();
        for (std::size_t c = 0; c < r.cols; ++c)
            row.push_back(to_json(r.entry(i, c)));
        rows.push_back(row);
    }
    return json{{"rows", r.rows},
                {"cols", r.cols},
                {"critical_points", points_to_json(r.critical_points)},
                {"fixed_coefficient", r.fixed_coefficient},
                {"free_coefficients", r.free_coefficients},
                {"jacobian", rows},
                {"singular_values", r.singular_values},
                {"rank_estimate", r.rank_estimate},
                {"sigma_ratio", r.sigma_ratio()},
                {"step_size", r.step_size},
                {"rank_tol", r.rank_tol}};
}

inline json parabolic_solution_to_json(const ParabolicSolveResult& s)
{
    return json{{"lambda", to_json(s.lambda_star)},
                {"lambda_text", {s.lambda_text_re, s.lambda_text_im}},
                {"z", point_to_json(s.z_star)},
                {"period", s.period},
                {"residual_fixed", s.residual_fixed},
                {"residual_multiplier", s.residual_multiplier},
                {"multiplier", to_json(s.multiplier)},
                {"precision", s.precision},
                {"dwell_near_q", s.dwell_near_q},
                {"dwell_fraction", s.dwell_fraction},
                {"seed_index", s.seed_index},
                {"cycle", points_to_json(s.cycle)}};
}

inline json parabolic_to_json(const ParabolicReport& r)
{
    json sols = json::array(), fails = json::array();
    for (const auto& s : r.solutions)
        sols.push_back(parabolic_solution_to_json(s));
    for (const auto& f : r.failures)
        fails.push_back({{"seed_index", f.seed_index},
                         {"error", std::string(to_string(f.code))},
                         {"message", f.message},
                         {"lambda", to_json(f.lambda)},
                         {"z", point_to_json(f.z)},
                         {"minimal_period", f.minimal_period},
                         {"condition", f.condition}});
    return json{{"solutions", sols}, {"failures", fails}};
}

inline json preperiodic_to_json(const PreperiodicResult& r)
{
    json roots = json::array();
    for (const auto& x : r.roots)
        roots.push_back({{"lambda", to_json(x.lambda)},
                         {"residual", x.residual},
                         {"landing_distance", x.landing_distance},
                         {"derivative", to_json(x.derivative)},
                         {"critical", point_to_json(x.critical)},
                         {"target_point", point_to_json(x.target_point)}});
    return json{{"roots", roots}, {"starts", r.starts}, {"failed_starts", r.failed_starts}};
}

inline json scenario_to_json(const ScenarioReport& r)
{
    if (r.empty)
        return json{{"empty", true}, {"levels", json::array()}};
    std::vector<double> row_abs;
    for (const auto& v : r.constraint_row_values)
        row_abs.push_back(std::abs(v));
    json levels = json::array();
    for (const auto& l : r.levels) {
        json o{{"dwell", l.dwell}, {"period", l.period}, {"solved", l.solved}};
        if (l.solved) {
            o["solution"] = parabolic_solution_to_json(l.solution);
            o["measure_to_target"] = l.measure_to_target;
            o["constraint_residuals"] = l.constraint_residuals;
            o["center_offset"] = l.center_lambda_abs;
        } else {
            o["error"] = l.error;
        }
        levels.push_back(o);
    }
    json diag = nullptr;
    if (r.diagnostics.run) {
        const auto& d = r.diagnostics;
        diag = {{"level", d.level},
                {"starts", d.starts},
                {"checkpoints", d.checkpoints},
                {"near_threshold", d.near_threshold},
                {"fraction_near", d.fraction_near},
                {"nearest_center_distance", d.nearest_center_distance},
                {"oscillation_diameter", d.oscillation_diameter}};
    }
    return json{
        {"empty", false},
        {"failed_stage", r.failed_stage.empty() ? json(nullptr) : json(r.failed_stage)},
        {"error", r.error.empty() ? json(nullptr) : json(r.error)},
        {"family",
         {{"critical_index", r.critical_index},
          {"landing_steps", r.landing_steps},
          {"direction", complex_list_to_json(r.direction)},
          {"target_row_value", to_json(r.target_row_value)},
          {"constraint_row_values", complex_list_to_json(r.constraint_row_values)},
          {"constraint_row_abs", row_abs},
          {"jacobian_singular_values", r.jacobian_singular_values},
          {"radius", r.family_radius}}},
        {"preperiodic",
         {{"lambda", to_json(r.lambda_star)},
          {"residual", r.lambda_star_residual},
          {"derivative", to_json(r.lambda_star_derivative)},
          {"roots_found", r.preperiodic_roots}}},
        {"returns",
         {{"c_tilde", point_to_json(r.c_tilde)},
          {"c_tilde_depth", r.c_tilde_depth},
          {"transit_steps", r.transit_steps},
          {"linearization_radius", r.linearization_radius},
          {"levels", levels}}},
        {"diagnostics", diag}};
}

inline json probe_to_json(const BifurcationProbeReport& r)
{
    json entries = json::array();
    for (const auto& e : r.entries)
        entries.push_back({{"parameter", to_json(e.parameter)},
                           {"checkpoint", e.checkpoint},
                           {"coarsen_tolerance", e.coarsen_tolerance},
                           {"cluster", e.cluster},
                           {"distance_to_target", e.distance_to_target}});
    return json{{"label", r.label},
                {"parameters", complex_list_to_json(r.parameters)},
                {"targets", r.targets.size()},
                {"discovered_targets", r.discovered_targets},
                {"cluster_threshold", r.cluster_threshold},
                {"entries", entries}};
}

} // namespace nsdyn

#endif
