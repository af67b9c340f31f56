#ifndef NSDYN_CLI_HPP
#define NSDYN_CLI_HPP

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "bifurcation.hpp"
#include "json_io.hpp"
#include "measures.hpp"
#include "orbitstat.hpp"
#include "periodic.hpp"
#include "postcritical.hpp"

namespace nsdyn {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_numerical = 2, exit_undecided = 3 };

inline const std::vector<std::string>& subcommands()
{
    static const std::vector<std::string> s{"orbit", "empirical", "law",       "periodic", "close", "transit",
                                            "pcf",   "rank",      "parabolic", "scenario", "probe"};
    return s;
}

inline std::string usage()
{
    std::string u = "usage: nsdyn <subcommand> --config <file.json> [--seed N] [--workers N] [--output file] "
                    "[--csv file]\nsubcommands:";
    for (const auto& s : subcommands())
        u += " " + s;
    return u;
}

/// Thrown for malformed configs; maps to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Execution settings that never enter a report (results do not depend on them).
struct RunEnvironment {
    unsigned workers = 0; ///< 0: NSDYN_WORKERS, else 1
};

struct RunResult {
    int exit_code = exit_ok;
    json output;       ///< envelope on success or partial success
    json error;        ///< error object (null when none)
};

namespace detail {

inline const json& need(const json& cfg, const char* key)
{
    if (!cfg.contains(key))
        throw ConfigError(std::string("missing config field '") + key + "'\n" + usage());
    return cfg.at(key);
}

template <class T>
T opt(const json& cfg, const char* key, T fallback)
{
    if (!cfg.contains(key))
        return fallback;
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

inline std::vector<std::size_t> checkpoints_from(const json& cfg)
{
    if (cfg.contains("checkpoints"))
        return cfg.at("checkpoints").get<std::vector<std::size_t>>();
    return geometric_checkpoints(opt<std::size_t>(cfg, "first_checkpoint", 10),
                                 opt<std::size_t>(cfg, "last_checkpoint", 1000),
                                 opt<std::size_t>(cfg, "checkpoint_factor", 2));
}

inline ErrorCode error_code_of(const std::exception& e, int& exit)
{
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        switch (err->code()) {
        case ErrorCode::invalid_argument:
        case ErrorCode::unsupported_format: exit = exit_usage; break;
        case ErrorCode::undecidable: exit = exit_undecided; break;
        default: exit = exit_numerical;
        }
        return err->code();
    }
    exit = exit_usage;
    return ErrorCode::invalid_argument;
}

inline json run_orbit(const json& c, const RunEnvironment&)
{
    const auto f = map_from_json(need(c, "map"));
    return orbit_to_json(iterate_orbit(f, point_from_json(need(c, "start")), need(c, "n").get<std::size_t>()));
}

inline json run_empirical(const json& c, const RunEnvironment&)
{
    const auto f = map_from_json(need(c, "map"));
    EmpiricalOptions eo;
    eo.phase = phase_space_from_string(opt<std::string>(c, "phase_space", "automatic"));
    eo.coarsen_to = opt<std::size_t>(c, "coarsen_to", 256);
    const auto seq = empirical_sequence(f, point_from_json(need(c, "start")), checkpoints_from(c), eo);
    json out{{"sequence", empirical_to_json(seq, opt<bool>(c, "include_measures", false))}};
    const double tail = opt<double>(c, "tail_fraction", 0.5);
    const double radius = opt<double>(c, "cluster_radius", 0.05);
    out["accumulation"] = accumulation_to_json(accumulation_report(seq, tail, radius, {eo.coarsen_to, 1, 0}));
    return out;
}

inline json run_law(const json& c, const RunEnvironment& env)
{
    const auto f = map_from_json(need(c, "map"));
    const auto seed = opt<std::uint64_t>(c, "seed", 0);
    LawParams p;
    p.sampler = sampler_from_json(c.contains("sampler") ? c.at("sampler") : json("spherical_area_uniform"), seed);
    p.sample_count = opt<std::size_t>(c, "sample_count", 16);
    p.coarsen_to = opt<std::size_t>(c, "coarsen_to", 64);
    p.first_checkpoint = opt<std::size_t>(c, "first_checkpoint", 10);
    p.grid_factor = opt<std::size_t>(c, "checkpoint_factor", 2);
    p.workers = env.workers;
    p.phase = phase_space_from_string(opt<std::string>(c, "phase_space", "automatic"));
    const auto law = law_sequence(f, p.sampler, p.sample_count, checkpoints_from(c), p.coarsen_to, {p.workers, p.phase});
    json out{{"law", law_to_json(law, opt<bool>(c, "include_laws", false))}};
    std::vector<double> consecutive;
    for (std::size_t j = 1; j < law.laws.size(); ++j)
        consecutive.push_back(meta_wasserstein(law.laws[j - 1], law.laws[j], p.workers));
    out["consecutive_meta_distance"] = consecutive;
    if (c.contains("k")) {
        const auto k = c.at("k").get<std::size_t>();
        out["ek"] = ek_to_json(finite_Ek_probe(f, k, need(c, "horizon").get<std::size_t>(), p));
    }
    return out;
}

inline json run_periodic(const json& c, const RunEnvironment& env)
{
    const auto f = map_from_json(need(c, "map"));
    FindPeriodicOptions o;
    o.workers = env.workers;
    o.seed = opt<std::uint64_t>(c, "seed", 0);
    o.include_divisors = opt<bool>(c, "include_divisors", false);
    std::vector<SpherePoint> seeds;
    if (c.contains("seeds"))
        seeds = points_from_json(c.at("seeds"));
    o.exhaustive = opt<bool>(c, "exhaustive", seeds.empty());
    return find_periodic_to_json(find_periodic(f, need(c, "period").get<int>(), seeds, o));
}

inline json run_close(const json& c, const RunEnvironment& env)
{
    const auto f = map_from_json(need(c, "map"));
    const auto horizon = need(c, "horizon").get<std::size_t>();
    const double tol = opt<double>(c, "return_tol", 1e-3);
    ClosingOptions co;
    co.coarsen_to = opt<std::size_t>(c, "coarsen_to", 256);
    std::vector<SpherePoint> starts;
    if (c.contains("start"))
        starts.push_back(point_from_json(c.at("start")));
    else
        starts = sample_reference(sampler_from_json(c.contains("sampler") ? c.at("sampler")
                                                                          : json("spherical_area_uniform"),
                                                    opt<std::uint64_t>(c, "seed", 0)),
                                  need(c, "starts").get<std::size_t>());
    std::vector<json> rows(starts.size());
    parallel_for(starts.size(), env.workers, [&](std::size_t i) {
        json r{{"start", point_to_json(starts[i])}};
        try {
            r["result"] = closing_to_json(close_orbit(f, iterate_orbit(f, starts[i], horizon), tol, co));
        } catch (const Error& e) {
            r["result"] = nullptr;
            r["error"] = std::string(to_string(e.code()));
            r["message"] = e.what();
        }
        rows[i] = std::move(r);
    });
    std::size_t ok = 0;
    for (const auto& r : rows)
        ok += r.at("result").is_null() ? 0 : 1;
    return json{{"results", rows}, {"closed", ok}, {"starts", starts.size()}};
}

inline json run_transit(const json& c, const RunEnvironment&)
{
    const auto f = map_from_json(need(c, "map"));
    std::vector<PeriodicOrbit> targets;
    for (const auto& t : need(c, "targets"))
        targets.push_back(periodic_from_json(f, t));
    TransitOptions o;
    o.coarsen_to = opt<std::size_t>(c, "coarsen_to", 256);
    return transit_to_json(transit_periodic(f, targets, need(c, "coefficients").get<std::vector<double>>(),
                                            need(c, "dwell_budget").get<int>(), o));
}

inline json run_pcf(const json& c, const RunEnvironment&, int& exit)
{
    const auto f = map_from_json(need(c, "map"));
    const auto data = postcritical_scan(f, opt<int>(c, "max_steps", 64), opt<double>(c, "cycle_tol", 1e-6));
    std::optional<PcfCertificate> cert;
    try {
        cert = is_strictly_pcf(data);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::undecidable)
            throw;
        exit = exit_undecided;
    }
    return pcf_to_json(data, cert);
}

inline json run_rank(const json& c, const RunEnvironment&)
{
    const auto f = map_from_json(need(c, "map"));
    const auto data = postcritical_scan(f, opt<int>(c, "max_steps", 64));
    TransversalityOptions o;
    o.rank_tol = opt<double>(c, "rank_tol", 1e-8);
    return transversality_to_json(transversality_rank(f, data, opt<double>(c, "step", 1e-5), o));
}

inline json run_parabolic(const json& c, const RunEnvironment& env, int& exit)
{
    const auto fam = family_from_json(need(c, "family"));
    std::vector<std::pair<std::complex<double>, SpherePoint>> seeds;
    for (const auto& s : need(c, "seeds"))
        seeds.emplace_back(complex_from_json(need(s, "lambda")), point_from_json(need(s, "z")));
    ParabolicOptions o;
    o.workers = env.workers;
    if (c.contains("companion"))
        o.companion = periodic_from_json(fam.base, c.at("companion"));
    const auto rep = solve_parabolic(fam, need(c, "period").get<int>(), seeds, o);
    if (rep.solutions.empty())
        exit = exit_numerical;
    return parabolic_to_json(rep);
}

inline ScenarioBudgets budgets_from(const json& c, const RunEnvironment& env)
{
    ScenarioBudgets b;
    b.levels = opt(c, "levels", b.levels);
    b.first_dwell = opt(c, "first_dwell", b.first_dwell);
    b.dwell_increment = opt(c, "dwell_increment", b.dwell_increment);
    b.family_radius = opt(c, "family_radius", b.family_radius);
    b.preperiodic_grid = opt(c, "preperiodic_grid", b.preperiodic_grid);
    b.fd_step = opt(c, "fd_step", b.fd_step);
    b.pcf_steps = opt(c, "pcf_steps", b.pcf_steps);
    b.stat_starts = opt(c, "stat_starts", b.stat_starts);
    b.stat_horizon = opt(c, "stat_horizon", b.stat_horizon);
    b.stat_first_checkpoint = opt(c, "stat_first_checkpoint", b.stat_first_checkpoint);
    b.stat_coarsen_to = opt(c, "stat_coarsen_to", b.stat_coarsen_to);
    b.cluster_radius = opt(c, "cluster_radius", b.cluster_radius);
    b.near_threshold = opt(c, "near_threshold", b.near_threshold);
    b.seed = opt<std::uint64_t>(c, "seed", 0);
    b.workers = env.workers;
    return b;
}

inline json run_scenario(const json& c, const RunEnvironment& env, int& exit)
{
    const auto f = map_from_json(need(c, "map"));
    const auto target = periodic_from_json(f, need(c, "target"));
    const auto rep = scenario_driver(f, target, budgets_from(c, env));
    if (!rep.failed_stage.empty())
        exit = exit_numerical;
    return scenario_to_json(rep);
}

inline json run_probe(const json& c, const RunEnvironment& env)
{
    const auto fam = family_from_json(need(c, "family"));
    const auto seed = opt<std::uint64_t>(c, "seed", 0);
    LawParams p;
    p.sampler = sampler_from_json(c.contains("sampler") ? c.at("sampler") : json("spherical_area_uniform"), seed);
    p.sample_count = opt<std::size_t>(c, "sample_count", 8);
    p.coarsen_to = opt<std::size_t>(c, "coarsen_to", 32);
    p.workers = env.workers;
    ProbeOptions po;
    po.seed = seed;
    po.cluster_threshold = opt<double>(c, "cluster_threshold", 0.0);
    if (c.contains("targets"))
        for (const auto& t : c.at("targets"))
            po.targets.push_back(meta_measure_from_json(t));
    const auto center = c.contains("center") ? complex_from_json(c.at("center")) : std::complex<double>(0);
    return probe_to_json(bifurcation_probe(fam, center, opt<double>(c, "radius", fam.domain_radius),
                                           opt<std::size_t>(c, "probes", 4), checkpoints_from(c), p, po));
}

} // namespace detail

/// Runs one subcommand on a resolved config. Never throws; failures come back as an
/// error object and exit code (1 usage/config, 2 numerical, 3 undecided).
inline RunResult run(const std::string& subcommand, const json& config, const RunEnvironment& env = {})
{
    RunResult res;
    res.error = nullptr;
    try {
        if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end())
            throw ConfigError("unknown subcommand '" + subcommand + "'\n" + usage());
        if (!config.is_object() || config.empty())
            throw ConfigError("empty config\n" + usage());
        json resolved = config;
        resolved.erase("workers");
        resolved.erase("output");
        int exit = exit_ok;
        json result;
        if (subcommand == "orbit")
            result = detail::run_orbit(resolved, env);
        else if (subcommand == "empirical")
            result = detail::run_empirical(resolved, env);
        else if (subcommand == "law")
            result = detail::run_law(resolved, env);
        else if (subcommand == "periodic")
            result = detail::run_periodic(resolved, env);
        else if (subcommand == "close")
            result = detail::run_close(resolved, env);
        else if (subcommand == "transit")
            result = detail::run_transit(resolved, env);
        else if (subcommand == "pcf")
            result = detail::run_pcf(resolved, env, exit);
        else if (subcommand == "rank")
            result = detail::run_rank(resolved, env);
        else if (subcommand == "parabolic")
            result = detail::run_parabolic(resolved, env, exit);
        else if (subcommand == "scenario")
            result = detail::run_scenario(resolved, env, exit);
        else
            result = detail::run_probe(resolved, env);
        res.exit_code = exit;
        res.output = json{{"schema_version", schema_version},
                          {"tool_version", tool_version},
                          {"subcommand", subcommand},
                          {"config_hash", config_hash(resolved)},
                          {"config", resolved},
                          {"result", result}};
    } catch (const ConfigError& e) {
        res.exit_code = exit_usage;
        res.error = {{"error", "ConfigError"}, {"message", e.what()}, {"exit_code", exit_usage}};
    } catch (const json::exception& e) {
        res.exit_code = exit_usage;
        res.error = {{"error", "ConfigError"}, {"message", e.what()}, {"exit_code", exit_usage}};
    } catch (const std::exception& e) {
        int exit = exit_numerical;
        const auto code = detail::error_code_of(e, exit);
        res.exit_code = exit;
        res.error = {{"error", std::string(to_string(code))}, {"message", e.what()}, {"exit_code", exit}};
    }
    return res;
}

namespace detail {

inline std::string csv_num(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string csv_num(const json& v)
{
    if (v.is_null())
        return "";
    if (v.is_boolean())
        return v.get<bool>() ? "1" : "0";
    if (v.is_number_integer() || v.is_number_unsigned())
        return v.dump();
    if (v.is_number())
        return csv_num(v.get<double>());
    if (v.is_string())
        return v.get<std::string>();
    return v.dump();
}

inline std::string point_cols(const json& p)
{
    if (p.is_string())
        return "inf,inf";
    return csv_num(p[0]) + "," + csv_num(p[1]);
}

struct CsvWriter {
    std::ostringstream os;
    explicit CsvWriter(const char* header) { os << header << "\n"; }
    template <class... T>
    void row(const T&... cols)
    {
        bool first = true;
        ((os << (first ? "" : ",") << cols, first = false), ...);
        os << "\n";
    }
};

} // namespace detail

/// Column headers of the CSV emitted for each subcommand.
inline const char* csv_header(const std::string& subcommand)
{
    if (subcommand == "orbit") return "index,re,im";
    if (subcommand == "empirical") return "checkpoint,center,distance_to_center,oscillation_diameter";
    if (subcommand == "law") return "checkpoint,coarsen_tolerance,coarsen_radius";
    if (subcommand == "periodic") return "orbit,period,multiplier_re,multiplier_im,log_abs_multiplier,classification";
    if (subcommand == "close") return "start,length,return_distance,shadow_distance,measure_gap,gap_tolerance";
    if (subcommand == "transit") return "target,dwell,dwell_fraction,period_fraction";
    if (subcommand == "pcf") return "critical_re,critical_im,flag,landing_step,multiplier_re,multiplier_im";
    if (subcommand == "rank") return "index,singular_value";
    if (subcommand == "parabolic")
        return "lambda_re,lambda_im,z_re,z_im,period,residual_fixed,residual_multiplier";
    if (subcommand == "scenario")
        return "dwell,period,solved,lambda_re,lambda_im,dwell_fraction,measure_to_target";
    if (subcommand == "probe") return "parameter_re,parameter_im,checkpoint,cluster,d_w_to_target";
    fail(ErrorCode::invalid_argument, "unknown subcommand '" + subcommand + "'");
}

/// Plot data for a completed report envelope (or a bare result object). Only "csv".
inline std::string emit_plot_data(const std::string& subcommand, const json& report, const std::string& format = "csv")
{
    if (format != "csv")
        fail(ErrorCode::unsupported_format, "unsupported plot format '" + format + "' (only csv)");
    detail::CsvWriter w(csv_header(subcommand));
    const json& r = report.contains("result") ? report.at("result") : report;
    using detail::csv_num;
    auto arr = [&](const json& o, const char* key) -> const json& {
        static const json empty = json::array();
        return (o.is_object() && o.contains(key) && o.at(key).is_array()) ? o.at(key) : empty;
    };
    if (subcommand == "orbit") {
        const auto& pts = arr(r, "points");
        for (std::size_t i = 0; i < pts.size(); ++i)
            w.row(i, detail::point_cols(pts[i]));
    } else if (subcommand == "empirical") {
        if (r.contains("accumulation")) {
            const auto& a = r.at("accumulation");
            const auto& cps = arr(a, "checkpoints");
            for (std::size_t i = 0; i < cps.size(); ++i)
                w.row(csv_num(cps[i]), csv_num(a.at("assignment")[i]), csv_num(a.at("distance_to_center")[i]),
                      csv_num(a.at("oscillation_diameter")));
        }
    } else if (subcommand == "law") {
        if (r.contains("law")) {
            const auto& l = r.at("law");
            const auto& cps = arr(l, "checkpoints");
            for (std::size_t i = 0; i < cps.size(); ++i)
                w.row(csv_num(cps[i]), csv_num(l.at("coarsen_tolerance")[i]), csv_num(l.at("coarsen_radius")[i]));
        }
    } else if (subcommand == "periodic") {
        const auto& o = arr(r, "orbits");
        for (std::size_t i = 0; i < o.size(); ++i)
            w.row(i, csv_num(o[i].at("period")), csv_num(o[i].at("multiplier")[0]),
                  csv_num(o[i].at("multiplier")[1]), csv_num(o[i].at("log_abs_multiplier")),
                  csv_num(o[i].at("classification")));
    } else if (subcommand == "close") {
        const auto& rows = arr(r, "results");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& x = rows[i].at("result");
            if (x.is_null())
                continue;
            w.row(i, csv_num(x.at("length")), csv_num(x.at("return_distance")), csv_num(x.at("shadow_distance")),
                  csv_num(x.at("measure_gap")), csv_num(x.at("gap_tolerance")));
        }
    } else if (subcommand == "transit") {
        const auto& d = arr(r, "dwell");
        for (std::size_t i = 0; i < d.size(); ++i)
            w.row(i, csv_num(d[i]), csv_num(r.at("dwell_fractions")[i]), csv_num(r.at("period_fractions")[i]));
    } else if (subcommand == "pcf") {
        for (const auto& o : arr(r, "orbits")) {
            std::string m = ",";
            if (o.at("cycle").is_object())
                m = csv_num(o.at("cycle").at("multiplier")[0]) + "," + csv_num(o.at("cycle").at("multiplier")[1]);
            w.row(detail::point_cols(o.at("critical")), csv_num(o.at("flag")), csv_num(o.at("landing_step")), m);
        }
    } else if (subcommand == "rank") {
        const auto& s = arr(r, "singular_values");
        for (std::size_t i = 0; i < s.size(); ++i)
            w.row(i, csv_num(s[i]));
    } else if (subcommand == "parabolic") {
        for (const auto& s : arr(r, "solutions"))
            w.row(csv_num(s.at("lambda")[0]), csv_num(s.at("lambda")[1]), detail::point_cols(s.at("z")),
                  csv_num(s.at("period")), csv_num(s.at("residual_fixed")), csv_num(s.at("residual_multiplier")));
    } else if (subcommand == "scenario") {
        const json& lv = r.contains("returns") ? arr(r.at("returns"), "levels") : arr(r, "levels");
        for (const auto& l : lv) {
            if (l.at("solved").get<bool>()) {
                const auto& s = l.at("solution");
                w.row(csv_num(l.at("dwell")), csv_num(l.at("period")), 1, csv_num(s.at("lambda")[0]),
                      csv_num(s.at("lambda")[1]), csv_num(s.at("dwell_fraction")), csv_num(l.at("measure_to_target")));
            } else {
                w.row(csv_num(l.at("dwell")), csv_num(l.at("period")), 0, "", "", "", "");
            }
        }
    } else if (subcommand == "probe") {
        for (const auto& e : arr(r, "entries"))
            w.row(csv_num(e.at("parameter")[0]), csv_num(e.at("parameter")[1]), csv_num(e.at("checkpoint")),
                  csv_num(e.at("cluster")), csv_num(e.at("distance_to_target")));
    }
    return w.os.str();
}

} // namespace nsdyn

#endif
