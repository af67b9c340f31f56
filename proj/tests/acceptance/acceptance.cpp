// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nsdyn/nsdyn.hpp>

using namespace nsdyn;
using C = std::complex<double>;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, double limit_seconds, const std::function<Outcome()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > limit_seconds) {
        o.pass = false;
        o.detail += " (runtime over budget)";
    }
    if (!o.pass)
        ++failures;
    std::printf("%s criterion %d %s: %s [%.2f s / %.0f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
                o.detail.c_str(), secs, limit_seconds);
    std::fflush(stdout);
}

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

RationalMap square() { return RationalMap({0, 0, 1}, {1, 0, 0}); }
RationalMap lattes() { return RationalMap({-2, 0, 1}, {0, 0, 1}); }
SpherePoint pt(C z) { return SpherePoint::finite(z); }

json fixture(const std::string& name)
{
    std::ifstream in(std::string(NSDYN_FIXTURES) + "/" + name);
    return json::parse(in);
}

SpherePoint random_point(std::mt19937_64& rng)
{
    return sample_one({SamplerKind::spherical_area_uniform, rng(), {}}, 0);
}

DiscreteMeasure random_measure(std::mt19937_64& rng, std::size_t n, bool equal_weights)
{
    std::vector<SpherePoint> pts;
    std::vector<double> w;
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        pts.push_back(random_point(rng));
        w.push_back(equal_weights ? 1.0 : u(rng));
    }
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w)
        x /= s;
    if (equal_weights)
        return DiscreteMeasure::uniform(pts);
    return DiscreteMeasure(pts, w);
}

// ---------------------------------------------------------------------------
// criterion bodies that criterion 13 reruns with another worker count

json ergodic_fixture(unsigned workers, std::size_t& good)
{
    std::vector<SpherePoint> u;
    for (int k = 0; k < 256; ++k)
        u.push_back(pt(std::polar(1.0, 2 * std::numbers::pi * (k + 0.5) / 256)));
    const auto U = DiscreteMeasure::uniform(u);
    const auto starts = sample_reference({SamplerKind::unit_circle_uniform, 5, {}}, 100);
    std::vector<double> dist(starts.size()), tol(starts.size());
    parallel_for(starts.size(), workers, [&](std::size_t i) {
        const auto e = empirical_sequence(square(), starts[i], {100000}, {PhaseSpace::automatic, 256});
        dist[i] = wasserstein(e.measures[0], U);
        tol[i] = e.coarsen_bounds[0];
    });
    good = 0;
    json rows = json::array();
    for (std::size_t i = 0; i < starts.size(); ++i) {
        good += dist[i] + tol[i] < 0.05;
        rows.push_back({{"start", point_to_json(starts[i])}, {"distance", dist[i]}, {"tolerance", tol[i]}});
    }
    return rows;
}

json closing_fixture(unsigned workers, std::size_t& produced, std::size_t& violations)
{
    const auto starts = sample_reference({SamplerKind::spherical_area_uniform, 11, {}}, 50);
    std::vector<std::optional<ClosingResult>> res(starts.size());
    std::vector<std::string> err(starts.size());
    parallel_for(starts.size(), workers, [&](std::size_t i) {
        try {
            res[i] = close_orbit(lattes(), iterate_orbit(lattes(), starts[i], 2000), 1e-3);
        } catch (const Error& e) {
            err[i] = e.what();
        }
    });
    produced = violations = 0;
    json rows = json::array();
    for (std::size_t i = 0; i < starts.size(); ++i) {
        if (!res[i]) {
            rows.push_back({{"error", err[i]}});
            continue;
        }
        ++produced;
        violations += !(res[i]->measure_gap <= res[i]->shadow_distance + res[i]->gap_tolerance);
        auto j = closing_to_json(*res[i]);
        j.erase("source_orbit");
        rows.push_back(j);
    }
    return rows;
}

ScenarioReport scenario_fixture(unsigned workers)
{
    ScenarioBudgets b;
    b.seed = 7;
    b.workers = workers;
    return scenario_driver(lattes(), make_periodic_orbit(lattes(), {pt(-1)}), b);
}

} // namespace

int main()
{
    report(1, "transport exactness", 10, [] {
        std::mt19937_64 rng(1);
        double worst = 0;
        for (int t = 0; t < 500; ++t) {
            const std::size_t n = 1 + rng() % 8;
            const auto a = random_measure(rng, n, true), b = random_measure(rng, n, true);
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            double best = 1e300;
            do {
                double c = 0;
                for (std::size_t i = 0; i < n; ++i)
                    c += chordal_distance(a.atoms()[i], b.atoms()[perm[i]]);
                best = std::min(best, c / double(n));
            } while (std::next_permutation(perm.begin(), perm.end()));
            worst = std::max(worst, std::abs(wasserstein(a, b) - best));
        }
        return Outcome{worst <= 1e-10, "max |W1 - permutation minimum| = " + fmt(worst)};
    });

    report(2, "metric axioms", 30, [] {
        std::mt19937_64 rng(2);
        double sym = 0, tri = 0;
        for (int t = 0; t < 200; ++t) {
            DiscreteMeasure m[3] = {random_measure(rng, 1 + rng() % 12, false),
                                    random_measure(rng, 1 + rng() % 12, false),
                                    random_measure(rng, 1 + rng() % 12, false)};
            const double ab = wasserstein(m[0], m[1]), ba = wasserstein(m[1], m[0]);
            const double bc = wasserstein(m[1], m[2]), ac = wasserstein(m[0], m[2]);
            sym = std::max(sym, std::abs(ab - ba));
            tri = std::max(tri, ac - (ab + bc));
            auto meta = [&] {
                std::vector<DiscreteMeasure> atoms;
                const std::size_t k = 1 + rng() % 4;
                for (std::size_t i = 0; i < k; ++i)
                    atoms.push_back(random_measure(rng, 1 + rng() % 5, false));
                return MetaMeasure::uniform(atoms);
            };
            const MetaMeasure M[3] = {meta(), meta(), meta()};
            const double AB = meta_wasserstein(M[0], M[1]), BA = meta_wasserstein(M[1], M[0]);
            const double BC = meta_wasserstein(M[1], M[2]), AC = meta_wasserstein(M[0], M[2]);
            sym = std::max(sym, std::abs(AB - BA));
            tri = std::max(tri, AC - (AB + BC));
        }
        return Outcome{sym <= 1e-9 && tri <= 1e-9,
                       "max asymmetry " + fmt(sym) + ", max triangle excess " + fmt(tri)};
    });

    report(3, "strictly-pcf certificate", 1, [] {
        const auto r = run("pcf", fixture("pcf_lattes.json"), {});
        const auto& cert = r.output["result"]["certificate"];
        bool ok = r.exit_code == 0 && cert["strictly_pcf"].get<bool>() && cert["entries"].size() == 2;
        for (const auto& e : cert["entries"]) {
            const auto m = complex_from_json(e["multiplier"]);
            const auto p = point_from_json(e["landing_point"]);
            ok = ok && std::abs(m - C(-4)) <= 1e-8 && chordal_distance(p, pt(-1)) < 1e-8;
        }
        const auto sq = run("pcf", fixture("pcf_square.json"), {});
        ok = ok && sq.exit_code == 0 && !sq.output["result"]["certificate"]["strictly_pcf"].get<bool>();
        return Outcome{ok, "lattes verdict " + cert["strictly_pcf"].dump() + ", z^2 verdict " +
                               sq.output["result"]["certificate"]["strictly_pcf"].dump()};
    });

    report(4, "repelling-only cycles", 60, [] {
        FindPeriodicOptions opt;
        opt.exhaustive = true;
        double least = 1e300;
        std::size_t cycles = 0, expected = 0;
        // cycles of exact period P of a degree-2 map, by Moebius inversion of 2^P + 1
        const std::size_t exact_points[] = {0, 3, 2, 6, 12, 30, 54};
        for (int P = 1; P <= 6; ++P) {
            const auto r = find_periodic(lattes(), P, {}, opt);
            cycles += r.orbits.size();
            expected += exact_points[P] / static_cast<std::size_t>(P);
            for (const auto& o : r.orbits)
                least = std::min(least, std::abs(o.multiplier));
        }
        return Outcome{least > 1 + 1e-6 && cycles == expected,
                       std::to_string(cycles) + "/" + std::to_string(expected) +
                           " cycles, min |multiplier| = " + fmt(least)};
    });

    std::size_t good5 = 0;
    json rep5;
    report(5, "ergodic convergence", 120, [&] {
        rep5 = ergodic_fixture(1, good5);
        return Outcome{good5 >= 95, std::to_string(good5) + "/100 starts within 0.05"};
    });

    report(6, "identity-law constancy", 60, [] {
        const auto id = RationalMap::degree_one_fixture({0, 1}, {1, 0});
        const auto l = law_sequence(id, {SamplerKind::spherical_area_uniform, 3, {}}, 32, {10, 100, 1000}, 64);
        double worst = 0, slack = 1e300;
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = a + 1; b < 3; ++b) {
                const double d = meta_wasserstein(l.laws[a], l.laws[b]);
                const double tol = l.coarsen_tolerance[a] + l.coarsen_tolerance[b];
                worst = std::max(worst, d);
                slack = std::min(slack, tol - d);
            }
        return Outcome{slack >= 0, "max meta distance " + fmt(worst) + ", min slack to tolerance " + fmt(slack)};
    });

    std::size_t produced7 = 0, viol7 = 0;
    json rep7;
    report(7, "closing lemma", 300, [&] {
        rep7 = closing_fixture(1, produced7, viol7);
        return Outcome{produced7 >= 30 && viol7 == 0,
                       std::to_string(produced7) + "/50 closed, " + std::to_string(viol7) + " gap violations"};
    });

    report(8, "convex-combination transit", 120, [] {
        const auto w = std::polar(1.0, 2 * std::numbers::pi / 3);
        const auto a = make_periodic_orbit(square(), {pt(1)});
        const auto b = make_periodic_orbit(square(), {pt(w), pt(w * w)});
        const auto r = transit_periodic(square(), {a, b}, {0.5, 0.5}, 200);
        const auto goal = mixture({DiscreteMeasure::uniform(a.points), DiscreteMeasure::uniform(b.points)}, {0.5, 0.5});
        const double d = wasserstein(DiscreteMeasure::uniform(r.orbit.points), goal);
        return Outcome{d < 0.1, "period " + std::to_string(r.orbit.period) + ", d_w = " + fmt(d)};
    });

    report(9, "parabolic ground truth", 5, [] {
        const auto fam = FamilySpec::builtin("quadratic", 1.0);
        const auto p1 = solve_parabolic(fam, 1, {{C(0.2, 0.01), pt(0.45)}});
        const auto p2 = solve_parabolic(fam, 2, {{C(-0.74, 0), pt(-0.45)}});
        bool ok = p1.solutions.size() == 1;
        std::string d;
        if (ok) {
            const auto& s = p1.solutions.front();
            ok = std::abs(s.lambda_star - C(0.25)) < 1e-6 && chordal_distance(s.z_star, pt(0.5)) < 1e-6 &&
                 s.residual_fixed < 1e-12 && s.residual_multiplier < 1e-12;
            d = "P1 residuals " + fmt(s.residual_fixed) + ", " + fmt(s.residual_multiplier);
        }
        const bool degenerate = p2.solutions.empty() && p2.failures.size() == 1 &&
                                p2.failures.front().code == ErrorCode::exact_period_failure;
        return Outcome{ok && degenerate, d + "; P2 at -3/4 " +
                                             (degenerate ? "reported as exact-period failure" : "not detected")};
    });

    report(10, "Misiurewicz solve", 5, [] {
        const auto fam = FamilySpec::builtin("quadratic", 2.5);
        const auto r = solve_preperiodic(fam, 0, 2, make_periodic_orbit(fam.base, {pt(1)}));
        const double err = std::abs(r.roots.front().lambda - C(-2));
        return Outcome{err <= 1e-9, "lambda error " + fmt(err)};
    });

    report(11, "transversality rank", 30, [] {
        const auto d = postcritical_scan(lattes(), 64);
        const auto a = transversality_rank(lattes(), d, 1e-5);
        const auto b = transversality_rank(lattes(), d, 5e-6);
        const double ratio = a.singular_values.size() > 1 ? a.singular_values[1] / a.singular_values[0] : 0;
        return Outcome{a.rank_estimate == 2 && ratio > 1e-4 && b.rank_estimate == a.rank_estimate,
                       "rank " + std::to_string(a.rank_estimate) + " (halved step " +
                           std::to_string(b.rank_estimate) + "), sigma2/sigma1 = " + fmt(ratio)};
    });

    json rep12;
    report(12, "end-to-end scenario", 1800, [&] {
        const auto r = scenario_fixture(1);
        rep12 = scenario_to_json(r);
        if (!r.failed_stage.empty())
            return Outcome{false, "stage " + r.failed_stage + " failed: " + r.error};
        bool certified = r.lambda_star_residual < 1e-8;
        double best = 1e300;
        for (const auto& lv : r.levels)
            if (lv.solved) {
                certified = certified && lv.solution.residual_fixed < 1e-8 && lv.solution.residual_multiplier < 1e-8;
                best = std::min(best, lv.measure_to_target);
            }
        const bool stage_d = r.diagnostics.run && r.diagnostics.fraction_near >= 0.8;
        return Outcome{certified && best < 0.2 && stage_d,
                       "best cycle measure distance " + fmt(best) + ", stage (d) share near " +
                           fmt(r.diagnostics.fraction_near) + " (needs 0.8)"};
    });

    report(13, "determinism across workers", 1800, [&] {
        std::size_t g = 0, p = 0, v = 0;
        const bool same5 = ergodic_fixture(4, g).dump() == rep5.dump();
        const bool same7 = closing_fixture(4, p, v).dump() == rep7.dump();
        const bool same12 = scenario_to_json(scenario_fixture(4)).dump() == rep12.dump();
        return Outcome{same5 && same7 && same12, std::string("criterion 5 ") + (same5 ? "identical" : "differs") +
                                                     ", 7 " + (same7 ? "identical" : "differs") + ", 12 " +
                                                     (same12 ? "identical" : "differs")};
    });

    std::printf("%d of 13 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
