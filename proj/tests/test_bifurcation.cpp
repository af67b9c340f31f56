#include <cmath>
#include <complex>
#include <vector>

#include <gtest/gtest.h>

#include <nsdyn/bifurcation.hpp>

using namespace nsdyn;
using C = std::complex<double>;

namespace {

RationalMap lattes() { return RationalMap({-2, 0, 1}, {0, 0, 1}); }
RationalMap basilica() { return RationalMap({-1, 0, 1}, {1, 0, 0}); }
SpherePoint pt(C z) { return SpherePoint::finite(z); }

} // namespace

TEST(Family, QuadraticMember)
{
    const auto fam = FamilySpec::builtin("quadratic", 2.5);
    const auto f = member(fam, -2.0);
    EXPECT_NEAR(chordal_distance(f(pt(0)), pt(-2)), 0, 1e-15);
    EXPECT_NEAR(chordal_distance(f(pt(3)), pt(7)), 0, 1e-15);
    EXPECT_THROW(member(fam, 3.0), Error);
}

TEST(Family, CoefficientsAreAffine)
{
    const auto fam = FamilySpec::builtin("lattes_scaled", 0.5);
    const auto a = fam.coefficients(0.1), b = fam.coefficients(0.3), m = fam.coefficients(0.2);
    for (std::size_t k = 0; k < a.size(); ++k)
        EXPECT_NEAR(std::abs(m[k] - 0.5 * (a[k] + b[k])), 0, 1e-15);
}

TEST(Family, DegreeDropRejected)
{
    // z^2 - lambda z^2 loses degree at lambda = 1, on the domain boundary
    EXPECT_THROW(FamilySpec::coefficient_line(RationalMap({0, 0, 1}, {1, 0, 0}), {0, 0, -1, 0, 0, 0}, 1.0), Error);
    EXPECT_THROW(FamilySpec::builtin("cubic", 1.0), Error);
}

TEST(Parabolic, QuadraticFixedPoint)
{
    const auto fam = FamilySpec::builtin("quadratic", 1.0);
    const auto r = solve_parabolic(fam, 1, {{C(0.2, 0.01), pt(0.45)}});
    ASSERT_EQ(r.solutions.size(), 1u);
    const auto& s = r.solutions.front();
    EXPECT_NEAR(std::abs(s.lambda_star - C(0.25)), 0, 1e-7);
    EXPECT_NEAR(chordal_distance(s.z_star, pt(0.5)), 0, 1e-7);
    EXPECT_LT(s.residual_fixed, 1e-12);
    EXPECT_LT(s.residual_multiplier, 1e-12);
}

TEST(Parabolic, PeriodTwoDegeneratesToFixedPoint)
{
    // at lambda = -3/4 the 2-cycle collides with the fixed point -1/2
    const auto fam = FamilySpec::builtin("quadratic", 1.0);
    const auto r = solve_parabolic(fam, 2, {{C(-0.74, 0), pt(-0.45)}, {C(-0.76, 0.01), pt(-0.55)}});
    EXPECT_TRUE(r.solutions.empty());
    ASSERT_EQ(r.failures.size(), 2u);
    for (const auto& f : r.failures)
        EXPECT_EQ(f.code, ErrorCode::exact_period_failure);
}

TEST(Parabolic, AirplaneSaddleNode)
{
    // the period-3 window opens at lambda = -7/4 with a multiplier-1 cycle through about -1.747
    const auto fam = FamilySpec::builtin("quadratic", 2.0);
    const auto r = solve_parabolic(fam, 3, {{C(-1.76, 0.005), pt(-0.055)}});
    ASSERT_EQ(r.solutions.size(), 1u);
    const auto& s = r.solutions.front();
    EXPECT_NEAR(std::abs(s.lambda_star - C(-1.75)), 0, 1e-9);
    EXPECT_EQ(s.period, 3);
    EXPECT_LT(s.residual_multiplier, 1e-9);
}

TEST(Preperiodic, QuadraticLandsOnBeta)
{
    const auto fam = FamilySpec::builtin("quadratic", 2.5);
    const auto q = make_periodic_orbit(fam.base, {pt(1)});
    const auto r = solve_preperiodic(fam, 0, 2, q);
    ASSERT_EQ(r.roots.size(), 1u);
    EXPECT_NEAR(std::abs(r.roots.front().lambda - C(-2)), 0, 1e-10);
    // h = lambda^2 + lambda - beta(lambda) with beta' = -1/sqrt(1 - 4 lambda)
    EXPECT_NEAR(std::abs(r.roots.front().derivative - C(-8.0 / 3)), 0, 1e-5);
    EXPECT_NEAR(chordal_distance(r.roots.front().target_point, pt(2)), 0, 1e-10);
}

TEST(Preperiodic, DepthThreeHasThreeRoots)
{
    const auto fam = FamilySpec::builtin("quadratic", 2.5);
    const auto q = make_periodic_orbit(fam.base, {pt(1)});
    const auto r = solve_preperiodic(fam, 0, 3, q);
    ASSERT_EQ(r.roots.size(), 3u);
    for (const auto& x : r.roots)
        EXPECT_LT(x.residual, 1e-10);
}

TEST(Preperiodic, BaseAlreadySatisfyingRelation)
{
    const auto fam = FamilySpec::builtin("lattes_scaled", 0.5);
    const auto q = make_periodic_orbit(fam.base, {pt(-1)});
    const auto cps = critical_points(fam.base);
    std::size_t inf = cps.points[0].point.is_infinity() ? 0 : 1;
    const auto r = solve_preperiodic(fam, inf, 2, q);
    ASSERT_EQ(r.roots.size(), 1u);
    EXPECT_EQ(r.roots.front().lambda, C(0));
    // infinity -> 1 + lambda -> ((1+lambda)^2 - 2)/(1+lambda) against the fixed point moving at rate -1/5
    EXPECT_NEAR(std::abs(r.roots.front().derivative - C(3.2)), 0, 1e-5);
}

TEST(Preperiodic, NoRootsReported)
{
    const auto fam = FamilySpec::builtin("quadratic", 2.5);
    const auto q = make_periodic_orbit(fam.base, {pt(1)});
    try {
        solve_preperiodic(fam, 0, 1, q);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::no_roots);
    }
}

TEST(Transversality, BasilicaFullRank)
{
    const auto d = postcritical_scan(basilica(), 64);
    const auto r = transversality_rank(basilica(), d, 1e-5);
    EXPECT_EQ(r.rows, 2u);
    EXPECT_EQ(r.cols, 5u);
    EXPECT_EQ(r.rank_estimate, 2);
}

TEST(Transversality, ConjugationDirectionsInKernel)
{
    for (const auto& f : {basilica(), lattes()}) {
        const auto d = postcritical_scan(f, 64);
        const auto r = transversality_rank(f, d, 1e-5);
        std::size_t fx0;
        const double t = 1e-6;
        for (const auto& g : {MobiusMap(1 + t, 0, 0, 1), MobiusMap(1, t, 0, 1), MobiusMap(1, 0, t, 1)}) {
            const auto c0 = normalized_coefficients(f, fx0);
            auto c1 = conjugate(f, g).coefficients();
            const auto scale = c1[fx0];
            for (auto& v : c1)
                v /= scale;
            for (std::size_t i = 0; i < r.rows; ++i) {
                C s = 0;
                for (std::size_t j = 0; j < r.cols; ++j)
                    s += r.entry(i, j) * (c1[r.free_coefficients[j]] - c0[r.free_coefficients[j]]) / t;
                EXPECT_LT(std::abs(s), 1e-4 * r.singular_values.front());
            }
        }
    }
}

TEST(Transversality, InvariantUnderCoefficientScaling)
{
    const auto f = basilica();
    auto c = f.coefficients();
    for (auto& v : c)
        v *= C(0, 3);
    const auto g = RationalMap::from_coefficients(c, 2);
    const auto a = transversality_rank(f, postcritical_scan(f, 64), 1e-5);
    const auto b = transversality_rank(g, postcritical_scan(g, 64), 1e-5);
    ASSERT_EQ(a.singular_values.size(), b.singular_values.size());
    for (std::size_t i = 0; i < a.singular_values.size(); ++i)
        EXPECT_NEAR(a.singular_values[i], b.singular_values[i], 1e-6);
}

TEST(Transversality, StepHalvingConsistent)
{
    const auto f = basilica();
    const auto d = postcritical_scan(f, 64);
    const auto a = transversality_rank(f, d, 1e-5), b = transversality_rank(f, d, 5e-6);
    for (std::size_t i = 0; i < a.jacobian.size(); ++i)
        EXPECT_LT(std::abs(a.jacobian[i] - b.jacobian[i]), 1e-5 * (1 + std::abs(a.jacobian[i])));
    EXPECT_THROW(transversality_rank(f, d, 0.5), Error);
}

TEST(Transversality, LattesRowsCoincide)
{
    // 0 -> infinity -> 1 -> -1: both critical relations reduce to the same equation
    const auto d = postcritical_scan(lattes(), 64);
    const auto r = transversality_rank(lattes(), d, 1e-5);
    EXPECT_EQ(r.rank_estimate, 1);
    EXPECT_LT(r.sigma_ratio(), 1e-6);
}

TEST(Scenario, ZeroLevelsGiveEmptyReport)
{
    ScenarioBudgets b;
    b.levels = 0;
    const auto r = scenario_driver(lattes(), make_periodic_orbit(lattes(), {pt(-1)}), b);
    EXPECT_TRUE(r.empty);
    EXPECT_TRUE(r.levels.empty());
}

TEST(Scenario, RefusesNonPcfMap)
{
    const RationalMap sq({0, 0, 1}, {1, 0, 0});
    EXPECT_THROW(scenario_driver(sq, make_periodic_orbit(sq, {pt(1)}), {}), Error);
}

TEST(Scenario, RefusesNonRepellingOrPeriodicTargets)
{
    // the 2-cycle {0, -1} of z^2 - 1 is superattracting
    EXPECT_THROW(scenario_driver(basilica(), make_periodic_orbit(basilica(), {pt(0), pt(-1)}), {}), Error);
}

TEST(Scenario, LattesStagesThroughParabolic)
{
    ScenarioBudgets b;
    b.levels = 1;
    b.stat_starts = 0;
    const auto r = scenario_driver(lattes(), make_periodic_orbit(lattes(), {pt(-1)}), b);
    EXPECT_TRUE(r.failed_stage.empty()) << r.error;
    EXPECT_EQ(r.landing_steps, 3);
    EXPECT_LT(r.lambda_star_residual, 1e-10);
    EXPECT_EQ(r.transit_steps, r.c_tilde_depth + r.landing_steps);
    ASSERT_EQ(r.levels.size(), 1u);
    const auto& lv = r.levels.front();
    ASSERT_TRUE(lv.solved) << lv.error;
    EXPECT_EQ(lv.period, r.transit_steps + b.first_dwell);
    EXPECT_LT(lv.solution.residual_fixed, 1e-8);
    EXPECT_LT(lv.solution.residual_multiplier, 1e-8);
    EXPECT_GT(lv.solution.dwell_near_q, b.first_dwell / 2);
    EXPECT_FALSE(r.diagnostics.run);
}
