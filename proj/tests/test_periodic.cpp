#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include <nsdyn/periodic.hpp>

using namespace nsdyn;
using C = std::complex<double>;

namespace {

RationalMap square() { return RationalMap({0, 0, 1}, {1, 0, 0}); }
RationalMap basilica() { return RationalMap({-1, 0, 1}, {1, 0, 0}); }
RationalMap lattes() { return RationalMap({-2, 0, 1}, {0, 0, 1}); }
SpherePoint pt(C z) { return SpherePoint::finite(z); }

bool has_point(const std::vector<PeriodicOrbit>& os, const SpherePoint& x)
{
    return std::any_of(os.begin(), os.end(), [&](const auto& o) { return o.contains(x); });
}

} // namespace

TEST(FindPeriodic, SquareFixedPointsExhaustive)
{
    FindPeriodicOptions opt;
    opt.exhaustive = true;
    const auto r = find_periodic(square(), 1, {}, opt);
    ASSERT_EQ(r.orbits.size(), 3u);
    for (const auto& o : r.orbits) {
        EXPECT_EQ(o.period, 1);
        if (o.contains(pt(1)))
            EXPECT_NEAR(std::abs(o.multiplier - C(2)), 0, 1e-9);
        else
            EXPECT_LT(std::abs(o.multiplier), 1e-9);
    }
    EXPECT_TRUE(has_point(r.orbits, pt(0)));
    EXPECT_TRUE(has_point(r.orbits, SpherePoint::infinity()));
}

TEST(FindPeriodic, BasilicaTwoCycle)
{
    const auto r = find_periodic(basilica(), 2, {pt(C(0.05, 0.02))});
    ASSERT_EQ(r.orbits.size(), 1u);
    const auto& o = r.orbits.front();
    EXPECT_EQ(o.period, 2);
    EXPECT_TRUE(o.contains(pt(0)));
    EXPECT_TRUE(o.contains(pt(-1)));
    EXPECT_LT(std::abs(o.multiplier), 1e-9);
    EXPECT_EQ(o.classification, CycleClass::attracting);
}

TEST(FindPeriodic, ExhaustiveCountsExactPeriod)
{
    FindPeriodicOptions opt;
    opt.exhaustive = true;
    // z^2 has 2^3 - 2 = 6 points of exact period 3, forming two cycles
    const auto r = find_periodic(square(), 3, {}, opt);
    EXPECT_EQ(r.orbits.size(), 2u);
    for (const auto& o : r.orbits)
        EXPECT_NEAR(std::abs(o.multiplier), 8.0, 1e-8);
}

TEST(FindPeriodic, LattesFixedPointMultiplier)
{
    const auto r = find_periodic(lattes(), 1, {pt(C(-1.01, 0.01))});
    ASSERT_EQ(r.orbits.size(), 1u);
    EXPECT_TRUE(r.orbits.front().contains(pt(-1)));
    EXPECT_NEAR(std::abs(r.orbits.front().multiplier - C(-4)), 0, 1e-9);
    EXPECT_EQ(r.orbits.front().classification, CycleClass::repelling);
}

TEST(FindPeriodic, DivisorCyclesDroppedByDefault)
{
    const auto seeds = std::vector<SpherePoint>{pt(C(0.999, 0.001))};
    EXPECT_TRUE(find_periodic(square(), 2, seeds).orbits.empty());
    FindPeriodicOptions opt;
    opt.include_divisors = true;
    const auto r = find_periodic(square(), 2, seeds, opt);
    ASSERT_EQ(r.orbits.size(), 1u);
    EXPECT_EQ(r.orbits.front().period, 1);
}

TEST(PeriodicOrbit, ReducesToExactPeriod)
{
    const auto o = make_periodic_orbit(basilica(), {pt(0), pt(-1), pt(0), pt(-1)});
    EXPECT_EQ(o.period, 2);
    EXPECT_EQ(o.points.size(), 2u);
}

TEST(PeriodicOrbit, RejectsNonCycles)
{
    EXPECT_THROW(make_periodic_orbit(square(), {pt(0.5)}), Error);
}

TEST(PeriodicMeasure, UniformOnCycle)
{
    const auto m = periodic_measure(make_periodic_orbit(basilica(), {pt(0), pt(-1)}));
    ASSERT_EQ(m.measure.size(), 2u);
    EXPECT_DOUBLE_EQ(m.measure.weights()[0], 0.5);
    EXPECT_NEAR(wasserstein(m.measure, DiscreteMeasure::uniform({pt(-1), pt(0)})), 0, 1e-15);
}

TEST(PeriodicMeasure, ThreeCycleOfDoubling)
{
    const double t = 2 * std::numbers::pi / 7;
    const auto o = make_periodic_orbit(square(), {pt(std::polar(1.0, t)), pt(std::polar(1.0, 2 * t)),
                                                  pt(std::polar(1.0, 4 * t))});
    EXPECT_EQ(o.period, 3);
    EXPECT_NEAR(o.log_abs_multiplier, 3 * std::log(2.0), 1e-12);
}

TEST(Closing, ExactPeriodicStart)
{
    const auto orbit = iterate_orbit(basilica(), pt(0), 20);
    const auto c = close_orbit(basilica(), orbit, 1e-6);
    EXPECT_EQ(c.periodic.period, 2);
    EXPECT_LT(c.shadow_distance, 1e-12);
    EXPECT_LT(c.measure_gap, 1e-12);
}

TEST(Closing, NearSevenCycleOfDoubling)
{
    const auto x = pt(std::polar(1.0, 2 * std::numbers::pi * (1.0 / 7 + 1e-9)));
    const auto orbit = iterate_orbit(square(), x, 12);
    const auto c = close_orbit(square(), orbit, 1e-4);
    EXPECT_EQ(c.periodic.period % 3, 0);
    EXPECT_LE(c.return_distance, 1e-4);
    EXPECT_LT(c.shadow_distance, 1e-4);
    EXPECT_LE(c.measure_gap, c.shadow_distance + c.gap_tolerance + 1e-15);
}

TEST(Closing, LattesGapBoundedByShadow)
{
    const auto orbit = iterate_orbit(lattes(), pt(C(0.31, 0.17)), 400);
    const auto c = close_orbit(lattes(), orbit, 0.05);
    EXPECT_GE(c.periodic.period, 1);
    EXPECT_LE(c.measure_gap, c.shadow_distance + c.gap_tolerance + 1e-12);
    for (std::size_t k = 0; k < c.length; ++k) {
        SpherePoint p = c.periodic.points[k % c.periodic.points.size()];
        EXPECT_LE(chordal_distance(orbit.points[c.offset + k], p), c.shadow_distance + 1e-15);
    }
}

TEST(Closing, ValidatesArguments)
{
    const auto orbit = iterate_orbit(square(), pt(0.5), 1);
    EXPECT_THROW(close_orbit(square(), orbit, 1e-3), Error);
    EXPECT_THROW(close_orbit(square(), iterate_orbit(square(), pt(0.5), 10), 0.0), Error);
}

TEST(Transit, SingleTargetReturnsIt)
{
    const auto p = make_periodic_orbit(lattes(), {pt(-1)});
    const auto r = transit_periodic(lattes(), {p}, {1.0}, 10);
    EXPECT_EQ(r.orbit.period, 1);
    EXPECT_EQ(r.gap, 0.0);
}

TEST(Transit, TwoDoublingCyclesMixed)
{
    const double t = 2 * std::numbers::pi / 7;
    const auto a = make_periodic_orbit(square(), {pt(1)});
    const auto b = make_periodic_orbit(square(), {pt(std::polar(1.0, t)), pt(std::polar(1.0, 2 * t)),
                                                  pt(std::polar(1.0, 4 * t))});
    const auto r = transit_periodic(square(), {a, b}, {0.5, 0.5}, 60);
    EXPECT_GT(r.orbit.period, 30);
    EXPECT_NEAR(r.dwell_fractions[0], 0.5, 0.1);
    EXPECT_LT(r.gap, 0.2);
    EXPECT_LE(r.shadow_distance, 10 * r.epsilon);
}

TEST(Transit, RejectsAttractingTargets)
{
    const auto a = make_periodic_orbit(square(), {pt(0)});
    EXPECT_THROW(transit_periodic(square(), {a}, {1.0}, 10), Error);
    const auto p = make_periodic_orbit(square(), {pt(1)});
    EXPECT_THROW(transit_periodic(square(), {p}, {0.7}, 10), Error);
}
