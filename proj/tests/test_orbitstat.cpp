#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include <nsdyn/orbitstat.hpp>

using namespace nsdyn;
using C = std::complex<double>;

namespace {

RationalMap square() { return RationalMap({0, 0, 1}, {1, 0, 0}); }
RationalMap identity() { return RationalMap::degree_one_fixture({0, 1}, {1, 0}); }
SpherePoint pt(C z) { return SpherePoint::finite(z); }

DiscreteMeasure circle_reference(std::size_t n)
{
    std::vector<SpherePoint> v;
    for (std::size_t k = 0; k < n; ++k)
        v.push_back(pt(std::polar(1.0, 2 * std::numbers::pi * (k + 0.5) / double(n))));
    return DiscreteMeasure::uniform(v);
}

} // namespace

TEST(Empirical, FirstCheckpointIsDirac)
{
    const auto x = pt(C(0.3, 0.9));
    const auto s = empirical_sequence(RationalMap({-2, 0, 1}, {0, 0, 1}), x, {1});
    ASSERT_EQ(s.measures.size(), 1u);
    EXPECT_EQ(wasserstein(s.measures[0], DiscreteMeasure::dirac(x)), 0.0);
}

TEST(Empirical, FixedPointGivesDirac)
{
    const auto s = empirical_sequence(square(), pt(1), {10, 100});
    for (const auto& m : s.measures)
        EXPECT_LT(wasserstein(m, DiscreteMeasure::dirac(pt(1))), 1e-15);
}

TEST(Empirical, CheckpointsValidated)
{
    EXPECT_THROW(empirical_sequence(square(), pt(1), {}), Error);
    EXPECT_THROW(empirical_sequence(square(), pt(1), {10, 5}), Error);
    EXPECT_THROW(empirical_sequence(square(), pt(1), {0, 5}), Error);
}

TEST(Empirical, CirclePhaseSelectedForSquare)
{
    const auto s = empirical_sequence(square(), pt(std::polar(1.0, 1.0)), {4});
    EXPECT_EQ(s.phase, PhaseSpace::unit_circle);
    for (const auto& a : s.measures[0].atoms())
        EXPECT_NEAR(std::abs(a.value()), 1.0, 1e-15);
    EXPECT_EQ(empirical_sequence(square(), pt(0.5), {4}).phase, PhaseSpace::sphere);
}

TEST(Empirical, IrrationalAngleEquidistributes)
{
    const auto x = pt(std::polar(1.0, 2 * std::numbers::pi * (std::sqrt(2.0) - 1)));
    const auto s = empirical_sequence(square(), x, {100000}, {PhaseSpace::automatic, 256});
    const double d = wasserstein(s.measures.back(), circle_reference(256));
    EXPECT_LT(d + s.coarsen_bounds.back(), 0.05);
}

TEST(Empirical, PreperiodicAngleConcentratesOnItsCycle)
{
    // angle 1/10 is preperiodic under doubling: 1/10 -> 1/5 -> 2/5 -> 4/5 -> 3/5 -> 1/5
    const auto s = empirical_sequence(square(), pt(std::polar(1.0, 0.2 * std::numbers::pi)), {100000},
                                      {PhaseSpace::automatic, 256});
    std::vector<SpherePoint> cyc;
    for (double a : {0.2, 0.4, 0.8, 0.6})
        cyc.push_back(pt(std::polar(1.0, 2 * std::numbers::pi * a)));
    EXPECT_LT(wasserstein(s.measures.back(), DiscreteMeasure::uniform(cyc)), 1e-3);
}

TEST(Law, SampleCountValidated)
{
    const ReferenceSampler s{SamplerKind::spherical_area_uniform, 1, {}};
    EXPECT_THROW(law_sequence(square(), s, 1, {10}, 16), Error);
    const auto l = law_sequence(square(), s, 2, {10}, 16);
    ASSERT_EQ(l.laws[0].size(), 2u);
    EXPECT_DOUBLE_EQ(l.laws[0].weights()[0], 0.5);
}

TEST(Law, IdentityLawIsConstant)
{
    const ReferenceSampler s{SamplerKind::unit_circle_uniform, 4, {}};
    const auto l = law_sequence(identity(), s, 12, {10, 100, 1000}, 32);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
            EXPECT_LE(meta_wasserstein(l.laws[a], l.laws[b]),
                      l.coarsen_tolerance[a] + l.coarsen_tolerance[b] + 1e-12);
}

TEST(Law, SquareLawsContract)
{
    const ReferenceSampler s{SamplerKind::spherical_area_uniform, 8, {}};
    const auto l = law_sequence(square(), s, 12, {100, 1000, 10000}, 64);
    EXPECT_GT(meta_wasserstein(l.laws[0], l.laws[1]), meta_wasserstein(l.laws[1], l.laws[2]));
}

TEST(Law, WorkerCountInvariant)
{
    const ReferenceSampler s{SamplerKind::spherical_area_uniform, 3, {}};
    const auto a = law_sequence(square(), s, 6, {50, 200}, 32, {1});
    const auto b = law_sequence(square(), s, 6, {50, 200}, 32, {3});
    for (std::size_t j = 0; j < 2; ++j)
        EXPECT_EQ(meta_wasserstein(a.laws[j], b.laws[j]), 0.0);
}

TEST(Accumulation, FixedPointSingleCluster)
{
    const auto s = empirical_sequence(square(), pt(1), {10, 20, 40, 80});
    const auto r = accumulation_report(s, 1.0, 0.05);
    EXPECT_EQ(r.cluster_centers.size(), 1u);
    EXPECT_EQ(r.oscillation_diameter, 0.0);
    EXPECT_FALSE(r.non_statistical);
}

TEST(Accumulation, AlternatingSyntheticSequence)
{
    EmpiricalSequence s;
    const DiscreteMeasure heavy0({pt(0), pt(1)}, {0.9, 0.1}), heavy1({pt(0), pt(1)}, {0.1, 0.9});
    for (std::size_t k = 1; k <= 8; ++k) {
        s.checkpoints.push_back(k * 100);
        s.measures.push_back(k % 2 ? heavy0 : heavy1);
        s.coarsen_bounds.push_back(0);
        s.coarsen_radii.push_back(0);
    }
    const auto r = accumulation_report(s, 1.0, 0.05);
    EXPECT_EQ(r.cluster_centers.size(), 2u);
    EXPECT_NEAR(r.oscillation_diameter, 0.8 * std::sqrt(2.0), 1e-12);
    EXPECT_TRUE(r.non_statistical);
    EXPECT_EQ(r.tail_checkpoints.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i)
        EXPECT_EQ(r.assignment[i], r.assignment[i % 2]);
}

TEST(Accumulation, GenericDoublingOrbitSingleCluster)
{
    const auto x = pt(std::polar(1.0, 2 * std::numbers::pi * (std::sqrt(3.0) - 1)));
    const auto s = empirical_sequence(square(), x, geometric_checkpoints(1000, 100000), {PhaseSpace::automatic, 128});
    const auto r = accumulation_report(s, 0.5, 0.1, {128, 1, 0});
    EXPECT_EQ(r.cluster_centers.size(), 1u);
    EXPECT_LT(r.oscillation_diameter, 0.1);
}

TEST(Accumulation, NeedsThreeTailCheckpoints)
{
    const auto s = empirical_sequence(square(), pt(1), {10, 20, 40});
    EXPECT_THROW(accumulation_report(s, 0.5, 0.05), Error);
}

TEST(Ek, IdentityWithinTolerance)
{
    LawParams p;
    p.sampler = {SamplerKind::unit_circle_uniform, 2, {}};
    p.sample_count = 8;
    const auto e = finite_Ek_probe(identity(), 5, 500, p);
    EXPECT_LE(e.diameter, e.diameter_tolerance + 1e-12);
}

TEST(Ek, LastStepGivesSingleLaw)
{
    LawParams p;
    p.sample_count = 4;
    const auto e = finite_Ek_probe(square(), 99, 100, p);
    ASSERT_EQ(e.laws.size(), 1u);
    EXPECT_EQ(e.checkpoints.front(), 100u);
    EXPECT_EQ(e.diameter, 0.0);
}

TEST(Ek, DiameterShrinksWithK)
{
    LawParams p;
    p.sample_count = 8;
    p.coarsen_to = 48;
    const auto early = finite_Ek_probe(square(), 10, 4000, p);
    const auto late = finite_Ek_probe(square(), 1000, 4000, p);
    EXPECT_GT(early.diameter, late.diameter);
}

TEST(Probe, ZeroRadiusReducesToCenterLaw)
{
    const auto fam = FamilySpec::builtin("quadratic", 1.0);
    LawParams p;
    p.sample_count = 6;
    p.coarsen_to = 24;
    const auto r = bifurcation_probe(fam, C(-0.1, 0), 0.0, 1, {50, 100}, p);
    const auto l = law_sequence(member(fam, C(-0.1, 0)), p.sampler, p.sample_count, {50, 100}, p.coarsen_to);
    ASSERT_EQ(r.entries.size(), 2u);
    for (std::size_t j = 0; j < 2; ++j)
        EXPECT_EQ(meta_wasserstein(r.entries[j].law, l.laws[j]), 0.0);
}

TEST(Probe, TinyRadiusStaysNearCenter)
{
    const auto fam = FamilySpec::builtin("quadratic", 1.0);
    LawParams p;
    p.sample_count = 6;
    p.coarsen_to = 24;
    const auto r = bifurcation_probe(fam, 0, 1e-6, 4, {100, 200}, p);
    EXPECT_EQ(r.targets.size(), 1u);
    for (const auto& e : r.entries)
        EXPECT_LT(e.distance_to_target, 0.05);
}

TEST(Probe, CardioidSidesSeparate)
{
    const auto fam = FamilySpec::builtin("quadratic", 0.5);
    LawParams p;
    p.sample_count = 8;
    p.coarsen_to = 32;
    const auto r = bifurcation_probe(fam, C(0.25, 0), 0.2, 8, {1000, 2000}, p);
    EXPECT_GE(r.targets.size(), 2u);
    // inside the main cardioid the fixed point attracts: |1 - sqrt(1 - 4 lambda)| < 1
    const ProbeEntry* deepest = nullptr;
    const ProbeEntry* farthest = nullptr;
    auto attraction = [](C l) { return std::abs(1.0 - std::sqrt(1.0 - 4.0 * l)); };
    for (const auto& e : r.entries) {
        if (e.checkpoint != 2000)
            continue;
        if (!deepest || attraction(e.parameter) < attraction(deepest->parameter))
            deepest = &e;
        if (!farthest || attraction(e.parameter) > attraction(farthest->parameter))
            farthest = &e;
    }
    ASSERT_TRUE(deepest && farthest);
    EXPECT_LT(attraction(deepest->parameter), 1.0);
    EXPECT_GT(attraction(farthest->parameter), 1.0);
    EXPECT_NE(deepest->cluster, farthest->cluster);
}

TEST(Probe, LabelledFiniteSample)
{
    const auto fam = FamilySpec::builtin("quadratic", 1.0);
    LawParams p;
    p.sample_count = 2;
    p.coarsen_to = 8;
    EXPECT_EQ(bifurcation_probe(fam, 0, 0.0, 1, {10}, p).label, "finite-sample probe");
}
