#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include <nsdyn/measures.hpp>
#include <nsdyn/parallel.hpp>

using namespace nsdyn;
using C = std::complex<double>;

namespace {

SpherePoint pt(C z) { return SpherePoint::finite(z); }

double brute_force(const std::vector<SpherePoint>& a, const std::vector<SpherePoint>& b)
{
    std::vector<std::size_t> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
        double s = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
            s += chordal_distance(a[i], b[perm[i]]);
        best = std::min(best, s / double(a.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

std::vector<SpherePoint> circle(std::size_t n, double phase = 0)
{
    std::vector<SpherePoint> v;
    for (std::size_t k = 0; k < n; ++k)
        v.push_back(pt(std::polar(1.0, 2 * std::numbers::pi * (double(k) + phase) / double(n))));
    return v;
}

} // namespace

TEST(Wasserstein, DiracsGiveChordalDistance)
{
    const auto x = pt(C(0.3, 0.2)), y = pt(C(-2, 1));
    EXPECT_NEAR(wasserstein(DiscreteMeasure::dirac(x), DiscreteMeasure::dirac(y)), chordal_distance(x, y), 1e-15);
}

TEST(Wasserstein, IdenticalMeasuresGiveZero)
{
    const auto m = DiscreteMeasure::uniform({pt(0), pt(1)});
    EXPECT_EQ(wasserstein(m, m), 0.0);
}

TEST(Wasserstein, ZeroOneVersusZeroInfinity)
{
    const auto a = DiscreteMeasure::uniform({pt(0), pt(1)});
    const auto b = DiscreteMeasure::uniform({pt(0), SpherePoint::infinity()});
    EXPECT_NEAR(wasserstein(a, b), std::sqrt(2.0) / 2, 1e-12);
}

TEST(Wasserstein, MatchesPermutationOracle)
{
    RandomStream rng(11, 0);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + rng.next() % 6;
        std::vector<SpherePoint> a, b;
        for (std::size_t i = 0; i < n; ++i) {
            a.push_back(pt(C(4 * rng.uniform() - 2, 4 * rng.uniform() - 2)));
            b.push_back(pt(C(4 * rng.uniform() - 2, 4 * rng.uniform() - 2)));
        }
        EXPECT_NEAR(wasserstein(DiscreteMeasure::uniform(a), DiscreteMeasure::uniform(b)), brute_force(a, b), 1e-10);
    }
}

TEST(Wasserstein, UnequalWeightsAndSizes)
{
    // mass 1/3 must travel from 0 to 1 whatever the coupling
    const DiscreteMeasure a({pt(0), pt(1)}, {2.0 / 3, 1.0 / 3});
    const DiscreteMeasure b({pt(0)}, {1.0});
    EXPECT_NEAR(wasserstein(a, b), std::sqrt(2.0) / 3, 1e-12);
    // split mass: 1/4 moves from 1 to i
    const DiscreteMeasure c({pt(0), pt(1)}, {0.5, 0.5});
    const DiscreteMeasure d({pt(0), pt(1), pt(C(0, 1))}, {0.5, 0.25, 0.25});
    EXPECT_NEAR(wasserstein(c, d), 0.25 * chordal_distance(pt(1), pt(C(0, 1))), 1e-12);
}

TEST(Wasserstein, SymmetricAndTriangle)
{
    RandomStream rng(5, 1);
    auto rnd = [&](std::size_t n) {
        std::vector<SpherePoint> v;
        for (std::size_t i = 0; i < n; ++i)
            v.push_back(pt(C(2 * rng.uniform() - 1, 2 * rng.uniform() - 1) * 3.0));
        return DiscreteMeasure::uniform(v);
    };
    for (int t = 0; t < 20; ++t) {
        const auto a = rnd(5), b = rnd(7), c = rnd(3);
        EXPECT_NEAR(wasserstein(a, b), wasserstein(b, a), 1e-12);
        EXPECT_LE(wasserstein(a, c), wasserstein(a, b) + wasserstein(b, c) + 1e-9);
    }
}

TEST(Wasserstein, SizeCapEnforced)
{
    const auto a = DiscreteMeasure::uniform(circle(1100));
    const auto b = DiscreteMeasure::uniform(circle(1000, 0.5));
    EXPECT_THROW(wasserstein(a, b), Error);
}

TEST(MetaWasserstein, NestedDiracs)
{
    const auto x = pt(0.5), y = pt(C(0, -3));
    EXPECT_NEAR(meta_wasserstein(MetaMeasure::dirac(DiscreteMeasure::dirac(x)),
                                 MetaMeasure::dirac(DiscreteMeasure::dirac(y))),
                chordal_distance(x, y), 1e-15);
}

TEST(MetaWasserstein, ReducesToWasserstein)
{
    const auto a = DiscreteMeasure::uniform({pt(0), pt(1)});
    const auto b = DiscreteMeasure::uniform({pt(0), SpherePoint::infinity()});
    EXPECT_NEAR(meta_wasserstein(MetaMeasure::dirac(a), MetaMeasure::dirac(b)), std::sqrt(2.0) / 2, 1e-12);
    const auto m = MetaMeasure::uniform({a, b});
    EXPECT_EQ(meta_wasserstein(m, m), 0.0);
}

TEST(MetaWasserstein, WorkerCountDoesNotChangeValue)
{
    std::vector<DiscreteMeasure> u, v;
    for (int k = 0; k < 6; ++k) {
        u.push_back(DiscreteMeasure::uniform(circle(5 + k, 0.1 * k)));
        v.push_back(DiscreteMeasure::uniform(circle(4 + k, 0.3)));
    }
    const auto a = MetaMeasure::uniform(u), b = MetaMeasure::uniform(v);
    EXPECT_EQ(meta_wasserstein(a, b, 1), meta_wasserstein(a, b, 4));
}

TEST(Measure, WeightValidation)
{
    EXPECT_THROW(DiscreteMeasure({pt(0), pt(1)}, {0.5, 0.6}), Error);
    EXPECT_THROW(DiscreteMeasure({pt(0)}, {1.0 + 1e-9}), Error);
    EXPECT_THROW(DiscreteMeasure({}, {}), Error);
    EXPECT_THROW(DiscreteMeasure({pt(0), pt(1)}, {1.0, 0.0}), Error);
    EXPECT_NO_THROW(DiscreteMeasure::uniform(std::vector<SpherePoint>(100000, pt(0))));
}

TEST(Measure, MixtureAndMerge)
{
    const auto m = mixture({DiscreteMeasure::dirac(pt(0)), DiscreteMeasure::uniform({pt(0), pt(1)})}, {0.5, 0.5});
    const auto g = m.merged();
    ASSERT_EQ(g.size(), 2u);
    EXPECT_NEAR(g.weights()[0], 0.75, 1e-15);
    EXPECT_NEAR(g.weights()[1], 0.25, 1e-15);
}

TEST(Sampler, CircleSamplesHaveUnitModulus)
{
    const auto s = sample_reference({SamplerKind::unit_circle_uniform, 3, {}}, 4);
    ASSERT_EQ(s.size(), 4u);
    for (const auto& p : s)
        EXPECT_NEAR(std::abs(p.value()), 1.0, 1e-12);
}

TEST(Sampler, AreaSamplerHemispheresBalanced)
{
    const auto s = sample_reference({SamplerKind::spherical_area_uniform, 17, {}}, 10000);
    std::size_t inside = 0;
    for (const auto& p : s)
        inside += p.in_finite_chart() && std::abs(p.value()) < 1 ? 1 : 0;
    EXPECT_NEAR(double(inside) / 1e4, 0.5, 0.02);
}

TEST(Sampler, SameSeedSameList)
{
    const ReferenceSampler s{SamplerKind::spherical_area_uniform, 99, {}};
    const auto a = sample_reference(s, 50), b = sample_reference(s, 50);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].a(), b[i].a());
        EXPECT_EQ(a[i].b(), b[i].b());
    }
    const auto c = sample_reference({SamplerKind::spherical_area_uniform, 100, {}}, 50);
    EXPECT_GT(chordal_distance(a[0], c[0]), 0.0);
}

TEST(Sampler, CustomAtomsCycle)
{
    const ReferenceSampler s{SamplerKind::custom_atom_list, 0, {pt(0), pt(1)}};
    for (const auto& p : sample_reference(s, 6))
        EXPECT_TRUE(same_point(p, pt(0)) || same_point(p, pt(1)));
}

TEST(Coarsen, SmallMeasureUnchanged)
{
    const auto m = DiscreteMeasure::uniform(circle(10));
    const auto c = coarsen(m, 10);
    EXPECT_EQ(c.measure.size(), 10u);
    EXPECT_EQ(c.radius, 0.0);
    EXPECT_EQ(c.transport_bound, 0.0);
}

TEST(Coarsen, RepeatedAtomCollapses)
{
    const auto c = coarsen(DiscreteMeasure::uniform(std::vector<SpherePoint>(2000, pt(C(0.2, 0.3)))), 16);
    ASSERT_EQ(c.measure.size(), 1u);
    EXPECT_DOUBLE_EQ(c.measure.weights()[0], 1.0);
}

TEST(Coarsen, CircleBoundHoldsAgainstExactTransport)
{
    const auto pts = circle(1000);
    const auto c = coarsen(DiscreteMeasure::uniform(pts), 100);
    EXPECT_LE(c.measure.size(), 100u);
    EXPECT_LE(c.radius, 2 * std::numbers::pi / 100 * 2);
    EXPECT_LE(c.transport_bound, c.radius);
    // every 5th point: a 200-point subsample whose own coarsening is checked exactly
    std::vector<SpherePoint> sub;
    for (std::size_t i = 0; i < pts.size(); i += 5)
        sub.push_back(pts[i]);
    const auto s = DiscreteMeasure::uniform(sub);
    const auto cs = coarsen(s, 100);
    EXPECT_LE(wasserstein(s, cs.measure), 2 * cs.radius + 1e-12);
    EXPECT_LE(wasserstein(s, cs.measure), cs.transport_bound + 1e-12);
}

TEST(Coarsen, LargeMeasureIsFastEnough)
{
    std::vector<SpherePoint> v;
    RandomStream rng(1, 2);
    for (int i = 0; i < 100000; ++i)
        v.push_back(pt(std::polar(1.0, 2 * std::numbers::pi * rng.uniform())));
    const auto c = coarsen(DiscreteMeasure::uniform(v), 256);
    EXPECT_LE(c.measure.size(), 256u);
    EXPECT_LT(c.radius, 0.1);
}
