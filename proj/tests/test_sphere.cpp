#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include <nsdyn/sphere.hpp>

using namespace nsdyn;
using C = std::complex<double>;

TEST(Chordal, ZeroToInfinityIsAntipodal)
{
    EXPECT_DOUBLE_EQ(chordal_distance(SpherePoint::finite(0), SpherePoint::infinity()), 2.0);
}

TEST(Chordal, SelfDistanceIsZero)
{
    const auto x = SpherePoint::finite(C(0.3, -1.7));
    EXPECT_EQ(chordal_distance(x, x), 0.0);
}

TEST(Chordal, ZeroToOne)
{
    EXPECT_NEAR(chordal_distance(SpherePoint::finite(0), SpherePoint::finite(1)), std::sqrt(2.0), 1e-15);
}

TEST(Chordal, MatchesCartesianDistance)
{
    const C zs[] = {C(0.2, 0.1), C(-3, 4), C(1e5, -2e4), C(0, 1)};
    for (auto a : zs)
        for (auto b : zs) {
            const auto x = SpherePoint::finite(a), y = SpherePoint::finite(b);
            const auto p = to_cartesian(x), q = to_cartesian(y);
            const double e = std::hypot(p[0] - q[0], p[1] - q[1], p[2] - q[2]);
            EXPECT_NEAR(chordal_distance(x, y), e, 1e-14);
        }
}

TEST(Chordal, TriangleInequalityOnSamples)
{
    const C zs[] = {C(0), C(1), C(-1), C(0, 2), C(7, 7), C(0.01, 0)};
    for (auto a : zs)
        for (auto b : zs)
            for (auto c : zs) {
                const auto x = SpherePoint::finite(a), y = SpherePoint::finite(b), z = SpherePoint::finite(c);
                EXPECT_LE(chordal_distance(x, z), chordal_distance(x, y) + chordal_distance(y, z) + 1e-14);
            }
}

TEST(SpherePointCanonical, LargeModulusUsesInfinityChart)
{
    const auto x = SpherePoint::finite(C(10, 0));
    EXPECT_FALSE(x.in_finite_chart());
    EXPECT_NEAR(std::abs(x.value() - C(10, 0)), 0.0, 1e-14);
    EXPECT_TRUE(SpherePoint::finite(C(0.5, 0.5)).in_finite_chart());
}

TEST(SpherePointCanonical, CartesianRoundTrip)
{
    for (C z : {C(0.3, 0.4), C(-20, 3), C(0, 0)}) {
        const auto p = to_cartesian(SpherePoint::finite(z));
        EXPECT_LT(chordal_distance(from_cartesian(p[0], p[1], p[2]), SpherePoint::finite(z)), 1e-14);
    }
    const auto n = to_cartesian(SpherePoint::infinity());
    EXPECT_TRUE(from_cartesian(n[0], n[1], n[2]).is_infinity());
}

TEST(Mobius, InversionSendsZeroToInfinity)
{
    EXPECT_TRUE(apply_mobius(MobiusMap::inversion(), SpherePoint::finite(0)).is_infinity());
}

TEST(Mobius, IdentityFixesPoints)
{
    const auto x = SpherePoint::finite(C(2, -5));
    EXPECT_TRUE(same_point(apply_mobius(MobiusMap::identity(), x), x));
}

TEST(Mobius, TranslationFixesInfinity)
{
    EXPECT_TRUE(apply_mobius(MobiusMap::translation(1), SpherePoint::infinity()).is_infinity());
}

TEST(Mobius, RotationsAreIsometries)
{
    const auto g = MobiusMap::rotation_from_angles(0.3, 0.7, 0.1);
    const auto x = SpherePoint::finite(C(0.4, 2)), y = SpherePoint::finite(C(-3, 0.5));
    EXPECT_NEAR(chordal_distance(g(x), g(y)), chordal_distance(x, y), 1e-14);
}

TEST(Mobius, ComposeAndInverse)
{
    const MobiusMap g(C(1, 2), C(0, 1), C(3, 0), C(1, -1));
    const auto x = SpherePoint::finite(C(0.25, -0.75));
    EXPECT_LT(chordal_distance(g.inverse()(g(x)), x), 1e-14);
    const auto h = MobiusMap::scaling(C(2, 0));
    EXPECT_LT(chordal_distance(g.compose(h)(x), g(h(x))), 1e-14);
}

TEST(Mobius, SingularMatrixRejected)
{
    EXPECT_THROW(MobiusMap(1, 2, 2, 4), Error);
}
