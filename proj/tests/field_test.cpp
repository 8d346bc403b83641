#include "adef/vector_field.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "test_util.hpp"

using adef::SmoothingKernel;
using adef::VectorField;

TEST(TNorm, ZeroField) { EXPECT_EQ(adef::t_norm(VectorField(5)), 0.0); }

TEST(TNorm, SingleVectorThreeFourFive) {
    VectorField tau(6);
    tau.dr(2, 3) = 3.0;
    tau.dc(2, 3) = 4.0;
    EXPECT_DOUBLE_EQ(adef::t_norm(tau), 5.0);
}

TEST(TNorm, MatchesBruteForceMax) {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 50; ++trial) {
        const VectorField tau = testutil::random_field(8, 4.0, rng);
        EXPECT_DOUBLE_EQ(adef::t_norm(tau), oracles::t_norm(tau));
    }
}

TEST(TNorm, NormAxiomsOnRandomTriples) {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> lam(-3.0, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        const VectorField a = testutil::random_field(6, 2.0, rng);
        const VectorField b = testutil::random_field(6, 2.0, rng);
        const double l = lam(rng);
        EXPECT_GE(adef::t_norm(a), 0.0);
        EXPECT_NEAR(adef::t_norm(adef::scale(a, l)), std::abs(l) * adef::t_norm(a), 1e-12);
        EXPECT_LE(adef::t_norm(adef::add(a, b)),
                  adef::t_norm(a) + adef::t_norm(b) + 1e-12);
    }
}

TEST(LpNorm, PinnedValues) {
    const std::vector<double> a{1.0, -1.0};
    EXPECT_DOUBLE_EQ(adef::lp_norm(a, std::numeric_limits<double>::infinity()), 1.0);
    const std::vector<double> b{3.0, 4.0};
    EXPECT_DOUBLE_EQ(adef::lp_norm(b, 2.0), 5.0);
}

TEST(LpNorm, MatchesNaiveLoops) {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> x(64);
        for (double& v : x) v = u(rng);
        for (double p : {1.0, 2.0, 3.5, std::numeric_limits<double>::infinity()})
            EXPECT_NEAR(adef::lp_norm(x, p), oracles::lp_norm(x, p), 1e-12);
    }
}

TEST(LpNorm, RejectsOrdersBelowOne) {
    const std::vector<double> x{1.0, 2.0};
    EXPECT_THROW(adef::lp_norm(x, 0.5), std::invalid_argument);
    EXPECT_THROW(adef::lp_norm(x, -1.0), std::invalid_argument);
}

TEST(ClipToT, AdmissibleFieldUnchanged) {
    std::mt19937_64 rng(59);
    VectorField tau(6);
    // Build a field already in T: displacement toward the grid center.
    for (int s = 0; s < 6; ++s)
        for (int t = 0; t < 6; ++t) {
            tau.dr(s, t) = (2.5 - s) * 0.3;
            tau.dc(s, t) = (2.5 - t) * 0.3;
        }
    const VectorField out = adef::clip_to_T(tau);
    for (std::size_t j = 0; j < tau.size(); ++j) EXPECT_EQ(out.data()[j], tau.data()[j]);
}

TEST(ClipToT, ClampsCornerDisplacement) {
    VectorField tau(28);
    tau.dr(0, 0) = -5.0;
    const VectorField out = adef::clip_to_T(tau);
    EXPECT_EQ(out.dr(0, 0), 0.0);
    EXPECT_EQ(out.dc(0, 0), 0.0);
}

TEST(ClipToT, AllTargetsInsideBoxAndIdempotent) {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        const VectorField tau = testutil::random_field(6, 20.0, rng);
        const VectorField out = adef::clip_to_T(tau);
        for (int s = 0; s < 6; ++s)
            for (int t = 0; t < 6; ++t) {
                EXPECT_GE(s + out.dr(s, t), 0.0);
                EXPECT_LE(s + out.dr(s, t), 5.0);
                EXPECT_GE(t + out.dc(s, t), 0.0);
                EXPECT_LE(t + out.dc(s, t), 5.0);
            }
        const VectorField twice = adef::clip_to_T(out);
        for (std::size_t j = 0; j < out.size(); ++j)
            EXPECT_EQ(twice.data()[j], out.data()[j]);
    }
}

TEST(SmoothingKernel, SigmaZeroIsIdentity) {
    const SmoothingKernel k = SmoothingKernel::gaussian(0.0);
    EXPECT_TRUE(k.is_identity());
    EXPECT_EQ(k.radius, 0);
    ASSERT_EQ(k.weights.size(), 1u);
    EXPECT_EQ(k.weights[0], 1.0);
}

TEST(SmoothingKernel, WeightsSymmetricNormalized) {
    for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
        const SmoothingKernel k = SmoothingKernel::gaussian(sigma);
        EXPECT_EQ(k.radius, static_cast<int>(std::ceil(3.0 * sigma)));
        ASSERT_EQ(k.weights.size(), static_cast<std::size_t>(2 * k.radius + 1));
        double sum = 0.0;
        for (int j = 0; j <= 2 * k.radius; ++j) {
            EXPECT_GE(k.weights[j], 0.0);
            EXPECT_DOUBLE_EQ(k.weights[j], k.weights[2 * k.radius - j]);
            sum += k.weights[j];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    EXPECT_THROW(SmoothingKernel::gaussian(-1.0), std::invalid_argument);
}

TEST(Smooth, SigmaZeroReturnsInputUnchanged) {
    std::mt19937_64 rng(67);
    const VectorField tau = testutil::random_field(7, 3.0, rng);
    const VectorField out = adef::smooth(tau, SmoothingKernel::gaussian(0.0));
    for (std::size_t j = 0; j < tau.size(); ++j) EXPECT_EQ(out.data()[j], tau.data()[j]);
}

TEST(Smooth, ConstantPreservedAwayFromBoundary) {
    const SmoothingKernel k = SmoothingKernel::gaussian(1.0);  // radius 3
    const int W = 15;
    VectorField tau(W);
    for (double& v : tau.data()) v = 0.8;
    const VectorField out = adef::smooth(tau, k);
    for (int s = k.radius; s < W - k.radius; ++s)
        for (int t = k.radius; t < W - k.radius; ++t) {
            EXPECT_NEAR(out.dr(s, t), 0.8, 1e-12);
            EXPECT_NEAR(out.dc(s, t), 0.8, 1e-12);
        }
    // Zero padding bleeds in at the border: strictly below the constant.
    EXPECT_LT(out.dr(0, 0), 0.8);
}

TEST(Smooth, DeltaSpreadsToSampledGaussian) {
    const SmoothingKernel k = SmoothingKernel::gaussian(1.0);
    const int W = 15, c = 7;
    VectorField tau(W);
    tau.dr(c, c) = 1.0;
    const VectorField out = adef::smooth(tau, k);
    for (int dy = -k.radius; dy <= k.radius; ++dy)
        for (int dx = -k.radius; dx <= k.radius; ++dx)
            EXPECT_NEAR(out.dr(c + dy, c + dx),
                        k.weights[dy + k.radius] * k.weights[dx + k.radius], 1e-14);
    EXPECT_EQ(out.dr(c - k.radius - 1, c), 0.0);
    EXPECT_EQ(out.dc(c, c), 0.0);  // components do not mix
}

TEST(Smooth, MatchesNonSeparableBruteForce) {
    std::mt19937_64 rng(71);
    for (double sigma : {0.5, 1.0, 2.0}) {
        const SmoothingKernel k = SmoothingKernel::gaussian(sigma);
        const VectorField tau = testutil::random_field(9, 2.0, rng);
        const VectorField out = adef::smooth(tau, k);
        const VectorField ref = oracles::smooth(tau, k);
        for (std::size_t j = 0; j < tau.size(); ++j)
            EXPECT_NEAR(out.data()[j], ref.data()[j], 1e-13);
    }
}

TEST(Smooth, SelfAdjointUnderZeroPadding) {
    std::mt19937_64 rng(73);
    for (int trial = 0; trial < 100; ++trial) {
        const double sigma = 0.25 + 0.05 * (trial % 40);
        const SmoothingKernel k = SmoothingKernel::gaussian(sigma);
        const VectorField a = testutil::random_field(10, 3.0, rng);
        const VectorField b = testutil::random_field(10, 3.0, rng);
        const double lhs = adef::dot(adef::smooth(a, k), b);
        const double rhs = adef::dot(a, adef::smooth(b, k));
        const double na = adef::lp_norm(a.data(), 2.0);
        const double nb = adef::lp_norm(b.data(), 2.0);
        EXPECT_LE(std::abs(lhs - rhs), 1e-10 * na * nb);
    }
}

TEST(AddScale, PointwiseAndErrors) {
    std::mt19937_64 rng(79);
    const VectorField a = testutil::random_field(5, 2.0, rng);
    const VectorField zero(5);

    const VectorField sum = adef::add(a, zero);
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(sum.data()[j], a.data()[j]);

    const VectorField one = adef::scale(a, 1.0);
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(one.data()[j], a.data()[j]);

    const VectorField b = testutil::random_field(5, 2.0, rng);
    const VectorField s = adef::add(a, b);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            EXPECT_DOUBLE_EQ(s.dr(y, x), a.dr(y, x) + b.dr(y, x));
            EXPECT_DOUBLE_EQ(s.dc(y, x), a.dc(y, x) + b.dc(y, x));
        }

    EXPECT_THROW(adef::add(a, VectorField(6)), std::invalid_argument);
    EXPECT_THROW(adef::dot(a, VectorField(6)), std::invalid_argument);
}
