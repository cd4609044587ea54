#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "transportlab/noise.hpp"
#include "transportlab/torus.hpp"

using namespace transportlab;

TEST(Torus, WrapIntoFundamentalDomain) {
  EXPECT_DOUBLE_EQ(wrap_coordinate(0.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_coordinate(kTwoPi), 0.0);
  EXPECT_NEAR(wrap_coordinate(-0.5), kTwoPi - 0.5, 1e-15);
  EXPECT_NEAR(wrap_coordinate(7.0), 7.0 - kTwoPi, 1e-15);
  EXPECT_LT(wrap_coordinate(-1e-300), kTwoPi);
  const auto p = wrap<2>(Vec<2>(-kTwoPi - 1.0, 3.0 * kTwoPi + 0.25));
  EXPECT_NEAR(p[0], kTwoPi - 1.0, 1e-12);
  EXPECT_NEAR(p[1], 0.25, 1e-12);
}

TEST(Torus, DistanceUsesShortestImage) {
  EXPECT_NEAR(torus_distance<2>(Vec<2>(0.1, 0.0), Vec<2>(kTwoPi - 0.1, 0.0)), 0.2, 1e-14);
  EXPECT_NEAR(torus_distance<2>(Vec<2>(0.0, 0.0), Vec<2>(kPi, kPi)), std::sqrt(2.0) * kPi, 1e-14);
  EXPECT_DOUBLE_EQ(torus_distance<2>(Vec<2>(1.0, 2.0), Vec<2>(1.0, 2.0)), 0.0);
}

// Known-answer vectors published with the Random123 reference implementation.
TEST(Philox, KnownAnswerVectors) {
  {
    const auto r = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(r[0], 0x6627e8d5u);
    EXPECT_EQ(r[1], 0xe169c58du);
    EXPECT_EQ(r[2], 0xbc57ac4cu);
    EXPECT_EQ(r[3], 0x9b00dbd8u);
  }
  {
    const auto r = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                        {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(r[0], 0x408f276du);
    EXPECT_EQ(r[1], 0x41c83b0eu);
    EXPECT_EQ(r[2], 0xa20bc7c6u);
    EXPECT_EQ(r[3], 0x6d5451fdu);
  }
  {
    const auto r = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                        {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(r[0], 0xd16cfe09u);
    EXPECT_EQ(r[1], 0x94fdccebu);
    EXPECT_EQ(r[2], 0x5001e420u);
    EXPECT_EQ(r[3], 0x24126ea1u);
  }
}

TEST(GaussianSource, MomentsOfStandardNormal) {
  const GaussianSource src(2024, 1);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = src.normal(0, 0, static_cast<std::uint64_t>(i));
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(NoiseStream, DeterministicAndStreamSeparated) {
  const NoiseStream a(7, 11, 1e-2, 5), b(7, 11, 1e-2, 5), c(7, 12, 1e-2, 5), d(8, 11, 1e-2, 5);
  EXPECT_EQ(a.block(3), b.block(3));
  EXPECT_NE(a.block(3), c.block(3));
  EXPECT_NE(a.block(3), d.block(3));
  EXPECT_NE(a.block(3), a.block(4));
}

TEST(NoiseStream, IncrementVariance) {
  const double dt = 0.04;
  const NoiseStream s(1, 2, dt, 3);
  double sum = 0.0, sq = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    for (double w : s.block(static_cast<std::uint64_t>(i))) {
      sum += w;
      sq += w * w;
    }
  }
  EXPECT_NEAR(sq / (3 * n), dt, 4.0 * dt * std::sqrt(2.0 / (3 * n)));
  EXPECT_NEAR(sum / (3 * n), 0.0, 4.0 * std::sqrt(dt / (3 * n)));
}

TEST(NoiseStream, BridgeRefinementSumsToCoarseIncrement) {
  const double dt = 0.1;
  const NoiseStream coarse(5, 9, dt, 4, 0), fine(5, 9, dt, 4, 1), finer(5, 9, dt, 4, 3);
  EXPECT_DOUBLE_EQ(fine.dt(), 0.05);
  for (std::uint64_t n = 0; n < 50; ++n) {
    const auto c = coarse.block(n);
    const auto f0 = fine.block(2 * n), f1 = fine.block(2 * n + 1);
    std::vector<double> acc(4, 0.0);
    for (std::uint64_t m = 0; m < 8; ++m) {
      const auto g = finer.block(8 * n + m);
      for (int k = 0; k < 4; ++k) acc[k] += g[k];
    }
    for (int k = 0; k < 4; ++k) {
      EXPECT_NEAR(f0[k] + f1[k], c[k], 1e-15);
      EXPECT_NEAR(acc[k], c[k], 1e-14);
    }
  }
}

TEST(NoiseStream, BridgeIncrementsHaveHalfVariance) {
  const double dt = 0.2;
  const NoiseStream fine(3, 4, dt, 2, 1);
  double sq = 0.0, cross = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const auto a = fine.block(2 * static_cast<std::uint64_t>(i));
    const auto b = fine.block(2 * static_cast<std::uint64_t>(i) + 1);
    sq += a[0] * a[0] + b[0] * b[0];
    cross += a[0] * b[0];
  }
  EXPECT_NEAR(sq / (2 * n), dt / 2, 5.0 * (dt / 2) * std::sqrt(2.0 / (2 * n)));
  EXPECT_NEAR(cross / n, 0.0, 5.0 * (dt / 2) / std::sqrt(n));
}

TEST(NoiseRealization, BlockShapes) {
  const NoiseRealization r(1, 0, 1e-3, 8, 2);
  IncrementBlock b;
  r.fill(0, b);
  EXPECT_EQ(b.transport.size(), 8u);
  EXPECT_EQ(b.viscous.size(), 2u);
  const NoiseRealization other(1, 1, 1e-3, 8, 2);
  IncrementBlock b2;
  other.fill(0, b2);
  EXPECT_NE(b.transport, b2.transport);
}
