#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "transportlab/conditions.hpp"

using namespace transportlab;

namespace {

std::vector<Vec<2>> random_points(int n, std::uint64_t seed) {
  const GaussianSource src(seed, 41);
  std::vector<Vec<2>> pts;
  for (int i = 0; i < n; ++i) pts.push_back(sample_point<2>(src, static_cast<std::uint64_t>(i)));
  return pts;
}

Vec<2> unit(double angle) { return Vec<2>(std::cos(angle), std::sin(angle)); }

}  // namespace

TEST(SpanA, KraichnanFieldsSpanEverywhere) {
  const auto m = build_kraichnan<2>(4.0, 1);
  for (const auto& x : random_points(200, 1)) {
    const auto r = check_span_A<2>(m, x);
    EXPECT_EQ(r.rank, 2);
    EXPECT_EQ(r.generators, "fields");
  }
}

TEST(SpanA, BaxendaleRozovskiiAtOrigin) {
  EXPECT_EQ(check_span_A<2>(build_br(), Vec<2>::Zero()).rank, 2);
}

TEST(SpanA, SingleVanishingFieldHasRankZero) {
  const auto br = build_br();
  const auto only_first = build_custom<2>({br.mode(0)});
  EXPECT_EQ(check_span_A<2>(only_first, Vec<2>::Zero()).rank, 0);
}

TEST(TwoPointEllipticity, BaxendaleRozovskiiDegeneratePair) {
  const double lam = two_point_ellipticity<2>(build_br(), Vec<2>(0.0, 0.0), Vec<2>(kPi, kPi));
  EXPECT_LE(lam, 1e-12);
}

TEST(TwoPointEllipticity, KraichnanPositiveOffDiagonal) {
  const auto m = build_kraichnan<2>(4.0, 4);
  const auto xs = random_points(400, 2), ys = random_points(400, 3);
  int tested = 0;
  for (std::size_t i = 0; i < xs.size() && tested < 100; ++i) {
    if (torus_distance<2>(xs[i], ys[i]) < 0.1) continue;
    EXPECT_GT(two_point_ellipticity<2>(m, xs[i], ys[i]), 0.0);
    ++tested;
  }
  EXPECT_EQ(tested, 100);
}

TEST(TwoPointEllipticity, SymmetricUnderSwap) {
  const auto m = build_kraichnan<2>(4.0, 2);
  const Vec<2> x(0.3, 4.0), y(2.2, 1.1);
  EXPECT_NEAR(two_point_ellipticity<2>(m, x, y), two_point_ellipticity<2>(m, y, x), 1e-14);
}

TEST(TwoPointEllipticity, RejectsDiagonal) {
  const Vec<2> x(1.0, 1.0);
  EXPECT_THROW(two_point_ellipticity<2>(build_br(), x, x), std::invalid_argument);
}

TEST(TangentEllipticity, NormalizedGeneratorOfFirstBrField) {
  const auto br = build_br();
  const Vec<2> t = normalized_tangent_field<2>(br, 0, Vec<2>::Zero(), Vec<2>(1.0, 0.0));
  EXPECT_NEAR(t[0], 0.0, 1e-15);
  EXPECT_NEAR(t[1], 1.0, 1e-15);
}

TEST(TangentEllipticity, ConstantFieldHasNoRotation) {
  const auto c = build_constant<2>(Vec<2>(0.3, -0.7));
  EXPECT_EQ(normalized_tangent_field<2>(c, 0, Vec<2>(1.0, 2.0), unit(0.4)).norm(), 0.0);
  EXPECT_LE(tangent_ellipticity<2>(c, Vec<2>(1.0, 2.0), unit(0.4)), 1e-15);
}

TEST(TangentEllipticity, KraichnanPositive) {
  const auto m = build_kraichnan<2>(4.0, 2);
  const auto xs = random_points(100, 4);
  const GaussianSource src(9, 9);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Vec<2> v = unit(kTwoPi * src.uniform(0, 0, i));
    EXPECT_GT(tangent_ellipticity<2>(m, xs[i], v), 0.0);
  }
}

TEST(TangentEllipticity, RejectsNonUnitVector) {
  EXPECT_THROW(tangent_ellipticity<2>(build_br(), Vec<2>::Zero(), Vec<2>(1.0, 1.0)),
               std::invalid_argument);
}

TEST(TangentEllipticity, SphereBasisOrthonormal) {
  const Vec<3> v = Vec<3>(0.3, -0.5, 0.8).normalized();
  const auto b = sphere_tangent_basis<3>(v);
  EXPECT_LE((b.transpose() * b - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((b.transpose() * v).cwiseAbs().maxCoeff(), 1e-15);
  const auto m3 = build_kraichnan<3>(4.0, 1);
  EXPECT_GT(tangent_ellipticity<3>(m3, Vec<3>(0.1, 2.0, 4.0), v), 0.0);
}

TEST(LieBracket, BaxendaleRozovskiiFirstAndThird) {
  const auto br = build_br();
  for (const auto& x : random_points(50, 5)) {
    const Vec<2> b = lie_bracket<2>(br, 0, 2, x);
    EXPECT_NEAR(b[0], std::sin(x[0]) * std::cos(x[1]), 1e-14);
    EXPECT_NEAR(b[1], -std::cos(x[0]) * std::sin(x[1]), 1e-14);
  }
}

TEST(LieBracket, AntisymmetryAndSelfBracket) {
  const auto m = build_kraichnan<2>(3.5, 2);
  for (const auto& x : random_points(20, 6)) {
    for (std::size_t j = 0; j < m.size(); j += 3) {
      EXPECT_EQ(lie_bracket<2>(m, j, j, x).norm(), 0.0);
      for (std::size_t k = 0; k < m.size(); k += 5)
        EXPECT_LE((lie_bracket<2>(m, j, k, x) + lie_bracket<2>(m, k, j, x)).norm(), 1e-15);
    }
  }
}

TEST(LieBracket, ConstantFieldsCommute) {
  const auto c = build_custom<2>({FourierMode<2>{Wavevector<2>::Zero(), Vec<2>(1.0, 0.0), Phase::Cos, 1.0},
                                  FourierMode<2>{Wavevector<2>::Zero(), Vec<2>(0.2, 0.9), Phase::Cos, 1.0}});
  EXPECT_EQ(lie_bracket<2>(c, 0, 1, Vec<2>(0.5, 0.5)).norm(), 0.0);
}

TEST(LieBracket, MatchesDirectionalFiniteDifferences) {
  const auto m = build_kraichnan<2>(4.0, 3);
  const double h = 1e-5;
  for (const auto& x : random_points(30, 7)) {
    for (std::size_t j = 0; j < m.size(); j += 7) {
      for (std::size_t k = 1; k < m.size(); k += 9) {
        const Vec<2> f = m.sigma(j, x), g = m.sigma(k, x);
        const Vec<2> dg_f = (m.sigma(k, x + h * f) - m.sigma(k, x - h * f)) / (2 * h);
        const Vec<2> df_g = (m.sigma(j, x + h * g) - m.sigma(j, x - h * g)) / (2 * h);
        EXPECT_LE((lie_bracket<2>(m, j, k, x) - (dg_f - df_g)).norm(), 1e-8);
      }
    }
  }
}

TEST(BrTwoPointSpan, GenericPairHasFullRank) {
  const auto r = check_br_two_point_span(Vec<2>(0.3, 1.1), Vec<2>(2.0, 0.7));
  EXPECT_EQ(r.rank, 4);
  EXPECT_EQ(r.points.size(), 4u);
}

TEST(BrTwoPointSpan, DiagonalHasRankTwo) {
  const Vec<2> x(0.3, 1.1);
  EXPECT_EQ(check_br_two_point_span(x, x).rank, 2);
}

TEST(BrTwoPointSpan, AntipodalPairNeedsBrackets) {
  const auto raw = check_br_two_point_span(Vec<2>(0.0, 0.0), Vec<2>(kPi, kPi), false);
  EXPECT_EQ(raw.rank, 2);
  EXPECT_EQ(check_br_two_point_span(Vec<2>(0.0, 0.0), Vec<2>(kPi, kPi), true).rank, 4);
}

TEST(BrTwoPointSpan, HalfPeriodShiftInOneCoordinateIsDegenerate) {
  const Vec<2> x(0.4, 1.3);
  EXPECT_LT(check_br_two_point_span(x, Vec<2>(x + Vec<2>(kPi, 0.0))).rank, 4);
  EXPECT_LT(check_br_two_point_span(x, Vec<2>(x + Vec<2>(0.0, kPi))).rank, 4);
  EXPECT_NEAR(br_degeneracy_distance(x, Vec<2>(x + Vec<2>(0.0, kPi))), 0.0, 1e-14);
}

TEST(BrTwoPointSpan, RandomPairsAwayFromDegeneracy) {
  const auto xs = random_points(3000, 8), ys = random_points(3000, 9);
  int tested = 0;
  for (std::size_t i = 0; i < xs.size() && tested < 1000; ++i) {
    if (std::min(torus_distance<2>(xs[i], ys[i]), br_degeneracy_distance(xs[i], ys[i])) < 0.05) continue;
    EXPECT_EQ(check_br_two_point_span(xs[i], ys[i]).rank, 4) << xs[i].transpose() << " | " << ys[i].transpose();
    ++tested;
  }
  EXPECT_EQ(tested, 1000);
}
