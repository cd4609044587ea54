#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "transportlab/spectral.hpp"

using namespace transportlab;

namespace {

SpectralField cos1(int N = 32) { return SpectralField::from_trig(N, parse_trig_series<2>("cos(1,0)")); }

SpdeRunOptions run_options(double A, double kappa, double C, double T, double dt, int N = 32) {
  SpdeRunOptions o;
  o.T = T;
  o.N = N;
  o.params = {A, kappa, C, dt, 64};
  return o;
}

SpectralField random_field(int N, std::uint64_t seed) {
  const GaussianSource src(seed, 1);
  TrigSeries<2> f;
  for (int k = 0; k < 12; ++k) {
    typename TrigSeries<2>::Term t;
    t.coefficient = src.normal(0, 0, k);
    t.z = Wavevector<2>(static_cast<int>(src.uniform(1, 0, k) * 9) - 4, static_cast<int>(src.uniform(2, 0, k) * 9) - 4);
    if (t.z.isZero()) t.z[0] = 1;
    t.phase = k % 2 ? Phase::Sin : Phase::Cos;
    f.terms.push_back(t);
  }
  return SpectralField::from_trig(N, f);
}

}  // namespace

TEST(SpectralField, CosineCoefficientsAndNorms) {
  const auto u = cos1();
  EXPECT_NEAR(u.coefficient(1, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(u.coefficient(-1, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(sobolev_norm(u, 0.0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(sobolev_norm(u, 1.0) / sobolev_norm(u, 0.0), std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(sobolev_norm(u, -1.0) / sobolev_norm(u, 0.0), 1.0 / std::sqrt(2.0), 1e-14);
}

TEST(SpectralField, GridTransformMatchesExactCoefficients) {
  const auto f = parse_trig_series<2>("cos(1,0) + sin(0,2) + 0.3*cos(3,-2)");
  const auto a = SpectralField::from_trig(32, f);
  const auto b = SpectralField::from_function(32, f);
  for (std::size_t i = 0; i < a.hat().size(); ++i) EXPECT_LE(std::abs(a.hat()[i] - b.hat()[i]), 1e-15);
  const auto phys = a.physical();
  EXPECT_NEAR(phys[static_cast<std::size_t>(5) * 32 + 7], f(Vec<2>(kTwoPi * 5 / 32, kTwoPi * 7 / 32)), 1e-14);
  EXPECT_NEAR(std::abs(a.coefficient(-3, 2) - std::conj(a.coefficient(3, -2))), 0.0, 1e-16);
}

TEST(SpectralField, SZeroIsL2AndCauchySchwarzHolds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto u = random_field(32, seed);
    EXPECT_EQ(sobolev_norm(u, 0.0), std::sqrt(u.l2_squared()));
    for (double s : {0.5, 1.0, 2.0})
      EXPECT_GE(sobolev_norm(u, -s) * sobolev_norm(u, s), u.l2_squared() * (1.0 - 1e-14));
  }
}

TEST(SpectralField, NegativeSobolevNeedsMeanZero) {
  const auto u = SpectralField::from_trig(16, parse_trig_series<2>("cos(0,0) + cos(1,0)"));
  EXPECT_THROW(sobolev_norm(u, -1.0), std::invalid_argument);
  EXPECT_NO_THROW(sobolev_norm(u, 1.0));
}

TEST(SpectralField, RejectsUnresolvedHarmonicsAndBadGrids) {
  EXPECT_THROW(SpectralField(12), std::invalid_argument);
  EXPECT_THROW(SpectralField::from_trig(16, parse_trig_series<2>("cos(8,0)")), std::invalid_argument);
  EXPECT_THROW(cos1(16).coefficient(9, 0), std::out_of_range);
}

TEST(SpdeStep, PureHeatIsExactPerMode) {
  const auto m = build_kraichnan<2>(4.0, 4);
  const auto h = run_spde(m, cos1(), run_options(0.0, 0.1, 0.0, 1.0, 1e-3), 1, 0);
  EXPECT_NEAR(std::sqrt(h.l2_squared.back() / h.l2_squared.front()), std::exp(-0.1), 1e-12);
  // independent of dt
  const auto coarse = run_spde(m, cos1(), run_options(0.0, 0.1, 0.0, 1.0, 0.25), 1, 0);
  EXPECT_NEAR(coarse.l2_squared.back(), h.l2_squared.back(), 1e-15);
}

TEST(SpdeStep, ReactionTermGrowsExactly) {
  const auto m = build_br();
  const auto h = run_spde(m, cos1(), run_options(0.0, 0.0, 0.3, 2.0, 1e-2), 1, 0);
  EXPECT_NEAR(std::sqrt(h.l2_squared.back() / h.l2_squared.front()), std::exp(0.6), 1e-12);
}

TEST(SpdeStep, StratonovichConservationAndOrder) {
  const auto m = build_kraichnan<2>(4.0, 4);
  const auto u = SpectralField::from_trig(64, parse_trig_series<2>("cos(1,0)"));
  const auto a = run_spde(m, u, run_options(1.0, 0.0, 0.0, 1.0, 1e-3, 64), 3, 0);
  const auto b = run_spde(m, u, run_options(1.0, 0.0, 0.0, 1.0, 5e-4, 64), 3, 0);
  auto drift = [](const SpdeHistory& h) {
    double d = 0.0;
    for (double e : h.l2_squared) d = std::max(d, std::abs(std::sqrt(e / h.l2_squared.front()) - 1.0));
    return d;
  };
  EXPECT_LE(drift(a), 1e-3);
  EXPECT_LT(drift(b), drift(a));
}

TEST(SpdeStep, RealityMeanZeroAndDealiasingPreserved) {
  const auto m = build_kraichnan<2>(4.0, 4);
  auto u = SpectralField::from_trig(32, parse_trig_series<2>("cos(1,0) + sin(0,2)"));
  SpdeSolver solver(m, 32, {1.0, 0.01, 0.0, 1e-2, 64});
  const NoiseRealization noise(4, 0, 1e-2, static_cast<int>(m.size()), 2);
  IncrementBlock block;
  for (int n = 0; n < 50; ++n) {
    noise.fill(static_cast<std::uint64_t>(n), block);
    solver.step(u, block.transport);
    ASSERT_LE(std::abs(u.hat()[0]), 1e-14);
    ASSERT_LE(u.conjugate_symmetry_defect(), 1e-13);
    ASSERT_EQ(u.energy_above(32 / 3), 0.0);
  }
  EXPECT_GT(u.energy_above(2), 0.0);
}

TEST(SpdeStep, ConstantVelocityTranslatesExactly) {
  // u_t(x) = u(x - A W_t c): a pure phase rotation of each coefficient
  const auto c = build_constant<2>(Vec<2>(1.0, 0.0));
  auto u = cos1();
  const std::vector<double> dw{0.01};
  u = spde_step(u, c, dw, 1e-2, 1.0, 0.0, 0.0);
  const auto expect = std::polar(0.5, -0.01);
  // one RK4 step of a rotation by theta errs by theta^5 / 120
  EXPECT_NEAR(std::abs(u.coefficient(1, 0) - expect), 0.0, 0.5 * 1e-10 / 120 * 1.01);
}

TEST(SpdeStep, CflGuardTrips) {
  const auto c = build_constant<2>(Vec<2>(1.0, 0.0));
  const std::vector<double> dw{1.0};
  // displacement 1 against dx/2 = pi/32 needs 11 substeps
  EXPECT_THROW(spde_step(cos1(), c, dw, 1e-2, 1.0, 0.0, 0.0, 1), NumericalGuardError);
  EXPECT_NO_THROW(spde_step(cos1(), c, dw, 1e-2, 1.0, 0.0, 0.0, 11));
  EXPECT_THROW(spde_step(cos1(), c, dw, 1e-2, 1.0, 0.0, 0.0, 10), NumericalGuardError);
  EXPECT_THROW(spde_step(cos1(), c, std::vector<double>{1.0, 2.0}, 1e-2, 1.0, 0.0, 0.0), std::invalid_argument);
}

TEST(EnergyBalance, PureHeatResidualIsTiny) {
  const auto m = build_br();
  const auto h = run_spde(m, cos1(), run_options(0.0, 0.1, 0.0, 1.0, 1e-3), 1, 0);
  EXPECT_LE(energy_balance(h).max_relative, 1e-8);
}

TEST(EnergyBalance, KappaZeroResidualIsConservationDefect) {
  const auto m = build_kraichnan<2>(4.0, 4);
  const auto h = run_spde(m, cos1(), run_options(1.0, 0.0, 0.0, 0.5, 1e-3), 2, 0);
  const auto e = energy_balance(h);
  for (std::size_t i = 0; i < h.times.size(); ++i)
    EXPECT_NEAR(e.residual[i], 1.0 - h.l2_squared[i] / h.l2_squared.front(), 1e-15);
}

TEST(EnergyBalance, TransportWithViscosityHalvesWithDt) {
  const auto m = build_kraichnan<2>(4.0, 4);
  const auto u = SpectralField::from_trig(64, parse_trig_series<2>("cos(1,0) + sin(0,2)"));
  const auto a = energy_balance(run_spde(m, u, run_options(1.0, 0.05, 0.0, 1.0, 1e-3, 64), 5, 0));
  const auto b = energy_balance(run_spde(m, u, run_options(1.0, 0.05, 0.0, 1.0, 5e-4, 64), 5, 0));
  EXPECT_LE(a.max_relative, 2e-2);
  EXPECT_LT(b.max_relative, 0.75 * a.max_relative);
}

TEST(Sweep, BaselineRateIsKappaAndRerunIsIdentical) {
  const auto m = build_kraichnan<2>(4.0, 4);
  SweepOptions o;
  o.N = 32;
  o.kappa = 0.05;
  o.T = 4.0;
  o.dt = 1e-2;
  o.realizations = 2;
  o.record_every = 10;
  const auto u0 = parse_trig_series<2>("cos(1,0)");
  const auto a = enhanced_dissipation_sweep(m, u0, {0.0, 1.0}, 7, o);
  EXPECT_NEAR(a.entries[0].series.rate(), 0.05, 0.02 * 0.05);
  const auto b = enhanced_dissipation_sweep(m, u0, {0.0, 1.0}, 7, o);
  EXPECT_EQ(a.entries[1].series.values, b.entries[1].series.values);
  o.workers = 2;
  const auto c = enhanced_dissipation_sweep(m, u0, {0.0, 1.0}, 7, o);
  EXPECT_EQ(a.entries[1].series.values, c.entries[1].series.values);
}

TEST(Sweep, PreconditionsAreEnforced) {
  const auto m = build_br();
  const auto u0 = parse_trig_series<2>("cos(1,0)");
  EXPECT_THROW(enhanced_dissipation_sweep(m, u0, {1.0, 0.0}, 1), std::invalid_argument);
  EXPECT_THROW(enhanced_dissipation_sweep(m, u0, {}, 1), std::invalid_argument);
  EXPECT_THROW(enhanced_dissipation_sweep(m, parse_trig_series<2>("cos(0,0)"), {0.0}, 1), std::invalid_argument);
}
