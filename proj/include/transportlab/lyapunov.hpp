#pragma once

// Top Lyapunov exponent, moment Lyapunov function and the twisted-semigroup
// eigenvalue estimator.
//
//   lambda1  = lim (1/t) log |Dphi_t(x) v|
//   Lambda(p) = -lim (1/t) log E |Dphi_t(x) v|^(-p)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "transportlab/flow.hpp"
#include "transportlab/parallel.hpp"

namespace transportlab {

/// Random unit vector, uniform on the sphere.
template <int D> Vec<D> random_unit_vector(const GaussianSource& src, std::uint64_t index) {
  if constexpr (D == 2) {
    const double th = kTwoPi * src.uniform(0, 3, index);
    return Vec<D>(std::cos(th), std::sin(th));
  }
  Vec<D> v;
  for (int i = 0; i < D; i += 2) {
    const auto z = src.pair(static_cast<std::uint32_t>(i / 2), 4, index);
    v[i] = z[0];
    if (i + 1 < D) v[i + 1] = z[1];
  }
  return v.normalized();
}

/// Initial (x, v) of sample `index`, drawn from the Initial stream.
template <int D> std::pair<Vec<D>, Vec<D>> initial_condition(std::uint64_t seed, std::uint64_t index) {
  const GaussianSource src(seed, stream_id(StreamKind::Initial, index));
  return {sample_point<D>(src, 0), random_unit_vector<D>(src, 0)};
}

struct LyapunovEstimate {
  double lambda1 = 0.0;
  double std_error = 0.0;
  double T = 0.0;
  double dt = 0.0;
  std::size_t realizations = 0;
  std::vector<double> finite_time;  // per realization, averaged over [T/2, T]
  /// mean exponent over [0, T/2] minus lambda1: a finite-time bias proxy
  double burn_in_drift = 0.0;

  double ci_low() const { return lambda1 - 1.96 * std_error; }
  double ci_high() const { return lambda1 + 1.96 * std_error; }
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_and_se(const std::vector<double>& v) {
  MeanSe r;
  if (v.empty()) return r;
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return r;
  double ss = 0.0;
  for (double a : v) ss += (a - r.mean) * (a - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return r;
}

struct Lambda1Options {
  int qr_every = 10;
  int workers = 1;
  Scheme scheme = Scheme::Heun;
};

/// Per realization: one particle with its full tangent matrix, QR every
/// qr_every steps; the exponent is the growth of log R11 over [T/2, T].
template <int D>
LyapunovEstimate estimate_lambda1(const VelocityModel<D>& model, double amplitude, double T, double dt,
                                  std::size_t n_realizations, std::uint64_t seed,
                                  const Lambda1Options& opt = {}) {
  if (n_realizations < 8) throw std::invalid_argument("estimate_lambda1: need at least 8 realizations");
  if (T < 50.0) throw std::invalid_argument("estimate_lambda1: T must be at least 50");
  const auto nsteps = step_count(T, dt);
  const auto half = nsteps / 2;
  const double t_half = static_cast<double>(half) * dt;

  std::vector<double> late(n_realizations), early(n_realizations);
  parallel_for(n_realizations, opt.workers, [&](std::size_t r) {
    const NoiseRealization noise(seed, r, dt, static_cast<int>(model.size()), D);
    FlowIntegrator<D> integ(model, {amplitude, 0.0, opt.scheme});
    IncrementBlock block;
    Vec<D> x = initial_condition<D>(seed, r).first;
    Mat<D> j = Mat<D>::Identity();
    double lg = 0.0, l_half = 0.0;
    for (std::int64_t n = 0; n < nsteps; ++n) {
      noise.fill(static_cast<std::uint64_t>(n), block);
      integ.begin_step(block);
      integ.advance(x, &j, nullptr, nullptr);
      if ((n + 1) % opt.qr_every == 0 || n + 1 == half || n + 1 == nsteps) lg += qr_renormalize_matrix<D>(j);
      if (n + 1 == half) l_half = lg;
    }
    early[r] = l_half / t_half;
    late[r] = (lg - l_half) / (T - t_half);
  });

  LyapunovEstimate est;
  const auto ms = mean_and_se(late);
  est.lambda1 = ms.mean;
  est.std_error = ms.se;
  est.T = T;
  est.dt = dt;
  est.realizations = n_realizations;
  est.finite_time = std::move(late);
  est.burn_in_drift = mean_and_se(early).mean - est.lambda1;
  return est;
}

struct MomentLyapunovCurve {
  std::vector<double> p;
  std::vector<double> Lambda;
  std::vector<double> std_error;
  std::vector<bool> ess_collapsed;  // max weight above half the total
  double T = 0.0;
  double dt = 0.0;
  /// accumulated log |J v| per sample at T and at T/2
  std::vector<double> log_growth;
  std::vector<double> log_growth_half;

  std::size_t index_of(double q) const {
    for (std::size_t i = 0; i < p.size(); ++i)
      if (std::abs(p[i] - q) < 1e-12) return i;
    throw std::out_of_range("MomentLyapunovCurve: p = " + std::to_string(q) + " not on the grid");
  }
};

namespace detail {

/// -(1/T) log mean exp(-p L), computed stably, plus leave-one-out values.
inline double moment_lambda(const std::vector<double>& L, double p, double T, std::vector<double>* loo = nullptr,
                            double* max_weight_fraction = nullptr) {
  const std::size_t m = L.size();
  double c = -std::numeric_limits<double>::infinity();
  for (double l : L) c = std::max(c, -p * l);
  double s = 0.0, wmax = 0.0;
  std::vector<double> w(m);
  for (std::size_t i = 0; i < m; ++i) {
    w[i] = std::exp(-p * L[i] - c);
    s += w[i];
    wmax = std::max(wmax, w[i]);
  }
  if (max_weight_fraction) *max_weight_fraction = wmax / s;
  if (loo) {
    loo->resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      // floor avoids log(0) when one sample carries all the weight
      const double rest = std::max(s - w[i], s * 1e-300);
      (*loo)[i] = -(std::log(rest / static_cast<double>(m - 1)) + c) / T;
    }
  }
  return -(std::log(s / static_cast<double>(m)) + c) / T;
}

inline double jackknife_se(const std::vector<double>& loo) {
  const double n = static_cast<double>(loo.size());
  const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return std::sqrt((n - 1.0) / n * ss);
}

}  // namespace detail

struct MomentOptions {
  int workers = 1;
  std::size_t min_samples = 1000;
};

/// Each sample starts from an independent uniform (x, v) with its own noise
/// and tracks the unit tangent; L_m = log |J_T v|.
template <int D>
MomentLyapunovCurve estimate_moment_lyapunov(const VelocityModel<D>& model, double amplitude,
                                             std::vector<double> p_grid, double T, double dt,
                                             std::size_t n_samples, std::uint64_t seed,
                                             const MomentOptions& opt = {}) {
  if (p_grid.empty()) throw std::invalid_argument("estimate_moment_lyapunov: empty p grid");
  for (double p : p_grid)
    if (!(std::abs(p) <= 1.0)) throw std::invalid_argument("estimate_moment_lyapunov: p must lie in [-1, 1]");
  if (n_samples < opt.min_samples)
    throw std::invalid_argument("estimate_moment_lyapunov: need at least " + std::to_string(opt.min_samples) +
                                " samples");
  const auto nsteps = step_count(T, dt);
  const auto half = nsteps / 2;

  MomentLyapunovCurve curve;
  curve.T = T;
  curve.dt = dt;
  curve.log_growth.resize(n_samples);
  curve.log_growth_half.resize(n_samples);
  parallel_for(n_samples, opt.workers, [&](std::size_t m) {
    const NoiseRealization noise(seed, m, dt, static_cast<int>(model.size()), D);
    FlowIntegrator<D> integ(model, {amplitude, 0.0, Scheme::Heun});
    IncrementBlock block;
    auto [x, v] = initial_condition<D>(seed, m);
    double lg = 0.0;
    for (std::int64_t n = 0; n < nsteps; ++n) {
      noise.fill(static_cast<std::uint64_t>(n), block);
      integ.begin_step(block);
      integ.advance(x, nullptr, &v, &lg);
      if (n + 1 == half) curve.log_growth_half[m] = lg;
    }
    curve.log_growth[m] = lg;
  });

  std::sort(p_grid.begin(), p_grid.end());
  curve.p = p_grid;
  for (double p : curve.p) {
    if (p == 0.0) {
      curve.Lambda.push_back(0.0);
      curve.std_error.push_back(0.0);
      curve.ess_collapsed.push_back(false);
      continue;
    }
    std::vector<double> loo;
    double frac = 0.0;
    curve.Lambda.push_back(detail::moment_lambda(curve.log_growth, p, T, &loo, &frac));
    curve.std_error.push_back(detail::jackknife_se(loo));
    curve.ess_collapsed.push_back(frac > 0.5);
  }
  return curve;
}

/// Value and jackknife SE of sum_j c_j Lambda(p_j) on the stored samples.
/// Terms at p = 0 vanish since Lambda(0) = 0 is imposed.
inline MeanSe moment_combination(const MomentLyapunovCurve& curve, const std::vector<std::pair<double, double>>& terms) {
  const std::size_t m = curve.log_growth.size();
  MeanSe r;
  std::vector<double> loo_sum(m, 0.0), loo;
  for (const auto& [p, c] : terms) {
    if (p == 0.0) continue;
    r.mean += c * detail::moment_lambda(curve.log_growth, p, curve.T, &loo);
    for (std::size_t i = 0; i < m; ++i) loo_sum[i] += c * loo[i];
  }
  r.se = m > 1 ? detail::jackknife_se(loo_sum) : 0.0;
  return r;
}

struct StructureCheck {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct SlopeCheck {
  double slope = 0.0;
  double slope_se = 0.0;
  double lambda1 = 0.0;
  double lambda1_se = 0.0;
  double difference = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<StructureCheck> concavity;  // one per interior grid point
  std::vector<StructureCheck> jensen;     // one per p > 0
  bool all_pass() const {
    auto ok = [](const StructureCheck& c) { return c.pass; };
    return pass && std::all_of(concavity.begin(), concavity.end(), ok) && std::all_of(jensen.begin(), jensen.end(), ok);
  }
};

/// Slope at zero, concavity and the Jensen bound Lambda(p) <= p lambda1.
inline SlopeCheck check_slope_at_zero(const MomentLyapunovCurve& curve, const LyapunovEstimate& lambda1,
                                      double p_small = 0.1) {
  curve.index_of(p_small);
  curve.index_of(-p_small);
  SlopeCheck out;
  const auto s = moment_combination(curve, {{p_small, 0.5 / p_small}, {-p_small, -0.5 / p_small}});
  out.slope = s.mean;
  out.slope_se = s.se;
  out.lambda1 = lambda1.lambda1;
  out.lambda1_se = lambda1.std_error;
  out.difference = std::abs(out.slope - out.lambda1);
  const double combined = std::hypot(out.slope_se, out.lambda1_se);
  out.tolerance = std::max(0.1 * std::abs(out.lambda1), 2.0 * combined);
  out.pass = out.difference <= out.tolerance;

  // Concavity: Lambda at each interior point lies above the chord of its
  // neighbours, up to 2 SE of the (jackknifed) second difference.
  for (std::size_t i = 1; i + 1 < curve.p.size(); ++i) {
    const double p0 = curve.p[i - 1], p1 = curve.p[i], p2 = curve.p[i + 1];
    const double w0 = (p2 - p1) / (p2 - p0), w2 = (p1 - p0) / (p2 - p0);
    const auto d = moment_combination(curve, {{p1, 1.0}, {p0, -w0}, {p2, -w2}});
    StructureCheck c{"concavity@p=" + std::to_string(p1), d.mean, 2.0 * d.se, d.mean >= -2.0 * d.se, {}};
    out.concavity.push_back(c);
  }
  for (std::size_t i = 0; i < curve.p.size(); ++i) {
    const double p = curve.p[i];
    if (p <= 0.0) continue;
    const double bound = p * lambda1.lambda1 + 2.0 * curve.std_error[i];
    out.jensen.push_back({"jensen@p=" + std::to_string(p), curve.Lambda[i], bound, curve.Lambda[i] <= bound, {}});
  }
  return out;
}

struct TwistedEigenResult {
  double Lambda = 0.0;
  double std_error = 0.0;
  double eigenvalue = 0.0;
  int iterations = 0;
  int grid = 0;
  std::vector<double> psi;  // normalized to mean 1; index (i1 * g + i2) * g + ia
  std::vector<double> batch_Lambda;
};

struct TwistedOptions {
  double dt = 5e-3;
  int batches = 8;
  int max_iterations = 10000;
  double tolerance = 1e-13;
  int workers = 1;
};

namespace detail {

struct SparseRows {
  // rows[c] lists (landing cell, weight / samples) pairs
  std::vector<std::vector<std::pair<int, double>>> rows;
};

inline std::pair<double, int> power_iterate(const SparseRows& m, std::vector<double>& psi, int max_iterations,
                                            double tolerance) {
  const std::size_t n = m.rows.size();
  psi.assign(n, 1.0);
  std::vector<double> next(n);
  double mu = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (const auto& [j, w] : m.rows[c]) s += w * psi[j];
      next[c] = s;
    }
    const double mean = std::accumulate(next.begin(), next.end(), 0.0) / static_cast<double>(n);
    if (!(mean > 0.0) || !std::isfinite(mean)) throw NumericalGuardError("power iteration: degenerate operator");
    double change = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      next[c] /= mean;
      change = std::max(change, std::abs(next[c] - psi[c]));
    }
    const double mu_prev = mu;
    mu = mean;  // psi has mean 1, so the mean of P psi is the Rayleigh-type eigenvalue estimate
    psi.swap(next);
    if (change < tolerance && std::abs(mu - mu_prev) < tolerance * mu) return {mu, it};
  }
  throw NumericalGuardError("power iteration did not converge within " + std::to_string(max_iterations) +
                            " iterations");
}

}  // namespace detail

/// Monte Carlo discretization of the twisted semigroup
///   P^p_t psi(x, v) = E[ |Dphi_t(x) v|^(-p) psi(phi_t(x), v_t) ]
/// on g^2 spatial cells times g angle bins in [0, pi) (|Jv| is even in v),
/// followed by power iteration. Lambda = -log(eigenvalue) / T_step.
inline TwistedEigenResult estimate_twisted_eigen(const VelocityModel<2>& model, double amplitude, double p, int grid,
                                                 double T_step, int samples_per_cell, std::uint64_t seed,
                                                 const TwistedOptions& opt = {}) {
  if (grid < 1) throw std::invalid_argument("estimate_twisted_eigen: grid must be positive");
  if (samples_per_cell < opt.batches || samples_per_cell % opt.batches != 0)
    throw std::invalid_argument("estimate_twisted_eigen: samples per cell must be a multiple of the batch count");
  const auto nsteps = step_count(T_step, opt.dt);
  const int g = grid;
  const int cells = g * g * g;
  const double hx = kTwoPi / g, ha = kPi / g;
  auto cell_of = [&](const Vec<2>& x, const Vec<2>& v) {
    double ang = std::atan2(v[1], v[0]);
    if (ang < 0.0) ang += kPi;
    if (ang >= kPi) ang -= kPi;
    const int i1 = std::min(g - 1, static_cast<int>(x[0] / hx));
    const int i2 = std::min(g - 1, static_cast<int>(x[1] / hx));
    const int ia = std::min(g - 1, static_cast<int>(ang / ha));
    return (i1 * g + i2) * g + ia;
  };

  // landing[c * n + s] = (cell, weight)
  const std::size_t total = static_cast<std::size_t>(cells) * static_cast<std::size_t>(samples_per_cell);
  std::vector<std::pair<int, double>> landing(total);
  parallel_for(total, opt.workers, [&](std::size_t idx) {
    const int c = static_cast<int>(idx / samples_per_cell);
    const int i1 = c / (g * g), i2 = (c / g) % g, ia = c % g;
    const GaussianSource src(seed, stream_id(StreamKind::Initial, idx));
    Vec<2> x((i1 + src.uniform(0, 0, 0)) * hx, (i2 + src.uniform(1, 0, 0)) * hx);
    const double ang = (ia + src.uniform(2, 0, 0)) * ha;
    Vec<2> v(std::cos(ang), std::sin(ang));
    const NoiseRealization noise(seed, idx, opt.dt, static_cast<int>(model.size()), 2);
    FlowIntegrator<2> integ(model, {amplitude, 0.0, Scheme::Heun});
    IncrementBlock block;
    double lg = 0.0;
    for (std::int64_t n = 0; n < nsteps; ++n) {
      noise.fill(static_cast<std::uint64_t>(n), block);
      integ.begin_step(block);
      integ.advance(x, nullptr, &v, &lg);
    }
    landing[idx] = {cell_of(x, v), std::exp(-p * lg)};
  });

  auto build = [&](int batch) {
    detail::SparseRows m;
    m.rows.resize(cells);
    const int per = batch < 0 ? samples_per_cell : samples_per_cell / opt.batches;
    for (int c = 0; c < cells; ++c) {
      for (int s = 0; s < samples_per_cell; ++s) {
        if (batch >= 0 && s % opt.batches != batch) continue;
        const auto& [j, w] = landing[static_cast<std::size_t>(c) * samples_per_cell + s];
        m.rows[c].emplace_back(j, w / per);
      }
    }
    return m;
  };

  TwistedEigenResult res;
  res.grid = g;
  const auto [mu, iters] = detail::power_iterate(build(-1), res.psi, opt.max_iterations, opt.tolerance);
  res.eigenvalue = mu;
  res.iterations = iters;
  res.Lambda = -std::log(mu) / T_step;
  std::vector<double> scratch;
  for (int b = 0; b < opt.batches; ++b) {
    const double mb = detail::power_iterate(build(b), scratch, opt.max_iterations, opt.tolerance).first;
    res.batch_Lambda.push_back(-std::log(mb) / T_step);
  }
  res.std_error = mean_and_se(res.batch_Lambda).se;
  return res;
}

}  // namespace transportlab
