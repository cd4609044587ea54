#pragma once

// Two-point motion diagnostics and Lagrangian mixing pairings.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "transportlab/decay.hpp"
#include "transportlab/flow.hpp"
#include "transportlab/parallel.hpp"
#include "transportlab/report.hpp"
#include "transportlab/trig_series.hpp"

namespace transportlab {

/// Product observable psi(x, y) = f(x) g(y).
template <int D> struct ProductObservable {
  TrigSeries<D> f;
  TrigSeries<D> g;
  double operator()(const Vec<D>& x, const Vec<D>& y) const { return f(x) * g(y); }
};

/// cos(x^1) cos(y^1)
template <int D> ProductObservable<D> cos_cos_observable() {
  TrigSeries<D> c;
  c.terms.push_back({1.0, Wavevector<D>::Unit(0), Phase::Cos});
  return {c, c};
}

/// Mean of psi over T^D x T^D by a midpoint rule with q points per axis
/// (exact for trigonometric polynomials of degree < q).
template <int D> double quadrature_mean(const ProductObservable<D>& psi, int q = 16) {
  auto mean_of = [q](const TrigSeries<D>& f) {
    std::size_t total = 1;
    for (int i = 0; i < D; ++i) total *= static_cast<std::size_t>(q);
    double s = 0.0;
    for (std::size_t idx = 0; idx < total; ++idx) {
      Vec<D> x;
      std::size_t r = idx;
      for (int i = 0; i < D; ++i) {
        x[i] = (static_cast<double>(r % q) + 0.5) * kTwoPi / q;
        r /= q;
      }
      s += f(x);
    }
    return s / static_cast<double>(total);
  };
  return mean_of(psi.f) * mean_of(psi.g);
}

struct TwoPointOptions {
  double T = 10.0;
  double dt = 1e-2;
  int snapshot_every = 10;
  int workers = 1;
  Scheme scheme = Scheme::Heun;
  /// test-only misuse toggle: drive the two particles with independent noise
  bool independent_noise = false;
  bool keep_samples = true;
};

namespace detail {

/// Runs M independent realizations of the pair (x_t, y_t) and hands each
/// snapshot to `record(realization, snapshot index, x_t, y_t)`.
template <int D, class Record>
void run_pairs(const VelocityModel<D>& model, double amplitude, double kappa, const Vec<D>& x0, const Vec<D>& y0,
               std::size_t M, std::uint64_t seed, const TwoPointOptions& opt, Record&& record) {
  const auto nsteps = step_count(opt.T, opt.dt);
  const auto K = static_cast<int>(model.size());
  parallel_for(M, opt.workers, [&](std::size_t r) {
    Vec<D> x = wrap<D>(x0), y = wrap<D>(y0);
    FlowIntegrator<D> ix(model, {amplitude, kappa, opt.scheme}), iy(model, {amplitude, kappa, opt.scheme});
    IncrementBlock bx, by;
    record(r, 0, x, y);
    std::size_t snap = 1;
    if (!opt.independent_noise) {
      const NoiseRealization noise(seed, r, opt.dt, K, D);
      for (std::int64_t n = 0; n < nsteps; ++n) {
        noise.fill(static_cast<std::uint64_t>(n), bx);
        ix.begin_step(bx);
        ix.advance(x);
        ix.advance(y);
        if ((n + 1) % opt.snapshot_every == 0 || n + 1 == nsteps) record(r, snap++, x, y);
      }
    } else {
      const NoiseRealization nx(seed, 2 * r, opt.dt, K, D), ny(seed, 2 * r + 1, opt.dt, K, D);
      for (std::int64_t n = 0; n < nsteps; ++n) {
        nx.fill(static_cast<std::uint64_t>(n), bx);
        ny.fill(static_cast<std::uint64_t>(n), by);
        ix.begin_step(bx);
        iy.begin_step(by);
        ix.advance(x);
        iy.advance(y);
        if ((n + 1) % opt.snapshot_every == 0 || n + 1 == nsteps) record(r, snap++, x, y);
      }
    }
  });
}

inline std::vector<double> snapshot_times(double T, double dt, int every) {
  const auto nsteps = step_count(T, dt);
  std::vector<double> t{0.0};
  for (std::int64_t n = 0; n < nsteps; ++n)
    if ((n + 1) % every == 0 || n + 1 == nsteps) t.push_back(static_cast<double>(n + 1) * dt);
  return t;
}

/// Mean and SE over realizations of samples[m][i].
inline void reduce_samples(DecaySeries& s, const std::vector<std::vector<double>>& samples) {
  const std::size_t m = samples.size(), n = s.times.size();
  s.values.assign(n, 0.0);
  s.std_error.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m; ++r) mean += samples[r][i];
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t r = 0; r < m; ++r) ss += (samples[r][i] - mean) * (samples[r][i] - mean);
    s.values[i] = mean;
    s.std_error[i] = m > 1 ? std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m)) : 0.0;
  }
}

}  // namespace detail

/// E[d(x_t, y_t)^(-p)] for each p, under shared noise. Returned series are
/// not fitted; use fit_auto or fit_window.
template <int D>
std::vector<DecaySeries> two_point_moments(const VelocityModel<D>& model, double amplitude, double kappa,
                                           const Vec<D>& x, const Vec<D>& y, const std::vector<double>& p_list,
                                           std::size_t M, std::uint64_t seed, const TwoPointOptions& opt = {}) {
  if (torus_distance<D>(x, y) == 0.0) throw std::invalid_argument("two_point_moments: x and y coincide");
  if (p_list.empty()) throw std::invalid_argument("two_point_moments: empty p list");
  for (double p : p_list)
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("two_point_moments: p must lie in (0, 1]");
  if (M < 2) throw std::invalid_argument("two_point_moments: need at least 2 realizations");
  const auto times = detail::snapshot_times(opt.T, opt.dt, opt.snapshot_every);
  // dist[r][i]
  std::vector<std::vector<double>> dist(M, std::vector<double>(times.size()));
  detail::run_pairs<D>(model, amplitude, kappa, x, y, M, seed, opt,
                       [&](std::size_t r, std::size_t i, const Vec<D>& a, const Vec<D>& b) {
                         dist[r][i] = torus_distance<D>(a, b);
                       });
  std::vector<DecaySeries> out;
  for (double p : p_list) {
    DecaySeries s;
    s.times = times;
    std::vector<std::vector<double>> samples(M, std::vector<double>(times.size()));
    for (std::size_t r = 0; r < M; ++r)
      for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(dist[r][i] > 0.0)) throw NumericalGuardError("two_point_moments: particles collided");
        samples[r][i] = std::pow(dist[r][i], -p);
      }
    detail::reduce_samples(s, samples);
    if (opt.keep_samples) s.samples = std::move(samples);
    out.push_back(std::move(s));
  }
  return out;
}

/// Fits E[d_t^-p] over the initial run of snapshots whose moment-implied
/// separation (E d^-p)^(-1/p) stays at or below max_separation, where the
/// pair still moves like a tangent vector.
inline void fit_small_separation(DecaySeries& s, double p, double max_separation) {
  if (!(p > 0.0) || !(max_separation > 0.0))
    throw std::invalid_argument("fit_small_separation: p and max_separation must be positive");
  const double threshold = std::pow(max_separation, -p);
  std::size_t e = 0;
  while (e < s.values.size() && s.values[e] >= threshold) ++e;
  if (e < 3) {
    s.fit.reset();
    s.window_begin = s.window_end = 0;
    s.note = "separation exceeds " + std::to_string(max_separation) + " before 3 snapshots";
    return;
  }
  fit_window(s, s.times.front(), s.times[e - 1]);
}

struct DriftRecord {
  double separation = 0.0;
  double rho = 0.0;  // E[d_t*^-p] / delta^-p
  double rho_se = 0.0;
};

struct DriftCheck {
  double p = 0.0;
  double t_star = 0.0;
  double expected_small = 0.0;  // exp(-Lambda(p) A^2 t*) when a reference is given
  std::vector<DriftRecord> records;
  double rho_max = 0.0;
  double plateau = 0.0;  // E[d_t*^-p] at the largest separation
  bool small_separation_ok = true;
};

/// rho(delta) = E[d_t*^(-p)] / delta^(-p) for pairs started at separation
/// delta along e1 from x0. With lambda_p (the moment Lyapunov value at unit
/// amplitude) the smallest delta is compared against exp(-lambda_p A^2 t*)
/// within a factor `factor`.
template <int D>
DriftCheck vp_drift_check(const VelocityModel<D>& model, double amplitude, double kappa, double p,
                          const std::vector<double>& separations, double t_star, std::size_t M, std::uint64_t seed,
                          std::optional<double> lambda_p = std::nullopt, double factor = 1.5, double dt = 1e-2,
                          int workers = 1) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("vp_drift_check: p must lie in (0, 1]");
  if (separations.empty()) throw std::invalid_argument("vp_drift_check: no separations");
  DriftCheck out;
  out.p = p;
  out.t_star = t_star;
  const Vec<D> x0 = Vec<D>::Constant(1.0);
  TwoPointOptions opt;
  opt.T = t_star;
  opt.dt = dt;
  opt.snapshot_every = static_cast<int>(step_count(t_star, dt));
  opt.workers = workers;
  opt.keep_samples = false;
  std::vector<double> seps = separations;
  std::sort(seps.begin(), seps.end());
  for (double delta : seps) {
    const Vec<D> y0 = x0 + delta * Vec<D>::Unit(0);
    const auto s = two_point_moments<D>(model, amplitude, kappa, x0, y0, {p}, M, seed, opt)[0];
    const double norm = std::pow(delta, -p);
    out.records.push_back({delta, s.values.back() / norm, s.std_error.back() / norm});
    out.rho_max = std::max(out.rho_max, out.records.back().rho);
  }
  out.plateau = out.records.back().rho * std::pow(seps.back(), -p);
  if (lambda_p) {
    out.expected_small = std::exp(-*lambda_p * amplitude * amplitude * t_star);
    const double r = out.records.front().rho / out.expected_small;
    out.small_separation_ok = r <= factor && r >= 1.0 / factor;
  }
  return out;
}

/// |E psi(x_t, y_t)| with Monte Carlo SE, fitted on the automatic window.
template <int D>
DecaySeries correlation_decay(const VelocityModel<D>& model, double amplitude, double kappa,
                              const ProductObservable<D>& psi, const Vec<D>& x, const Vec<D>& y, std::size_t M,
                              std::uint64_t seed, const TwoPointOptions& opt = {}, WindowOptions window = {}) {
  if (std::abs(quadrature_mean<D>(psi)) > 1e-10)
    throw std::invalid_argument("correlation_decay: observable is not mean-zero");
  if (M < 2) throw std::invalid_argument("correlation_decay: need at least 2 realizations");
  DecaySeries s;
  s.times = detail::snapshot_times(opt.T, opt.dt, opt.snapshot_every);
  std::vector<std::vector<double>> samples(M, std::vector<double>(s.times.size()));
  detail::run_pairs<D>(model, amplitude, kappa, x, y, M, seed, opt,
                       [&](std::size_t r, std::size_t i, const Vec<D>& a, const Vec<D>& b) {
                         samples[r][i] = psi(a, b);
                       });
  detail::reduce_samples(s, samples);
  s.samples = std::move(samples);
  window.absolute = true;
  fit_auto(s, window);
  return s;
}

// ---------------------------------------------------------------------------
// Lagrangian pairings  c_z(t) = (2 pi)^-D  int u(x) exp(-i z . phi_t(x)) dx.

template <int D> struct PairingSeries {
  std::vector<double> times;
  std::vector<Wavevector<D>> wavevectors;            // all z != 0 with |z|_inf <= z_cut
  std::vector<std::vector<std::complex<double>>> c;  // c[time][z]
  int quadrature = 0;
  int inner_samples = 1;
  double mean_square = 0.0;  // mean of u^2 over the quadrature grid

  /// sum_z (1 + |z|^2)^(-s) |c_z|^2 at each time
  std::vector<double> sobolev_proxy(double s) const {
    std::vector<double> out(times.size(), 0.0);
    for (std::size_t t = 0; t < times.size(); ++t)
      for (std::size_t k = 0; k < wavevectors.size(); ++k)
        out[t] += std::pow(1.0 + wavevectors[k].template cast<double>().squaredNorm(), -s) * std::norm(c[t][k]);
    return out;
  }

  /// Expected proxy for a fully scrambled cloud: each c_z behaves like a sum
  /// of Q^D random phases weighted by u.
  double quadrature_floor(double s) const {
    double w = 0.0;
    for (const auto& z : wavevectors) w += std::pow(1.0 + z.template cast<double>().squaredNorm(), -s);
    double n = 1.0;
    for (int i = 0; i < D; ++i) n *= quadrature;
    return w * mean_square / n;
  }
};

template <int D> std::vector<Wavevector<D>> wavevector_box(int z_cut) {
  std::vector<Wavevector<D>> out;
  Wavevector<D> z = Wavevector<D>::Constant(-z_cut);
  while (true) {
    if (!z.isZero()) out.push_back(z);
    int i = D - 1;
    while (i >= 0 && z[i] == z_cut) z[i--] = -z_cut;
    if (i < 0) break;
    ++z[i];
  }
  return out;
}

struct PairingOptions {
  double T = 20.0;
  double dt = 2e-2;
  int snapshot_every = 25;
  int workers = 1;
  /// which transport realization drives the cloud
  std::uint64_t realization = 0;
  /// skip the mean-zero and Q >= 4 z_cut preconditions (tests of u = 1)
  bool allow_mean = false;
};

namespace detail {

template <int D>
void accumulate_pairings(const std::vector<Vec<D>>& pts, const std::vector<double>& u,
                         const std::vector<Wavevector<D>>& zs, int z_cut, std::vector<std::complex<double>>& acc) {
  // powers[d][z_cut + h] = exp(-i h x_d)
  std::vector<std::array<std::complex<double>, D>> pw(2 * z_cut + 1);
  for (std::size_t q = 0; q < pts.size(); ++q) {
    for (int d = 0; d < D; ++d) {
      const std::complex<double> e(std::cos(pts[q][d]), -std::sin(pts[q][d]));
      pw[z_cut][d] = 1.0;
      for (int h = 1; h <= z_cut; ++h) {
        pw[z_cut + h][d] = pw[z_cut + h - 1][d] * e;
        pw[z_cut - h][d] = std::conj(pw[z_cut + h][d]);
      }
    }
    for (std::size_t k = 0; k < zs.size(); ++k) {
      std::complex<double> e = pw[z_cut + zs[k][0]][0];
      for (int d = 1; d < D; ++d) e *= pw[z_cut + zs[k][d]][d];
      acc[k] += u[q] * e;
    }
  }
}

}  // namespace detail

/// Advects the Q^D midpoint quadrature cloud under one transport realization.
/// For kappa > 0 the pairing is averaged over inner_samples independent
/// viscous paths; each viscous path is one D-dimensional Brownian motion
/// shared by all points (the coordinate fields are constant).
template <int D>
PairingSeries<D> mixing_pairing(const VelocityModel<D>& model, double amplitude, double kappa,
                                const std::function<double(const Vec<D>&)>& u, double u_mean, int z_cut, int Q,
                                int inner_samples, std::uint64_t seed, const PairingOptions& opt = {}) {
  if (z_cut < 1) throw std::invalid_argument("mixing_pairing: z_cut must be positive");
  if (!opt.allow_mean) {
    if (std::abs(u_mean) > 1e-12) throw std::invalid_argument("mixing_pairing: u must be mean-zero");
    if (Q < 4 * z_cut) throw std::invalid_argument("mixing_pairing: Q must be at least 4 z_cut");
  }
  if (inner_samples < 1) throw std::invalid_argument("mixing_pairing: inner_samples must be positive");
  const int S = kappa > 0.0 ? inner_samples : 1;

  PairingSeries<D> out;
  out.quadrature = Q;
  out.inner_samples = S;
  out.wavevectors = wavevector_box<D>(z_cut);
  out.times = detail::snapshot_times(opt.T, opt.dt, opt.snapshot_every);
  std::size_t npts = 1;
  for (int i = 0; i < D; ++i) npts *= static_cast<std::size_t>(Q);
  std::vector<Vec<D>> x0(npts);
  std::vector<double> u0(npts);
  double ms = 0.0;
  for (std::size_t idx = 0; idx < npts; ++idx) {
    std::size_t r = idx;
    for (int i = 0; i < D; ++i) {
      x0[idx][i] = (static_cast<double>(r % Q) + 0.5) * kTwoPi / Q;
      r /= Q;
    }
    u0[idx] = u(x0[idx]);
    ms += u0[idx] * u0[idx];
  }
  out.mean_square = ms / static_cast<double>(npts);

  const auto nsteps = step_count(opt.T, opt.dt);
  const auto nz = out.wavevectors.size();
  // per inner sample: c[time][z]
  std::vector<std::vector<std::vector<std::complex<double>>>> per(S);
  parallel_for(static_cast<std::size_t>(S), opt.workers, [&](std::size_t s) {
    const NoiseRealization noise(seed, opt.realization, opt.dt, static_cast<int>(model.size()), D, 0, s);
    FlowIntegrator<D> integ(model, {amplitude, kappa, Scheme::Heun});
    IncrementBlock block;
    std::vector<Vec<D>> pts = x0;
    auto& series = per[s];
    auto snap = [&] {
      std::vector<std::complex<double>> acc(nz, 0.0);
      detail::accumulate_pairings<D>(pts, u0, out.wavevectors, z_cut, acc);
      for (auto& a : acc) a /= static_cast<double>(npts);
      series.push_back(std::move(acc));
    };
    snap();
    for (std::int64_t n = 0; n < nsteps; ++n) {
      noise.fill(static_cast<std::uint64_t>(n), block);
      integ.begin_step(block);
      for (auto& p : pts) integ.advance(p);
      if ((n + 1) % opt.snapshot_every == 0 || n + 1 == nsteps) snap();
    }
  });
  out.c.assign(out.times.size(), std::vector<std::complex<double>>(nz, 0.0));
  for (int s = 0; s < S; ++s)
    for (std::size_t t = 0; t < out.times.size(); ++t)
      for (std::size_t k = 0; k < nz; ++k) out.c[t][k] += per[s][t][k] / static_cast<double>(S);
  return out;
}

/// H^-s proxy series over a set of pairing runs: mean and SE across runs,
/// fitted on the automatic window with the quadrature floor as noise scale.
template <int D>
DecaySeries proxy_series(const std::vector<PairingSeries<D>>& runs, double s, WindowOptions window = {}) {
  if (runs.empty()) throw std::invalid_argument("proxy_series: no runs");
  DecaySeries out;
  std::vector<std::vector<double>> samples;
  for (const auto& run : runs) samples.push_back(run.sobolev_proxy(s));
  out.times = runs.front().times;
  detail::reduce_samples(out, samples);
  if (runs.size() > 1) out.samples = std::move(samples);
  window.floor = std::max(window.floor, runs.front().quadrature_floor(s));
  window.absolute = true;
  fit_auto(out, window);
  return out;
}

/// H^(-s) proxy of u_t averaged over `realizations` transport realizations,
/// with SE across realizations, fitted on the automatic window (noise scale:
/// max(SE, quadrature floor)).
template <int D>
DecaySeries mixing_decay(const VelocityModel<D>& model, double amplitude, double kappa, const TrigSeries<D>& u,
                         int z_cut, int Q, int inner_samples, std::size_t realizations, double s,
                         std::uint64_t seed, PairingOptions opt = {}, WindowOptions window = {},
                         std::vector<PairingSeries<D>>* keep = nullptr) {
  if (realizations < 1) throw std::invalid_argument("mixing_decay: need at least one realization");
  const int workers = opt.workers;
  // parallelism goes to the inner samples when there are several of them,
  // otherwise to the realizations
  const bool inner_parallel = kappa > 0.0 && inner_samples > 1;
  std::vector<PairingSeries<D>> runs(realizations);
  auto body = [&](std::size_t r) {
    PairingOptions o = opt;
    o.realization = r;
    o.workers = inner_parallel ? workers : 1;
    runs[r] = mixing_pairing<D>(model, amplitude, kappa, u, u.mean(), z_cut, Q, inner_samples, seed, o);
  };
  if (inner_parallel)
    for (std::size_t r = 0; r < realizations; ++r) body(r);
  else
    parallel_for(realizations, workers, body);
  DecaySeries out = proxy_series<D>(runs, s, window);
  if (keep) *keep = std::move(runs);
  return out;
}

}  // namespace transportlab
