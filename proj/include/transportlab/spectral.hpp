#pragma once

// Pseudo-spectral solver on T^2 for
//   du + A sum_k <sigma_k, grad u> o dW^k = (kappa Lap u + C u) dt.
// Convention: u(x) = sum_z uhat(z) e^{i z.x}, ||u||^2 = sum_z |uhat(z)|^2
// (normalized measure), uhat = FFT / N^2.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "transportlab/decay.hpp"
#include "transportlab/fields.hpp"
#include "transportlab/flow.hpp"
#include "transportlab/noise.hpp"
#include "transportlab/parallel.hpp"
#include "transportlab/trig_series.hpp"

namespace transportlab {

using cplx = std::complex<double>;

namespace detail {

// the FFTW planner is not thread-safe; execution with the new-array API is
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T> struct FftwFree {
  void operator()(T* p) const { fftw_free(p); }
};
template <class T> using FftwBuffer = std::unique_ptr<T[], FftwFree<T>>;

template <class T> FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

}  // namespace detail

/// r2c / c2r plans for one N x N grid. Arrays passed to forward/inverse must
/// come from fftw_malloc (alignment), as all buffers in this header do.
class Fft2D {
 public:
  explicit Fft2D(int N) : N_(N) {
    if (N < 4 || (N & (N - 1)) != 0) throw std::invalid_argument("Fft2D: N must be a power of two >= 4");
    auto r = detail::fftw_buffer<double>(real_size());
    auto c = detail::fftw_buffer<fftw_complex>(complex_size());
    std::lock_guard lock(detail::fftw_planner_mutex());
    fwd_ = fftw_plan_dft_r2c_2d(N, N, r.get(), c.get(), FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_2d(N, N, c.get(), r.get(), FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
    if (!fwd_ || !inv_) throw std::runtime_error("Fft2D: planning failed");
  }
  ~Fft2D() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  Fft2D(const Fft2D&) = delete;
  Fft2D& operator=(const Fft2D&) = delete;

  int N() const { return N_; }
  std::size_t real_size() const { return static_cast<std::size_t>(N_) * N_; }
  std::size_t complex_size() const { return static_cast<std::size_t>(N_) * (N_ / 2 + 1); }

  /// out = FFT(in) / N^2
  void forward(double* in, cplx* out) const {
    fftw_execute_dft_r2c(fwd_, in, reinterpret_cast<fftw_complex*>(out));
    const double s = 1.0 / static_cast<double>(real_size());
    for (std::size_t i = 0; i < complex_size(); ++i) out[i] *= s;
  }
  /// out(x) = sum uhat e^{iz.x}; destroys `in`
  void inverse(cplx* in, double* out) const { fftw_execute_dft_c2r(inv_, reinterpret_cast<fftw_complex*>(in), out); }

 private:
  int N_;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

/// Mean-zero-friendly scalar field on the N x N grid, stored by its Fourier
/// half-spectrum: entry (k1, k2) with k1 in [0, N), k2 in [0, N/2].
/// Grid point (i1, i2) sits at x = 2 pi (i1, i2) / N.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(int N) : N_(N), hat_(static_cast<std::size_t>(N) * (N / 2 + 1), cplx(0.0)) {
    if (N < 4 || (N & (N - 1)) != 0) throw std::invalid_argument("SpectralField: N must be a power of two >= 4");
  }

  int N() const { return N_; }
  int half() const { return N_ / 2 + 1; }
  std::vector<cplx>& hat() { return hat_; }
  const std::vector<cplx>& hat() const { return hat_; }

  /// signed wavenumber of row / column index
  int wavenumber(int k) const { return k <= N_ / 2 - 1 ? k : k - N_; }
  int row_wavenumber(int k1) const { return wavenumber(k1); }
  int col_wavenumber(int k2) const { return k2 == N_ / 2 ? -N_ / 2 : k2; }

  /// multiplicity of a stored entry in the full lattice sum
  double weight(int k2) const { return (k2 == 0 || k2 == N_ / 2) ? 1.0 : 2.0; }

  /// uhat(z) for any z in [-N/2, N/2)^2
  cplx coefficient(int z1, int z2) const {
    if (std::max(std::abs(z1), std::abs(z2)) > N_ / 2 || z1 == N_ / 2 || z2 == N_ / 2)
      throw std::out_of_range("SpectralField: wavevector outside [-N/2, N/2)^2");
    const int k1 = (z1 + N_) % N_, k2 = (z2 + N_) % N_;
    if (k2 <= N_ / 2) return hat_[idx(k1, k2)];
    return std::conj(hat_[idx((N_ - k1) % N_, N_ - k2)]);
  }

  template <class F> static SpectralField from_function(int N, F&& f) {
    SpectralField u(N);
    Fft2D fft(N);
    auto r = detail::fftw_buffer<double>(fft.real_size());
    auto c = detail::fftw_buffer<cplx>(fft.complex_size());
    for (int i1 = 0; i1 < N; ++i1)
      for (int i2 = 0; i2 < N; ++i2)
        r[static_cast<std::size_t>(i1) * N + i2] = f(Vec<2>(kTwoPi * i1 / N, kTwoPi * i2 / N));
    fft.forward(r.get(), c.get());
    std::copy(c.get(), c.get() + fft.complex_size(), u.hat_.begin());
    return u;
  }

  /// Exact coefficients of a trigonometric series (harmonics must be < N/2).
  static SpectralField from_trig(int N, const TrigSeries<2>& f) {
    SpectralField u(N);
    if (f.max_harmonic() >= N / 2) throw std::invalid_argument("SpectralField: harmonic above N/2 - 1");
    for (const auto& t : f.terms) {
      // cos: e^{iz.x}/2 + e^{-iz.x}/2;  sin: -i/2 e^{iz.x} + i/2 e^{-iz.x}
      const cplx c = t.phase == Phase::Cos ? cplx(0.5 * t.coefficient, 0.0) : cplx(0.0, -0.5 * t.coefficient);
      u.add_mode(t.z[0], t.z[1], c);
      u.add_mode(-t.z[0], -t.z[1], std::conj(c));
    }
    return u;
  }

  /// Adds c to uhat(z) if z lies in the stored half (the caller adds the
  /// conjugate at -z).
  void add_mode(int z1, int z2, cplx c) {
    const int k1 = (z1 % N_ + N_) % N_;
    if (z2 < 0 || z2 > N_ / 2 - 1) return;
    hat_[idx(k1, z2)] += c;
  }

  std::vector<double> physical() const {
    Fft2D fft(N_);
    auto c = detail::fftw_buffer<cplx>(fft.complex_size());
    auto r = detail::fftw_buffer<double>(fft.real_size());
    std::copy(hat_.begin(), hat_.end(), c.get());
    fft.inverse(c.get(), r.get());
    return std::vector<double>(r.get(), r.get() + fft.real_size());
  }

  /// sum_z m(|z|^2) |uhat(z)|^2
  template <class M> double weighted_energy(M&& m) const {
    double s = 0.0;
    for (int k1 = 0; k1 < N_; ++k1) {
      const int z1 = row_wavenumber(k1);
      for (int k2 = 0; k2 < half(); ++k2) {
        const int z2 = col_wavenumber(k2);
        const double n2 = static_cast<double>(z1) * z1 + static_cast<double>(z2) * z2;
        s += weight(k2) * m(n2) * std::norm(hat_[idx(k1, k2)]);
      }
    }
    return s;
  }

  double l2_squared() const { return weighted_energy([](double) { return 1.0; }); }
  double gradient_squared() const { return weighted_energy([](double n2) { return n2; }); }

  /// energy in modes with |z|_inf > cut
  double energy_above(int cut) const {
    double s = 0.0;
    for (int k1 = 0; k1 < N_; ++k1)
      for (int k2 = 0; k2 < half(); ++k2)
        if (std::max(std::abs(row_wavenumber(k1)), std::abs(col_wavenumber(k2))) > cut)
          s += weight(k2) * std::norm(hat_[idx(k1, k2)]);
    return s;
  }

  /// max |uhat(z) - conj(uhat(-z))| over the self-conjugate columns
  double conjugate_symmetry_defect() const {
    double d = 0.0;
    for (int k2 : {0, N_ / 2})
      for (int k1 = 0; k1 < N_; ++k1)
        d = std::max(d, std::abs(hat_[idx(k1, k2)] - std::conj(hat_[idx((N_ - k1) % N_, k2)])));
    return d;
  }

  std::size_t idx(int k1, int k2) const { return static_cast<std::size_t>(k1) * half() + k2; }

 private:
  int N_ = 0;
  std::vector<cplx> hat_;
};

/// (sum_z (1 + |z|^2)^s |uhat(z)|^2)^(1/2)
inline double sobolev_norm(const SpectralField& u, double s) {
  if (s < 0.0 && std::abs(u.hat()[0]) > 1e-12)
    throw std::invalid_argument("sobolev_norm: negative s needs a mean-zero field");
  if (s == 0.0) return std::sqrt(u.l2_squared());
  return std::sqrt(u.weighted_energy([s](double n2) { return std::pow(1.0 + n2, s); }));
}

struct SpdeParams {
  double amplitude = 1.0;
  double kappa = 0.0;
  double C = 0.0;
  double dt = 1e-3;
  /// Transport substeps per step are ceil(max displacement / (dx/2)); a step
  /// needing more than this trips the guard. 1 reproduces the plain CFL rule.
  int max_substeps = 64;
};

/// One-realization time stepper. Per step the velocity is frozen at
/// V = A sum_k sigma_k dW_k, and  u' = -(V/dt).grad u + (kappa Lap + C) u  is
/// integrated over dt by integrating-factor RK4 in substeps; the product is
/// dealiased with the 2/3 rule.
class SpdeSolver {
 public:
  SpdeSolver(const VelocityModel<2>& model, int N, SpdeParams params)
      : model_(&model), params_(params), fft_(N), N_(N), H_(N / 2 + 1), cut_(N / 3) {
    if (!(params.dt > 0.0)) throw std::invalid_argument("SpdeSolver: dt must be positive");
    if (!(params.kappa >= 0.0)) throw std::invalid_argument("SpdeSolver: kappa must be non-negative");
    if (params.max_substeps < 1) throw std::invalid_argument("SpdeSolver: max_substeps must be positive");
    for (const auto& m : model.modes())
      if (m.z.cwiseAbs().maxCoeff() >= N / 2)
        throw std::invalid_argument("SpdeSolver: velocity harmonic " + std::to_string(m.z.cwiseAbs().maxCoeff()) +
                                    " not resolved on N = " + std::to_string(N));
    const std::size_t nc = fft_.complex_size(), nr = fft_.real_size();
    for (auto* b : {&u_, &k1_, &k2_, &k3_, &k4_, &tmp_, &scratch_}) *b = detail::fftw_buffer<cplx>(nc);
    for (auto* b : {&v1_, &v2_, &gx_, &gy_}) *b = detail::fftw_buffer<double>(nr);
    z1_.resize(nc);
    z2_.resize(nc);
    keep_.resize(nc);
    lap_.resize(nc);
    for (int k1 = 0; k1 < N; ++k1)
      for (int k2 = 0; k2 < H_; ++k2) {
        const std::size_t i = static_cast<std::size_t>(k1) * H_ + k2;
        const int a = k1 <= N / 2 - 1 ? k1 : k1 - N, b = k2 == N / 2 ? -N / 2 : k2;
        z1_[i] = a;
        z2_[i] = b;
        keep_[i] = std::max(std::abs(a), std::abs(b)) <= cut_;
        lap_[i] = static_cast<double>(a) * a + static_cast<double>(b) * b;
      }
  }

  int N() const { return N_; }
  const SpdeParams& params() const { return params_; }
  int last_substeps() const { return last_substeps_; }

  /// Advances u by one step with the given transport increments.
  void step(SpectralField& u, std::span<const double> increments) {
    if (u.N() != N_) throw std::invalid_argument("SpdeSolver: field grid mismatch");
    if (increments.size() != model_->size())
      throw std::invalid_argument("SpdeSolver: increments do not match the mode count");
    const std::size_t nc = fft_.complex_size();
    build_velocity(increments);
    const double dx = kTwoPi / N_;
    double vmax = 0.0;
    for (std::size_t i = 0; i < fft_.real_size(); ++i) vmax = std::max(vmax, std::hypot(v1_[i], v2_[i]));
    const int n = std::max(1, static_cast<int>(std::ceil(vmax / (0.5 * dx))));
    if (n > params_.max_substeps)
      throw NumericalGuardError("spde_step: displacement " + std::to_string(vmax) + " needs " + std::to_string(n) +
                                " substeps (limit " + std::to_string(params_.max_substeps) + ")");
    last_substeps_ = n;
    // velocity for the frozen ODE
    const double inv_dt = 1.0 / params_.dt;
    for (std::size_t i = 0; i < fft_.real_size(); ++i) {
      v1_[i] *= inv_dt;
      v2_[i] *= inv_dt;
    }
    const double h = params_.dt / n;
    std::vector<double> e_full(nc), e_half(nc);
    for (std::size_t i = 0; i < nc; ++i) {
      const double g = -params_.kappa * lap_[i] + params_.C;
      e_full[i] = std::exp(g * h);
      e_half[i] = std::exp(g * 0.5 * h);
    }
    std::copy(u.hat().begin(), u.hat().end(), u_.get());
    const bool transport = model_->size() > 0 && vmax > 0.0;
    for (int sub = 0; sub < n; ++sub) {
      if (!transport) {
        for (std::size_t i = 0; i < nc; ++i) u_[i] *= e_full[i];
        continue;
      }
      rhs(u_.get(), k1_.get(), h);
      for (std::size_t i = 0; i < nc; ++i) tmp_[i] = e_half[i] * (u_[i] + 0.5 * k1_[i]);
      rhs(tmp_.get(), k2_.get(), h);
      for (std::size_t i = 0; i < nc; ++i) tmp_[i] = e_half[i] * u_[i] + 0.5 * k2_[i];
      rhs(tmp_.get(), k3_.get(), h);
      for (std::size_t i = 0; i < nc; ++i) tmp_[i] = e_full[i] * u_[i] + e_half[i] * k3_[i];
      rhs(tmp_.get(), k4_.get(), h);
      for (std::size_t i = 0; i < nc; ++i)
        u_[i] = e_full[i] * u_[i] + (e_full[i] * k1_[i] + 2.0 * e_half[i] * (k2_[i] + k3_[i]) + k4_[i]) / 6.0;
    }
    for (std::size_t i = 0; i < nc; ++i) {
      if (!keep_[i]) u_[i] = 0.0;
      if (!std::isfinite(u_[i].real()) || !std::isfinite(u_[i].imag()))
        throw NumericalGuardError("spde_step: non-finite coefficient (blow-up)");
    }
    std::copy(u_.get(), u_.get() + nc, u.hat().begin());
  }

 private:
  // V = A sum_k dW_k sigma_k on the grid, via its Fourier coefficients
  void build_velocity(std::span<const double> dw) {
    const std::size_t nc = fft_.complex_size();
    std::fill(k1_.get(), k1_.get() + nc, cplx(0.0));
    std::fill(k2_.get(), k2_.get() + nc, cplx(0.0));
    auto put = [&](int z1, int z2, cplx c, const Vec<2>& a) {
      if (z2 < 0 || z2 > N_ / 2 - 1) return;
      const std::size_t i = static_cast<std::size_t>((z1 % N_ + N_) % N_) * H_ + z2;
      k1_[i] += c * a[0];
      k2_[i] += c * a[1];
    };
    for (std::size_t k = 0; k < model_->size(); ++k) {
      const auto& m = model_->mode(k);
      const double w = params_.amplitude * m.amplitude * dw[k];
      const cplx c = m.phase == Phase::Cos ? cplx(0.5 * w, 0.0) : cplx(0.0, -0.5 * w);
      put(m.z[0], m.z[1], c, m.polarization);
      put(-m.z[0], -m.z[1], std::conj(c), m.polarization);
    }
    fft_.inverse(k1_.get(), v1_.get());
    fft_.inverse(k2_.get(), v2_.get());
  }

  // out = -h * P[(V/dt).grad u], P the 2/3 projection
  void rhs(const cplx* in, cplx* out, double h) {
    const std::size_t nc = fft_.complex_size(), nr = fft_.real_size();
    for (std::size_t i = 0; i < nc; ++i) scratch_[i] = cplx(0.0, z1_[i]) * in[i];
    fft_.inverse(scratch_.get(), gx_.get());
    for (std::size_t i = 0; i < nc; ++i) scratch_[i] = cplx(0.0, z2_[i]) * in[i];
    fft_.inverse(scratch_.get(), gy_.get());
    for (std::size_t i = 0; i < nr; ++i) gx_[i] = v1_[i] * gx_[i] + v2_[i] * gy_[i];
    fft_.forward(gx_.get(), out);
    for (std::size_t i = 0; i < nc; ++i) out[i] = keep_[i] ? -h * out[i] : cplx(0.0);
    if (model_->divergence_free()) out[0] = 0.0;
  }

  const VelocityModel<2>* model_;
  SpdeParams params_;
  Fft2D fft_;
  int N_, H_, cut_;
  int last_substeps_ = 0;
  detail::FftwBuffer<cplx> u_, k1_, k2_, k3_, k4_, tmp_, scratch_;
  detail::FftwBuffer<double> v1_, v2_, gx_, gy_;
  std::vector<double> z1_, z2_, lap_;
  std::vector<char> keep_;
};

/// Single step with a throwaway solver; for repeated steps keep an SpdeSolver.
inline SpectralField spde_step(SpectralField u, const VelocityModel<2>& model, std::span<const double> increments,
                               double dt, double amplitude, double kappa, double C, int max_substeps = 64) {
  SpdeSolver solver(model, u.N(), {amplitude, kappa, C, dt, max_substeps});
  solver.step(u, increments);
  return u;
}

struct SpdeHistory {
  std::vector<double> times;
  std::vector<double> l2_squared;
  std::vector<double> gradient_squared;
  std::vector<double> hminus1;  // ||u||_{H^-1}
  int max_substeps_used = 0;
  double kappa = 0.0;
  double C = 0.0;
};

struct SpdeRunOptions {
  double T = 1.0;
  int N = 64;
  SpdeParams params;
};

/// Runs one realization (noise stream `realization` of `seed`), recording the
/// norms after every step.
inline SpdeHistory run_spde(const VelocityModel<2>& model, SpectralField u, const SpdeRunOptions& opt,
                            std::uint64_t seed, std::uint64_t realization, SpectralField* final_field = nullptr) {
  if (u.N() != opt.N) throw std::invalid_argument("run_spde: field grid does not match N");
  SpdeSolver solver(model, opt.N, opt.params);
  const auto nsteps = step_count(opt.T, opt.params.dt);
  const NoiseRealization noise(seed, realization, opt.params.dt, static_cast<int>(model.size()), 2);
  IncrementBlock block;
  SpdeHistory h;
  h.kappa = opt.params.kappa;
  h.C = opt.params.C;
  auto record = [&](double t) {
    h.times.push_back(t);
    h.l2_squared.push_back(u.l2_squared());
    h.gradient_squared.push_back(u.gradient_squared());
    h.hminus1.push_back(std::abs(u.hat()[0]) > 1e-12 ? std::numeric_limits<double>::quiet_NaN()
                                                     : sobolev_norm(u, -1.0));
  };
  record(0.0);
  for (std::int64_t n = 0; n < nsteps; ++n) {
    noise.fill(static_cast<std::uint64_t>(n), block);
    solver.step(u, block.transport);
    h.max_substeps_used = std::max(h.max_substeps_used, solver.last_substeps());
    record(static_cast<double>(n + 1) * opt.params.dt);
  }
  if (final_field) *final_field = std::move(u);
  return h;
}

struct EnergyBalance {
  std::vector<double> residual;  // r(t) / ||u_0||^2
  double max_relative = 0.0;
};

/// r(t) = ||u0||^2 - ||u_t||^2 - 2 kappa int ||grad u||^2 + 2 C int ||u||^2
/// (trapezoid rule), relative to ||u0||^2.
inline EnergyBalance energy_balance(const SpdeHistory& h) {
  if (h.times.size() < 2 || h.l2_squared.size() != h.times.size() || h.gradient_squared.size() != h.times.size())
    throw std::invalid_argument("energy_balance: history needs L2 and H1 norms at two or more times");
  EnergyBalance e;
  const double e0 = h.l2_squared.front();
  if (!(e0 > 0.0)) throw std::invalid_argument("energy_balance: zero initial energy");
  double integral = 0.0;
  e.residual.push_back(0.0);
  for (std::size_t i = 1; i < h.times.size(); ++i) {
    const double dt = h.times[i] - h.times[i - 1];
    const double f0 = 2.0 * h.kappa * h.gradient_squared[i - 1] - 2.0 * h.C * h.l2_squared[i - 1];
    const double f1 = 2.0 * h.kappa * h.gradient_squared[i] - 2.0 * h.C * h.l2_squared[i];
    integral += 0.5 * dt * (f0 + f1);
    const double r = (e0 - h.l2_squared[i] - integral) / e0;
    e.residual.push_back(r);
    e.max_relative = std::max(e.max_relative, std::abs(r));
  }
  return e;
}

struct SweepOptions {
  int N = 64;
  double kappa = 0.01;
  double C = 0.0;
  double T = 20.0;
  double dt = 1e-3;
  std::size_t realizations = 4;
  int record_every = 100;
  /// fit window as fractions of T
  double fit_begin = 0.5;
  double fit_end = 1.0;
  int max_substeps = 64;
  int workers = 1;
  /// how many of the largest nonzero amplitudes enter the exponent fit
  int exponent_points = 3;
};

struct SweepEntry {
  double amplitude = 0.0;
  DecaySeries series;  // median over realizations of ||u_t|| / ||u_0||
  int max_substeps_used = 0;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  bool increasing = false;
  double exponent = std::numeric_limits<double>::quiet_NaN();  // q in gamma ~ A^q
};

/// L2 decay rate gamma(A) for each amplitude, from the median over
/// realizations of ||u_t|| / ||u_0|| fitted on [fit_begin T, fit_end T].
inline SweepResult enhanced_dissipation_sweep(const VelocityModel<2>& model, const TrigSeries<2>& u0,
                                              const std::vector<double>& amplitudes, std::uint64_t seed,
                                              const SweepOptions& opt = {}) {
  if (amplitudes.empty()) throw std::invalid_argument("enhanced_dissipation_sweep: empty amplitude list");
  if (!std::is_sorted(amplitudes.begin(), amplitudes.end()) ||
      std::adjacent_find(amplitudes.begin(), amplitudes.end()) != amplitudes.end())
    throw std::invalid_argument("enhanced_dissipation_sweep: amplitudes must be strictly ascending");
  if (std::abs(u0.mean()) > 1e-12) throw std::invalid_argument("enhanced_dissipation_sweep: u0 must be mean-zero");
  if (opt.realizations < 1 || opt.record_every < 1)
    throw std::invalid_argument("enhanced_dissipation_sweep: bad realization count or cadence");
  const SpectralField start = SpectralField::from_trig(opt.N, u0);
  const double norm0 = std::sqrt(start.l2_squared());
  if (!(norm0 > 0.0)) throw std::invalid_argument("enhanced_dissipation_sweep: u0 vanishes");

  SweepResult out;
  for (double A : amplitudes) {
    SpdeRunOptions ro;
    ro.T = opt.T;
    ro.N = opt.N;
    ro.params = {A, opt.kappa, opt.C, opt.dt, opt.max_substeps};
    // with A = 0 every realization is the same heat flow
    const std::size_t R = A == 0.0 ? 1 : opt.realizations;
    std::vector<SpdeHistory> runs(R);
    parallel_for(R, opt.workers, [&](std::size_t r) { runs[r] = run_spde(model, start, ro, seed, r); });
    SweepEntry e;
    e.amplitude = A;
    for (std::size_t i = 0; i < runs.front().times.size(); ++i) {
      if (i % static_cast<std::size_t>(opt.record_every) != 0 && i + 1 != runs.front().times.size()) continue;
      std::vector<double> v(R);
      for (std::size_t r = 0; r < R; ++r) v[r] = std::sqrt(runs[r].l2_squared[i]) / norm0;
      std::sort(v.begin(), v.end());
      const double med = R % 2 ? v[R / 2] : 0.5 * (v[R / 2 - 1] + v[R / 2]);
      e.series.times.push_back(runs.front().times[i]);
      e.series.values.push_back(med);
    }
    for (const auto& r : runs) e.max_substeps_used = std::max(e.max_substeps_used, r.max_substeps_used);
    fit_window(e.series, opt.fit_begin * opt.T, opt.fit_end * opt.T);
    out.entries.push_back(std::move(e));
  }
  out.increasing = true;
  for (std::size_t i = 1; i < out.entries.size(); ++i)
    if (!(out.entries[i].series.rate() > out.entries[i - 1].series.rate())) out.increasing = false;
  std::vector<std::pair<double, double>> pts;
  for (auto it = out.entries.rbegin(); it != out.entries.rend() && static_cast<int>(pts.size()) < opt.exponent_points;
       ++it)
    if (it->amplitude > 0.0 && it->series.rate() > 0.0)
      pts.emplace_back(std::log(it->amplitude), std::log(it->series.rate()));
  if (pts.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0;
    for (auto [x, y] : pts) {
      sxx += (x - mx) * (x - mx);
      sxy += (x - mx) * (y - my);
    }
    out.exponent = sxy / sxx;
  }
  return out;
}

}  // namespace transportlab
