#pragma once

// Velocity-mode families on the flat torus. Every built-in mode is a single
// Fourier mode  sigma(x) = amplitude * a * trig(z . x)  with trig in {cos, sin},
// so values and all derivatives are closed-form.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "transportlab/noise.hpp"
#include "transportlab/report.hpp"
#include "transportlab/torus.hpp"

namespace transportlab {

enum class Phase { Cos, Sin };

enum class ModelKind { KraichnanTorus, BaxendaleRozovskii, Custom };

inline std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::KraichnanTorus: return "kraichnan";
    case ModelKind::BaxendaleRozovskii: return "br";
    case ModelKind::Custom: return "custom";
  }
  return "unknown";
}

template <int D> struct FourierMode {
  Wavevector<D> z = Wavevector<D>::Zero();
  Vec<D> polarization = Vec<D>::Zero();
  Phase phase = Phase::Cos;
  double amplitude = 1.0;

  double trig(double theta) const { return phase == Phase::Cos ? std::cos(theta) : std::sin(theta); }
  double dtrig(double theta) const { return phase == Phase::Cos ? -std::sin(theta) : std::cos(theta); }
  double angle(const Vec<D>& x) const { return z.template cast<double>().dot(x); }
};

/// Hessian of a vector field: entry [i](j, l) is d^2 sigma^i / dx^j dx^l.
template <int D> using Hessian = std::array<Mat<D>, D>;

template <int D> class VelocityModel {
 public:
  VelocityModel() = default;
  VelocityModel(ModelKind kind, std::vector<FourierMode<D>> modes, double alpha = 0.0, int zmax = 0,
                double energy_scale = 1.0)
      : kind_(kind), alpha_(alpha), zmax_(zmax), energy_scale_(energy_scale),
        modes_(std::move(modes)) {
    index_wavevectors();
  }

  ModelKind kind() const { return kind_; }
  static constexpr int dim() { return D; }
  double alpha() const { return alpha_; }
  int zmax() const { return zmax_; }
  double energy_scale() const { return energy_scale_; }
  std::size_t size() const { return modes_.size(); }
  const std::vector<FourierMode<D>>& modes() const { return modes_; }
  const FourierMode<D>& mode(std::size_t k) const {
    if (k >= modes_.size()) throw std::out_of_range("VelocityModel: mode index out of range");
    return modes_[k];
  }

  /// Distinct wavevectors in first-appearance order, and the map mode -> wavevector slot.
  const std::vector<Wavevector<D>>& wavevectors() const { return wavevectors_; }
  const std::vector<int>& wavevector_slot() const { return slot_; }
  int max_harmonic() const { return max_harmonic_; }

  /// True when every mode's polarization is orthogonal to its wavevector.
  bool divergence_free() const { return divergence_free_; }

  Vec<D> sigma(std::size_t k, const Vec<D>& x) const {
    const auto& m = mode(k);
    return m.amplitude * m.trig(m.angle(x)) * m.polarization;
  }

  Mat<D> jacobian(std::size_t k, const Vec<D>& x) const {
    const auto& m = mode(k);
    return (m.amplitude * m.dtrig(m.angle(x))) * m.polarization *
           m.z.template cast<double>().transpose();
  }

  Hessian<D> hessian(std::size_t k, const Vec<D>& x) const {
    const auto& m = mode(k);
    const Vec<D> zd = m.z.template cast<double>();
    const double c = -m.amplitude * m.trig(m.angle(x));
    Hessian<D> h;
    for (int i = 0; i < D; ++i) h[i] = (c * m.polarization[i]) * zd * zd.transpose();
    return h;
  }

  /// Exact sup norms of a single Fourier mode and its first two derivatives.
  double sup_norm(std::size_t k) const { return mode(k).amplitude * mode(k).polarization.norm(); }
  double sup_norm_jacobian(std::size_t k) const {
    return sup_norm(k) * mode(k).z.template cast<double>().norm();
  }
  double sup_norm_hessian(std::size_t k) const {
    return sup_norm(k) * mode(k).z.template cast<double>().squaredNorm();
  }

 private:
  void index_wavevectors() {
    divergence_free_ = true;
    max_harmonic_ = 0;
    for (const auto& m : modes_) {
      auto it = std::find(wavevectors_.begin(), wavevectors_.end(), m.z);
      if (it == wavevectors_.end()) {
        slot_.push_back(static_cast<int>(wavevectors_.size()));
        wavevectors_.push_back(m.z);
      } else {
        slot_.push_back(static_cast<int>(it - wavevectors_.begin()));
      }
      max_harmonic_ = std::max(max_harmonic_, m.z.cwiseAbs().maxCoeff());
      if (std::abs(m.polarization.dot(m.z.template cast<double>())) > 1e-12 * m.polarization.norm() * m.z.template cast<double>().norm())
        divergence_free_ = false;
    }
  }

  ModelKind kind_ = ModelKind::Custom;
  double alpha_ = 0.0;
  int zmax_ = 0;
  double energy_scale_ = 1.0;
  std::vector<FourierMode<D>> modes_;
  std::vector<Wavevector<D>> wavevectors_;
  std::vector<int> slot_;
  int max_harmonic_ = 0;
  bool divergence_free_ = true;
};

namespace detail {

template <int D> bool lex_dominates(const Wavevector<D>& z) {
  for (int i = 0; i < D; ++i) {
    if (z[i] > 0) return true;
    if (z[i] < 0) return false;
  }
  return false;
}

template <int D> bool lex_less(const Wavevector<D>& a, const Wavevector<D>& b) {
  for (int i = 0; i < D; ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

}  // namespace detail

/// Orthonormal basis of z-perp. In 2D this is (-z2, z1)/|z|. In higher
/// dimension the standard basis vector most parallel to z (first index on ties)
/// is dropped and the rest are Gram-Schmidt orthogonalized against z.
template <int D> std::vector<Vec<D>> polarization_basis(const Wavevector<D>& z) {
  const Vec<D> zd = z.template cast<double>();
  const double zn = zd.norm();
  if (zn == 0.0) throw std::invalid_argument("polarization_basis: zero wavevector");
  std::vector<Vec<D>> basis;
  if constexpr (D == 2) {
    basis.push_back(Vec<D>(-zd[1], zd[0]) / zn);
    return basis;
  }
  int skip = 0;
  for (int i = 1; i < D; ++i) {
    if (std::abs(z[i]) > std::abs(z[skip])) skip = i;
  }
  const Vec<D> zhat = zd / zn;
  for (int i = 0; i < D; ++i) {
    if (i == skip) continue;
    Vec<D> u = Vec<D>::Unit(i);
    for (int pass = 0; pass < 2; ++pass) {
      u -= u.dot(zhat) * zhat;
      for (const auto& b : basis) u -= u.dot(b) * b;
    }
    basis.push_back(u.normalized());
  }
  return basis;
}

/// Kraichnan modes on T^D: for each pair {z, -z} with |z|_inf <= zmax, D-1
/// cosine and D-1 sine modes with amplitude 1/(2 |z|^((D+alpha)/2)). A cos/sin
/// pair of amplitude c contributes c^2 cos(z.r) to D(x, y), shared by z and -z
/// in the full lattice sum, so this amplitude gives the spectral density
/// 1/(8 |z|^(D+alpha)) exactly. The 1/sqrt(2) normalization would double it.
template <int D> VelocityModel<D> build_kraichnan(double alpha, int zmax, double energy_scale = 1.0) {
  static_assert(D >= 2, "build_kraichnan: dimension must be at least 2");
  if (!(alpha > 2.0)) throw std::invalid_argument("build_kraichnan: alpha must exceed 2");
  if (zmax < 1) throw std::invalid_argument("build_kraichnan: zmax must be at least 1");
  if (!(energy_scale > 0.0)) throw std::invalid_argument("build_kraichnan: energy scale must be positive");

  std::vector<Wavevector<D>> half;
  Wavevector<D> z = Wavevector<D>::Constant(-zmax);
  while (true) {
    if (detail::lex_dominates<D>(z)) half.push_back(z);
    int i = D - 1;
    while (i >= 0 && z[i] == zmax) z[i--] = -zmax;
    if (i < 0) break;
    ++z[i];
  }
  std::sort(half.begin(), half.end(), detail::lex_less<D>);

  std::vector<FourierMode<D>> modes;
  modes.reserve(half.size() * 2 * (D - 1));
  for (const auto& w : half) {
    const double zn = w.template cast<double>().norm();
    const double amp = std::sqrt(energy_scale) / (2.0 * std::pow(zn, 0.5 * (D + alpha)));
    for (const auto& a : polarization_basis<D>(w)) {
      modes.push_back({w, a, Phase::Cos, amp});
      modes.push_back({w, a, Phase::Sin, amp});
    }
  }
  return VelocityModel<D>(ModelKind::KraichnanTorus, std::move(modes), alpha, zmax, energy_scale);
}

/// The four Baxendale-Rozovskii fields on T^2:
/// (0, sin x1), (0, cos x1), (sin x2, 0), (cos x2, 0).
inline VelocityModel<2> build_br() {
  const Wavevector<2> e1(1, 0), e2(0, 1);
  std::vector<FourierMode<2>> modes = {
      {e1, Vec<2>(0.0, 1.0), Phase::Sin, 1.0},
      {e1, Vec<2>(0.0, 1.0), Phase::Cos, 1.0},
      {e2, Vec<2>(1.0, 0.0), Phase::Sin, 1.0},
      {e2, Vec<2>(1.0, 0.0), Phase::Cos, 1.0},
  };
  return VelocityModel<2>(ModelKind::BaxendaleRozovskii, std::move(modes));
}

template <int D> VelocityModel<D> build_custom(std::vector<FourierMode<D>> modes) {
  for (const auto& m : modes) {
    if (!(m.amplitude >= 0.0)) throw std::invalid_argument("build_custom: negative amplitude");
  }
  return VelocityModel<D>(ModelKind::Custom, std::move(modes));
}

/// A constant field, handy as a trivial model in tests and sanity runs.
template <int D> VelocityModel<D> build_constant(const Vec<D>& value) {
  return build_custom<D>({FourierMode<D>{Wavevector<D>::Zero(), value, Phase::Cos, 1.0}});
}

/// The random vector field  sum_k w_k sigma_k  for one set of weights
/// (typically one step's Brownian increments). Coefficients are aggregated per
/// wavevector so a point evaluation costs one complex product per wavevector.
template <int D> class StepField {
 public:
  static constexpr int kMaxTableHarmonic = 64;

  StepField() = default;
  StepField(const VelocityModel<D>& model, std::span<const double> weights) { assign(model, weights); }

  void assign(const VelocityModel<D>& model, std::span<const double> weights) {
    if (weights.size() != model.size())
      throw std::invalid_argument("StepField: weight count does not match mode count");
    model_ = &model;
    const auto n = model.wavevectors().size();
    ccos_.assign(n, Vec<D>::Zero());
    csin_.assign(n, Vec<D>::Zero());
    const auto& slot = model.wavevector_slot();
    for (std::size_t k = 0; k < model.size(); ++k) {
      const auto& m = model.modes()[k];
      const Vec<D> c = (m.amplitude * weights[k]) * m.polarization;
      if (m.phase == Phase::Cos) ccos_[slot[k]] += c;
      else csin_[slot[k]] += c;
    }
  }

  Vec<D> value(const Vec<D>& x) const {
    Vec<D> v = Vec<D>::Zero();
    for_each_phase(x, [&](std::size_t s, double c, double sn) { v += c * ccos_[s] + sn * csin_[s]; });
    return v;
  }

  void value_and_jacobian(const Vec<D>& x, Vec<D>& v, Mat<D>& jac) const {
    v.setZero();
    jac.setZero();
    const auto& zs = model_->wavevectors();
    for_each_phase(x, [&](std::size_t s, double c, double sn) {
      v += c * ccos_[s] + sn * csin_[s];
      jac += (sn * -ccos_[s] + c * csin_[s]) * zs[s].template cast<double>().transpose();
    });
  }

  const std::vector<Vec<D>>& cos_coefficients() const { return ccos_; }
  const std::vector<Vec<D>>& sin_coefficients() const { return csin_; }
  const VelocityModel<D>& model() const { return *model_; }

 private:
  template <class F> void for_each_phase(const Vec<D>& x, F&& f) const {
    const auto& zs = model_->wavevectors();
    const int m = model_->max_harmonic();
    if (m > kMaxTableHarmonic) {
      for (std::size_t s = 0; s < zs.size(); ++s) {
        const double th = zs[s].template cast<double>().dot(x);
        f(s, std::cos(th), std::sin(th));
      }
      return;
    }
    // powers[d][m + h] = exp(i h x_d) for h in [-m, m]
    std::array<std::array<std::complex<double>, 2 * kMaxTableHarmonic + 1>, D> powers;
    for (int d = 0; d < D; ++d) {
      auto& p = powers[d];
      const std::complex<double> e(std::cos(x[d]), std::sin(x[d]));
      p[m] = 1.0;
      for (int h = 1; h <= m; ++h) {
        p[m + h] = p[m + h - 1] * e;
        p[m - h] = std::conj(p[m + h]);
      }
    }
    for (std::size_t s = 0; s < zs.size(); ++s) {
      std::complex<double> e = powers[0][m + zs[s][0]];
      for (int d = 1; d < D; ++d) e *= powers[d][m + zs[s][d]];
      f(s, e.real(), e.imag());
    }
  }

  const VelocityModel<D>* model_ = nullptr;
  std::vector<Vec<D>> ccos_;
  std::vector<Vec<D>> csin_;
};

/// D(x, y) = sum_k sigma_k(x) sigma_k(y)^T.
template <int D> Mat<D> covariance(const VelocityModel<D>& model, const Vec<D>& x, const Vec<D>& y) {
  Mat<D> c = Mat<D>::Zero();
  for (std::size_t k = 0; k < model.size(); ++k) c += model.sigma(k, x) * model.sigma(k, y).transpose();
  return c;
}

/// Truncated Kraichnan covariance as a function of the displacement r = x - y:
/// sum_{0 < |z|_inf <= zmax} (I - z z^T/|z|^2) cos(z . r) / (8 |z|^(D+alpha)).
template <int D>
Mat<D> covariance_closed_form(double alpha, int zmax, const Vec<D>& r, double energy_scale = 1.0) {
  Mat<D> c = Mat<D>::Zero();
  Wavevector<D> z = Wavevector<D>::Constant(-zmax);
  while (true) {
    if (!z.isZero()) {
      const Vec<D> zd = z.template cast<double>();
      const double n2 = zd.squaredNorm();
      const double weight = std::cos(zd.dot(r)) / (8.0 * std::pow(n2, 0.5 * (D + alpha)));
      c += weight * (Mat<D>::Identity() - zd * zd.transpose() / n2);
    }
    int i = D - 1;
    while (i >= 0 && z[i] == zmax) z[i--] = -zmax;
    if (i < 0) break;
    ++z[i];
  }
  return energy_scale * c;
}

/// Upper bound on sup_x sqrt(trace D(x, x)), the RMS speed scale of the
/// unit-amplitude field.
template <int D> double rms_speed_bound(const VelocityModel<D>& model) {
  double s = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k) s += std::pow(model.sup_norm(k), 2);
  return std::sqrt(s);
}

/// Uniform random point on T^D from a counter-addressed source.
template <int D> Vec<D> sample_point(const GaussianSource& src, std::uint64_t index) {
  Vec<D> x;
  for (int i = 0; i < D; ++i) x[i] = kTwoPi * src.uniform(static_cast<std::uint32_t>(i), 7u, index);
  return x;
}

/// Divergence, self-advection and per-shell summability checks.
/// Returns three reports: "divergence", "self_advection", "shell_summability".
template <int D>
std::vector<ConditionReport> structural_checks(const VelocityModel<D>& model, int nsamples,
                                               std::uint64_t seed, double tolerance = 1e-12) {
  if (nsamples < 1) throw std::invalid_argument("structural_checks: nsamples must be positive");
  ConditionReport div{"divergence", ConditionReport::Bound::AtMost, {}, {}};
  ConditionReport adv{"self_advection", ConditionReport::Bound::AtMost, {}, {}};
  const GaussianSource src(seed, stream_id(StreamKind::Auxiliary, 0));
  for (int n = 0; n < nsamples; ++n) {
    const Vec<D> x = sample_point<D>(src, static_cast<std::uint64_t>(n));
    double max_div = 0.0, max_adv = 0.0;
    for (std::size_t k = 0; k < model.size(); ++k) {
      const Mat<D> j = model.jacobian(k, x);
      max_div = std::max(max_div, std::abs(j.trace()));
      max_adv = std::max(max_adv, (j * model.sigma(k, x)).cwiseAbs().maxCoeff());
    }
    std::vector<double> p(x.data(), x.data() + D);
    div.add(p, max_div, tolerance);
    adv.add(std::move(p), max_adv, tolerance);
  }

  // Shell n collects modes with |z|_inf = n. For Kraichnan modes the shell sum
  // is bounded by c_D n^(1-alpha), c_D = D (D-1) 3^(D-1) (1 + 2D).
  ConditionReport shells{"shell_summability", ConditionReport::Bound::AtMost, {}, {}};
  const int nmax = model.max_harmonic();
  std::vector<double> sums(nmax + 1, 0.0);
  for (std::size_t k = 0; k < model.size(); ++k) {
    const int n = model.mode(k).z.cwiseAbs().maxCoeff();
    const double s0 = model.sup_norm(k);
    sums[n] += s0 * s0 + std::pow(model.sup_norm_jacobian(k), 2) + model.sup_norm_hessian(k) * s0;
  }
  const bool kraichnan = model.kind() == ModelKind::KraichnanTorus;
  const double cd = D * (D - 1) * std::pow(3.0, D - 1) * (1.0 + 2.0 * D) * model.energy_scale();
  for (int n = 0; n <= nmax; ++n) {
    if (sums[n] == 0.0 && n == 0) continue;
    const double bound = kraichnan ? cd * std::pow(n, 1.0 - model.alpha())
                                   : std::numeric_limits<double>::infinity();
    shells.add({static_cast<double>(n)}, sums[n], bound);
  }
  if (kraichnan) {
    const double tail = cd * std::pow(model.zmax(), 2.0 - model.alpha()) / (model.alpha() - 2.0);
    shells.notes.push_back("tail_bound_beyond_zmax=" + std::to_string(tail));
  } else {
    shells.notes.push_back("finite family: sum is finite");
  }
  return {div, adv, shells};
}

}  // namespace transportlab
