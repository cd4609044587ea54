#pragma once

// Exponential-decay series and log-linear fits: value ~ intercept * exp(-rate t).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace transportlab {

struct FitResult {
  double rate = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  bool flat = false;
  /// standard error of the rate (delta method over realizations when
  /// per-realization samples are available, otherwise the regression SE)
  double rate_se = std::numeric_limits<double>::quiet_NaN();
};

struct DecaySeries {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> std_error;  // Monte Carlo SE per time; may be empty
  /// per-realization samples, samples[m][i] at times[i]; optional
  std::vector<std::vector<double>> samples;

  std::optional<FitResult> fit;
  std::size_t window_begin = 0;
  std::size_t window_end = 0;  // one past the last point
  std::string note;

  double rate() const { return fit ? fit->rate : std::numeric_limits<double>::quiet_NaN(); }
  double r2() const { return fit ? fit->r2 : std::numeric_limits<double>::quiet_NaN(); }
  double rate_ci_halfwidth() const { return fit ? 1.96 * fit->rate_se : std::numeric_limits<double>::quiet_NaN(); }
};

/// Least-squares line through (t, log value) on [begin, end).
inline FitResult fit_decay_rate(const std::vector<double>& times, const std::vector<double>& values,
                                std::size_t begin, std::size_t end) {
  if (times.size() != values.size()) throw std::invalid_argument("fit_decay_rate: size mismatch");
  if (end > times.size() || begin > end) throw std::invalid_argument("fit_decay_rate: window outside the series");
  const std::size_t n = end - begin;
  if (n < 3) throw std::invalid_argument("fit_decay_rate: need at least 3 points");
  for (std::size_t i = begin; i < end; ++i) {
    if (!(values[i] > 0.0))
      throw std::invalid_argument("fit_decay_rate: non-positive value at t = " + std::to_string(times[i]));
  }
  double mt = 0.0, my = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    mt += times[i];
    my += std::log(values[i]);
  }
  mt /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double dt = times[i] - mt, dy = std::log(values[i]) - my;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  if (stt == 0.0) throw std::invalid_argument("fit_decay_rate: window has a single time");
  FitResult r;
  const double slope = sty / stt;
  r.rate = -slope;
  r.intercept = std::exp(my - slope * mt);
  // relative threshold so round-off in log() does not count as signal
  if (syy <= 1e-28 * std::max(1.0, my * my) * static_cast<double>(n)) {
    r.rate = 0.0;
    r.r2 = 0.0;
    r.flat = true;
    r.rate_se = 0.0;
    return r;
  }
  r.r2 = std::clamp(sty * sty / (stt * syy), 0.0, 1.0);
  const double sse = std::max(0.0, syy - slope * sty);
  r.rate_se = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / stt) : 0.0;
  return r;
}

inline FitResult fit_decay_rate(const std::vector<double>& times, const std::vector<double>& values) {
  return fit_decay_rate(times, values, 0, times.size());
}

struct WindowOptions {
  double t_min = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
  double noise_multiple = 3.0;
  /// deterministic noise floor (e.g. quadrature error) added to the SE test
  double floor = 0.0;
  /// fit |value| (for signed observables)
  bool absolute = true;
};

/// Delta-method SE of the fitted rate from per-realization samples: the slope
/// is linear in log|mean_i|, and d log|mean_i| = d mean_i / mean_i.
inline double delta_method_rate_se(const DecaySeries& s, std::size_t begin, std::size_t end) {
  const std::size_t m = s.samples.size();
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  double mt = 0.0;
  for (std::size_t i = begin; i < end; ++i) mt += s.times[i];
  mt /= static_cast<double>(end - begin);
  double stt = 0.0;
  for (std::size_t i = begin; i < end; ++i) stt += (s.times[i] - mt) * (s.times[i] - mt);
  std::vector<double> g(m, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t i = begin; i < end; ++i)
      g[r] += (s.times[i] - mt) / stt * s.samples[r][i] / s.values[i];
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double v : g) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m));
}

/// Picks the fit window automatically: the contiguous run of points starting
/// at the first t >= t_min whose |value| exceeds noise_multiple * max(SE, floor),
/// cut at t_max; then fits it.
inline void fit_auto(DecaySeries& s, const WindowOptions& opt = {}) {
  s.fit.reset();
  s.note.clear();
  const std::size_t n = s.times.size();
  std::size_t b = 0;
  while (b < n && s.times[b] < opt.t_min - 1e-12) ++b;
  std::size_t e = b;
  while (e < n && s.times[e] <= opt.t_max + 1e-12) {
    const double se = s.std_error.empty() ? 0.0 : s.std_error[e];
    const double v = opt.absolute ? std::abs(s.values[e]) : s.values[e];
    if (!(v > opt.noise_multiple * std::max(se, opt.floor))) break;
    ++e;
  }
  s.window_begin = b;
  s.window_end = e;
  if (e - b < 3) {
    s.note = e < n ? "decayed below noise floor by t = " + std::to_string(s.times[std::min(e, n - 1)])
                   : "fewer than 3 points in the fit window";
    return;
  }
  std::vector<double> v(s.values.begin(), s.values.end());
  if (opt.absolute)
    for (auto& a : v) a = std::abs(a);
  s.fit = fit_decay_rate(s.times, v, b, e);
  if (!s.samples.empty()) {
    const double se = delta_method_rate_se(s, b, e);
    if (std::isfinite(se)) s.fit->rate_se = se;
  }
}

/// Fits an explicit window [t_min, t_max] without the noise criterion.
inline void fit_window(DecaySeries& s, double t_min, double t_max) {
  WindowOptions opt;
  opt.t_min = t_min;
  opt.t_max = t_max;
  opt.noise_multiple = 0.0;
  fit_auto(s, opt);
}

}  // namespace transportlab
