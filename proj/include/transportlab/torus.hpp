#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace transportlab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kPi = std::numbers::pi;

template <int D> using Vec = Eigen::Matrix<double, D, 1>;
template <int D> using Mat = Eigen::Matrix<double, D, D>;
template <int D> using Wavevector = Eigen::Matrix<int, D, 1>;

/// A point of the flat torus [0, 2pi)^D. Coordinates are kept wrapped by
/// every routine that updates positions; the alias carries no runtime check.
template <int D> using TorusPoint = Vec<D>;

/// Wraps a single coordinate into [0, 2pi).
inline double wrap_coordinate(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

template <int D> TorusPoint<D> wrap(const Vec<D>& x) {
  TorusPoint<D> out;
  for (int i = 0; i < D; ++i) out[i] = wrap_coordinate(x[i]);
  return out;
}

/// Coordinatewise difference x - y folded into [-pi, pi].
template <int D> Vec<D> torus_difference(const Vec<D>& x, const Vec<D>& y) {
  Vec<D> r;
  for (int i = 0; i < D; ++i) r[i] = std::remainder(x[i] - y[i], kTwoPi);
  return r;
}

/// Geodesic distance of the flat torus. Injectivity radius is pi.
template <int D> double torus_distance(const Vec<D>& x, const Vec<D>& y) {
  return torus_difference<D>(x, y).norm();
}

}  // namespace transportlab
