#pragma once

// Sampled verification of the spanning hypotheses: one-point Hoermander span,
// two-point ellipticity, ellipticity of the normalized tangent flow, and the
// first-order Lie-bracket spans used for finite families.
//
// Bracket convention: [f, g] = Dg f - Df g. Only ranks are asserted, and
// ranks do not depend on the sign convention.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "transportlab/fields.hpp"
#include "transportlab/report.hpp"

namespace transportlab {

/// Singular values below this fraction of the largest count as zero.
inline constexpr double kRankTolerance = 1e-9;

struct SpanResult {
  std::vector<double> points;
  int rank = 0;
  double smallest_singular_value = 0.0;
  std::string generators;
};

/// Rank and smallest singular value of the span of the rows of `rows`
/// inside R^cols.
inline SpanResult span_of(const Eigen::MatrixXd& rows, std::string generators = {}) {
  SpanResult r;
  r.generators = std::move(generators);
  const auto ambient = rows.cols();
  if (rows.rows() == 0 || ambient == 0) return r;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (smax > 0.0 && s[i] > kRankTolerance * smax) ++r.rank;
  }
  r.smallest_singular_value = rows.rows() >= ambient ? s[ambient - 1] : 0.0;
  return r;
}

template <int D> Vec<D> lie_bracket(const VelocityModel<D>& model, std::size_t j, std::size_t k,
                                    const Vec<D>& x) {
  return model.jacobian(k, x) * model.sigma(j, x) - model.jacobian(j, x) * model.sigma(k, x);
}

template <int D>
Eigen::Matrix<double, 2 * D, 1> two_point_lie_bracket(const VelocityModel<D>& model, std::size_t j,
                                                      std::size_t k, const Vec<D>& x,
                                                      const Vec<D>& y) {
  Eigen::Matrix<double, 2 * D, 1> out;
  out << lie_bracket<D>(model, j, k, x), lie_bracket<D>(model, j, k, y);
  return out;
}

template <int D>
Eigen::Matrix<double, 2 * D, 1> two_point_field(const VelocityModel<D>& model, std::size_t k,
                                                const Vec<D>& x, const Vec<D>& y) {
  Eigen::Matrix<double, 2 * D, 1> out;
  out << model.sigma(k, x), model.sigma(k, y);
  return out;
}

/// Condition (A): span of {sigma_k(x)}; if deficient, span of the fields
/// together with all first-order brackets.
template <int D> SpanResult check_span_A(const VelocityModel<D>& model, const Vec<D>& x) {
  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::MatrixXd rows(n, D);
  for (Eigen::Index k = 0; k < n; ++k) rows.row(k) = model.sigma(k, x).transpose();
  SpanResult r = span_of(rows, "fields");
  if (r.rank < D && n > 1) {
    Eigen::MatrixXd aug(n + n * (n - 1) / 2, D);
    aug.topRows(n) = rows;
    Eigen::Index row = n;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = j + 1; k < n; ++k) aug.row(row++) = lie_bracket<D>(model, j, k, x).transpose();
    r = span_of(aug, "fields+brackets(depth 1)");
  }
  r.points.assign(x.data(), x.data() + D);
  return r;
}

/// Condition (B): smallest eigenvalue of sum_k (sigma_k(x), sigma_k(y))^{(x)2}.
template <int D>
double two_point_ellipticity(const VelocityModel<D>& model, const Vec<D>& x, const Vec<D>& y) {
  if (torus_distance<D>(x, y) == 0.0)
    throw std::invalid_argument("two_point_ellipticity: points lie on the diagonal");
  Eigen::Matrix<double, 2 * D, 2 * D> gram = Eigen::Matrix<double, 2 * D, 2 * D>::Zero();
  for (std::size_t k = 0; k < model.size(); ++k) {
    const auto f = two_point_field<D>(model, k, x, y);
    gram += f * f.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 2 * D, 2 * D>> es(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues()[0]);
}

/// sigma~_k(x, v) = Dsigma_k(x) v - v <v, Dsigma_k(x) v>, the generator of
/// the normalized tangent flow, as a vector of R^D tangent to the sphere at v.
template <int D>
Vec<D> normalized_tangent_field(const VelocityModel<D>& model, std::size_t k, const Vec<D>& x,
                                const Vec<D>& v) {
  const Vec<D> w = model.jacobian(k, x) * v;
  return w - v * v.dot(w);
}

/// Orthonormal basis of v-perp (v a unit vector), as columns.
template <int D> Eigen::Matrix<double, D, D - 1> sphere_tangent_basis(const Vec<D>& v) {
  Eigen::Matrix<double, D, D - 1> b;
  if constexpr (D == 2) {
    b.col(0) = Vec<D>(-v[1], v[0]);
    return b;
  }
  int skip = 0;
  for (int i = 1; i < D; ++i)
    if (std::abs(v[i]) > std::abs(v[skip])) skip = i;
  int col = 0;
  for (int i = 0; i < D; ++i) {
    if (i == skip) continue;
    Vec<D> u = Vec<D>::Unit(i);
    for (int pass = 0; pass < 2; ++pass) {
      u -= u.dot(v) * v;
      for (int c = 0; c < col; ++c) u -= u.dot(b.col(c)) * b.col(c);
    }
    b.col(col++) = u.normalized();
  }
  return b;
}

/// Condition (C): smallest eigenvalue of the Gram matrix of the vectors
/// (sigma_k(x), P sigma~_k(x, v)) in R^(2D-1), P the coordinates in v-perp.
template <int D>
double tangent_ellipticity(const VelocityModel<D>& model, const Vec<D>& x, const Vec<D>& v) {
  if (std::abs(v.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("tangent_ellipticity: v must be a unit vector");
  constexpr int N = 2 * D - 1;
  const auto basis = sphere_tangent_basis<D>(v);
  Eigen::Matrix<double, N, N> gram = Eigen::Matrix<double, N, N>::Zero();
  for (std::size_t k = 0; k < model.size(); ++k) {
    Eigen::Matrix<double, N, 1> f;
    f << model.sigma(k, x), basis.transpose() * normalized_tangent_field<D>(model, k, x, v);
    gram += f * f.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues()[0]);
}

/// Span of the two-point fields, optionally with all first-order two-point
/// brackets, inside R^(2D).
template <int D>
SpanResult check_two_point_span(const VelocityModel<D>& model, const Vec<D>& x, const Vec<D>& y,
                                bool with_brackets) {
  const auto n = static_cast<Eigen::Index>(model.size());
  const Eigen::Index rows_count = n + (with_brackets ? n * (n - 1) / 2 : 0);
  Eigen::MatrixXd rows(rows_count, 2 * D);
  for (Eigen::Index k = 0; k < n; ++k) rows.row(k) = two_point_field<D>(model, k, x, y).transpose();
  Eigen::Index row = n;
  if (with_brackets) {
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = j + 1; k < n; ++k)
        rows.row(row++) = two_point_lie_bracket<D>(model, j, k, x, y).transpose();
  }
  SpanResult r = span_of(rows, with_brackets ? "two-point fields+brackets(depth 1)" : "two-point fields");
  r.points.assign(x.data(), x.data() + D);
  r.points.insert(r.points.end(), y.data(), y.data() + D);
  return r;
}

/// Condition (B') for the Baxendale-Rozovskii family.
inline SpanResult check_br_two_point_span(const Vec<2>& x, const Vec<2>& y, bool with_brackets = true) {
  static const VelocityModel<2> br = build_br();
  return check_two_point_span<2>(br, x, y, with_brackets);
}

/// Besides the diagonal, the BR fields and their first-order brackets lose
/// rank exactly when y - x is (pi, 0) or (0, pi) modulo 2 pi (found by a dense
/// scan of displacements and base points). Returns the torus distance of y - x
/// to that set.
inline double br_degeneracy_distance(const Vec<2>& x, const Vec<2>& y) {
  const Vec<2> r = torus_difference<2>(y, x);
  return std::min(torus_distance<2>(r, Vec<2>(kPi, 0.0)), torus_distance<2>(r, Vec<2>(0.0, kPi)));
}


/// Sampled survey of all conditions at `npoints` random points (and pairs).
/// Reports: "span_A" (rank at x), "two_point_span" (rank of the two-point
/// fields, with first-order brackets when the fields alone fall short),
/// "two_point_ellipticity" and "tangent_ellipticity" (smallest Gram
/// eigenvalues). For the BR family two exact-rank reports are appended:
/// "br_antipodal_raw_rank" and "br_diagonal_rank".
/// Pairs closer than `exclusion` to the diagonal (and, for BR, to the
/// degeneracy set) are resampled.
template <int D>
std::vector<ConditionReport> condition_survey(const VelocityModel<D>& model, int npoints, std::uint64_t seed,
                                              double exclusion = 0.05) {
  if (npoints < 1) throw std::invalid_argument("condition_survey: npoints must be positive");
  using Bound = ConditionReport::Bound;
  ConditionReport span{"span_A", Bound::AtLeast, {}, {}};
  ConditionReport two{"two_point_span", Bound::AtLeast, {}, {}};
  ConditionReport ell{"two_point_ellipticity", Bound::AtLeast, {}, {}};
  ConditionReport tan{"tangent_ellipticity", Bound::AtLeast, {}, {}};
  const bool br = model.kind() == ModelKind::BaxendaleRozovskii;
  const GaussianSource xs(seed, stream_id(StreamKind::Auxiliary, 1));
  const GaussianSource ys(seed, stream_id(StreamKind::Auxiliary, 2));
  const GaussianSource vs(seed, stream_id(StreamKind::Auxiliary, 3));
  // eigenvalues below this count as degenerate
  const double eig_floor = 1e-12;
  int bracket_pairs = 0, resampled = 0;
  std::uint64_t draw = 0;
  for (int n = 0; n < npoints; ++n) {
    const Vec<D> x = sample_point<D>(xs, static_cast<std::uint64_t>(n));
    std::vector<double> px(x.data(), x.data() + D);
    span.add(px, check_span_A<D>(model, x).rank, D);

    Vec<D> v = Vec<D>::Zero();
    for (int i = 0; i < D; ++i) v[i] = vs.normal(static_cast<std::uint32_t>(i), 0, static_cast<std::uint64_t>(n));
    v.normalize();
    std::vector<double> pv = px;
    pv.insert(pv.end(), v.data(), v.data() + D);
    tan.add(pv, tangent_ellipticity<D>(model, x, v), eig_floor);

    Vec<D> y;
    while (true) {
      y = sample_point<D>(ys, draw++);
      double gap = torus_distance<D>(x, y);
      if constexpr (D == 2)
        if (br) gap = std::min(gap, br_degeneracy_distance(x, y));
      if (gap >= exclusion) break;
      ++resampled;
    }
    std::vector<double> pxy = px;
    pxy.insert(pxy.end(), y.data(), y.data() + D);
    ell.add(pxy, two_point_ellipticity<D>(model, x, y), eig_floor);
    auto r = check_two_point_span<D>(model, x, y, false);
    if (r.rank < 2 * D) {
      r = check_two_point_span<D>(model, x, y, true);
      ++bracket_pairs;
    }
    two.add(std::move(pxy), r.rank, 2 * D);
  }
  two.notes.push_back("pairs needing brackets: " + std::to_string(bracket_pairs));
  two.notes.push_back("pairs resampled near degenerate set: " + std::to_string(resampled));
  ell.notes.push_back("informational: finite families may satisfy only the bracket condition");
  tan.notes.push_back("informational: finite families may satisfy only the bracket condition");
  std::vector<ConditionReport> out{span, two, ell, tan};
  if constexpr (D == 2) {
    if (br) {
      ConditionReport anti{"br_antipodal_raw_rank", Bound::AtMost, {}, {}};
      anti.add({0.0, 0.0, kPi, kPi}, check_two_point_span<2>(model, Vec<2>::Zero(), Vec<2>(kPi, kPi), false).rank, 2);
      anti.notes.push_back("raw fields at x=(0,0), y=(pi,pi) span only 2 dimensions");
      ConditionReport diag{"br_diagonal_rank", Bound::AtMost, {}, {}};
      const Vec<2> x = sample_point<2>(xs, 0);
      diag.add({x[0], x[1], x[0], x[1]}, check_two_point_span<2>(model, x, x, true).rank, 3);
      diag.notes.push_back("fields and brackets are rank deficient on the diagonal");
      out.push_back(anti);
      out.push_back(diag);
    }
  }
  return out;
}

/// Reports that decide the overall verdict of a survey.
inline bool survey_required(const std::string& name) {
  return name != "two_point_ellipticity" && name != "tangent_ellipticity";
}

}  // namespace transportlab
