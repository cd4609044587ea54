#pragma once

// Finite real trigonometric series, used as initial scalars and observables.

#include <algorithm>
#include <cmath>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

#include "transportlab/fields.hpp"

namespace transportlab {

/// sum_j c_j trig_j(z_j . x)
template <int D> struct TrigSeries {
  struct Term {
    double coefficient = 1.0;
    Wavevector<D> z = Wavevector<D>::Zero();
    Phase phase = Phase::Cos;
  };
  std::vector<Term> terms;

  double operator()(const Vec<D>& x) const {
    double s = 0.0;
    for (const auto& t : terms) {
      const double th = t.z.template cast<double>().dot(x);
      s += t.coefficient * (t.phase == Phase::Cos ? std::cos(th) : std::sin(th));
    }
    return s;
  }

  /// Mean over the torus: only cosine terms at z = 0 contribute.
  double mean() const {
    double m = 0.0;
    for (const auto& t : terms)
      if (t.z.isZero() && t.phase == Phase::Cos) m += t.coefficient;
    return m;
  }

  int max_harmonic() const {
    int h = 0;
    for (const auto& t : terms) h = std::max(h, t.z.cwiseAbs().maxCoeff());
    return h;
  }

  std::string to_string() const {
    std::string s;
    for (std::size_t j = 0; j < terms.size(); ++j) {
      const auto& t = terms[j];
      if (j > 0) s += " + ";
      if (t.coefficient != 1.0) s += format_number(t.coefficient) + "*";
      s += t.phase == Phase::Cos ? "cos(" : "sin(";
      for (int i = 0; i < D; ++i) s += (i ? "," : "") + std::to_string(t.z[i]);
      s += ")";
    }
    return s;
  }

 private:
  static std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
};

/// Parses e.g. "cos(1,0) + sin(0,2)" or "0.5*cos(1,0) - 2*sin(0,1)".
/// The integers are the wavevector components.
template <int D> TrigSeries<D> parse_trig_series(const std::string& text) {
  static const std::regex term_re(
      R"(\s*([+-])?\s*(?:([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*\*\s*)?(cos|sin)\s*\(([^)]*)\)\s*)");
  TrigSeries<D> out;
  auto it = text.cbegin();
  bool first = true;
  std::smatch m;
  while (it != text.cend()) {
    if (!std::regex_search(it, text.cend(), m, term_re, std::regex_constants::match_continuous))
      throw std::invalid_argument("trig series: cannot parse '" + std::string(it, text.cend()) + "'");
    if (!first && !m[1].matched) throw std::invalid_argument("trig series: missing '+' or '-' between terms");
    typename TrigSeries<D>::Term t;
    t.coefficient = m[2].matched ? std::stod(m[2].str()) : 1.0;
    if (m[1].matched && m[1].str() == "-") t.coefficient = -t.coefficient;
    t.phase = m[3].str() == "cos" ? Phase::Cos : Phase::Sin;
    const std::string args = m[4].str();
    std::vector<int> comps;
    std::size_t pos = 0;
    while (pos <= args.size()) {
      const auto comma = std::min(args.find(',', pos), args.size());
      const std::string piece = args.substr(pos, comma - pos);
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(piece, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("trig series: bad wavevector component '" + piece + "'");
      }
      if (piece.find_first_not_of(" \t", used) != std::string::npos)
        throw std::invalid_argument("trig series: bad wavevector component '" + piece + "'");
      comps.push_back(v);
      pos = comma + 1;
    }
    if (static_cast<int>(comps.size()) != D)
      throw std::invalid_argument("trig series: wavevector needs " + std::to_string(D) + " components");
    for (int i = 0; i < D; ++i) t.z[i] = comps[i];
    out.terms.push_back(t);
    it = m[0].second;
    first = false;
  }
  if (out.terms.empty()) throw std::invalid_argument("trig series: empty expression");
  return out;
}

}  // namespace transportlab
