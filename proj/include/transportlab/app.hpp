#pragma once

// Subcommand runner behind the transportlab executable. Each subcommand
// computes first and writes artifacts only on success.
//
// Exit codes: 0 ok, 1 a check failed or an unexpected error, 2 invalid
// configuration, 3 numerical guard tripped.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "transportlab/artifacts.hpp"
#include "transportlab/conditions.hpp"
#include "transportlab/config.hpp"
#include "transportlab/fields.hpp"
#include "transportlab/flow.hpp"
#include "transportlab/lyapunov.hpp"
#include "transportlab/mixing.hpp"
#include "transportlab/spectral.hpp"

namespace transportlab {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitInvalid = 2, kExitNumerical = 3 };

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"fields-check", "conditions", "lyapunov", "moment-lyapunov", "two-point",
                                              "correlation",  "mixing",     "spde",     "sweep"};
  return names;
}

inline std::string describe(const std::string& sub) {
  static const std::map<std::string, std::string> text{
      {"fields-check", "divergence, self-advection, summability and covariance identities"},
      {"conditions", "sampled spanning and ellipticity conditions"},
      {"lyapunov", "top Lyapunov exponent with a 95% CI"},
      {"moment-lyapunov", "moment Lyapunov curve, slope at zero, twisted-semigroup estimate"},
      {"two-point", "E d(x_t, y_t)^-p for the two-point motion"},
      {"correlation", "decay of E psi(x_t, y_t)"},
      {"mixing", "Lagrangian H^-s proxy of the advected scalar"},
      {"spde", "pseudo-spectral run of the scalar SPDE with energy balance"},
      {"sweep", "L2 decay rate versus amplitude"}};
  const auto it = text.find(sub);
  return it == text.end() ? std::string() : it->second;
}

/// Everything a subcommand produces before anything touches the disk.
struct RunOutputs {
  std::vector<std::pair<std::string, CsvTable>> tables;
  nlohmann::ordered_json summary;
  std::vector<std::string> lines;  // printed to the console
  bool pass = true;
};

namespace app {

template <int D> Vec<D> to_vec(const std::vector<double>& v) {
  Vec<D> out;
  for (int i = 0; i < D; ++i) out[i] = v[static_cast<std::size_t>(i)];
  return out;
}

template <int D> VelocityModel<D> build_model(const FieldSpec& f) {
  if (f.kind == "kraichnan") return build_kraichnan<D>(f.alpha, f.zmax, f.energy_scale);
  if (f.kind == "constant") return build_constant<D>(to_vec<D>(f.constant));
  if constexpr (D == 2) return build_br();
  throw ConfigError("field.kind: br needs d = 2");
}

inline Scheme scheme_of(const std::string& s) { return s == "euler-maruyama" ? Scheme::EulerMaruyama : Scheme::Heun; }

/// Short label for a number in a file name: 0.25 -> "0.25", -1 -> "-1".
inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::string join_point(const std::vector<double>& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? " " : "") + format_double(p[i]);
  return s;
}

inline nlohmann::ordered_json fit_json(const DecaySeries& s) {
  nlohmann::ordered_json j;
  j["fitted"] = s.fit.has_value();
  if (s.fit) {
    j["rate"] = s.fit->rate;
    j["log_slope"] = -s.fit->rate;
    j["intercept"] = s.fit->intercept;
    j["r2"] = s.fit->r2;
    if (std::isfinite(s.fit->rate_se)) {
      j["rate_se"] = s.fit->rate_se;
      j["rate_ci95"] = {s.fit->rate - 1.96 * s.fit->rate_se, s.fit->rate + 1.96 * s.fit->rate_se};
    }
  }
  if (s.window_end > s.window_begin && s.window_end <= s.times.size())
    j["window"] = {s.times[s.window_begin], s.times[s.window_end - 1]};
  if (!s.note.empty()) j["note"] = s.note;
  return j;
}

inline nlohmann::ordered_json prepend(nlohmann::ordered_json head, const nlohmann::ordered_json& tail) {
  head.update(tail);
  return head;
}

inline CsvTable series_table(const DecaySeries& s) {
  CsvTable t{{"t", "value", "stderr"}, {}};
  for (std::size_t i = 0; i < s.times.size(); ++i)
    t.add(s.times[i], s.values[i], s.std_error.empty() ? 0.0 : s.std_error[i]);
  return t;
}

inline std::string fit_line(const std::string& what, const DecaySeries& s) {
  std::ostringstream o;
  if (s.fit)
    o << what << ": rate " << format_double(s.fit->rate) << " (R^2 " << format_double(s.fit->r2) << ")";
  else
    o << what << ": no fit (" << s.note << ")";
  return o.str();
}

inline void add_reports(RunOutputs& out, const std::vector<ConditionReport>& reports,
                        const std::function<bool(const std::string&)>& required) {
  CsvTable t{{"check", "index", "point", "measured", "threshold", "ok"}, {}};
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.records.size(); ++i) {
      const auto& rec = r.records[i];
      t.add(r.name, i, join_point(rec.point), rec.measured, rec.threshold, rec.ok);
    }
    auto j = r.summary();
    const bool req = required(r.name);
    j["required"] = req;
    checks.push_back(j);
    if (req && !r.pass()) out.pass = false;
    out.lines.push_back(std::string(r.pass() ? "PASS " : "FAIL ") + r.name + " (" + std::to_string(r.records.size()) +
                        " records, min " + format_double(r.records.empty() ? 0.0 : r.min()) + ", max " +
                        format_double(r.records.empty() ? 0.0 : r.max()) + (req ? ")" : ", informational)"));
  }
  out.tables.emplace_back(std::string("checks.csv"), std::move(t));
  out.summary["checks"] = checks;
}

template <int D> nlohmann::ordered_json model_json(const VelocityModel<D>& m) {
  return {{"kind", to_string(m.kind())}, {"d", D}, {"modes", m.size()}};
}

// ---------------------------------------------------------------------------

template <int D> RunOutputs fields_check(const ExperimentConfig& c, int) {
  const auto model = build_model<D>(c.field);
  RunOutputs out;
  out.summary["model"] = model_json(model);
  auto reports = structural_checks<D>(model, c.checks.points, c.seed, c.checks.tolerance);
  if (model.kind() == ModelKind::KraichnanTorus) {
    ConditionReport cov{"covariance_closed_form", ConditionReport::Bound::AtMost, {}, {}};
    const GaussianSource src(c.seed, stream_id(StreamKind::Auxiliary, 5));
    const int pairs = std::min(c.checks.points, 100);
    for (int n = 0; n < pairs; ++n) {
      const Vec<D> x = sample_point<D>(src, static_cast<std::uint64_t>(2 * n));
      const Vec<D> y = sample_point<D>(src, static_cast<std::uint64_t>(2 * n + 1));
      const double err = (covariance<D>(model, x, y) -
                          covariance_closed_form<D>(c.field.alpha, c.field.zmax, Vec<D>(x - y), c.field.energy_scale))
                             .cwiseAbs()
                             .maxCoeff();
      std::vector<double> p(x.data(), x.data() + D);
      p.insert(p.end(), y.data(), y.data() + D);
      cov.add(std::move(p), err, c.checks.tolerance);
    }
    reports.push_back(cov);
  }
  add_reports(out, reports, [](const std::string&) { return true; });
  return out;
}

template <int D> RunOutputs conditions(const ExperimentConfig& c, int) {
  const auto model = build_model<D>(c.field);
  RunOutputs out;
  out.summary["model"] = model_json(model);
  add_reports(out, condition_survey<D>(model, c.checks.points, c.seed), survey_required);
  return out;
}

template <int D> RunOutputs lyapunov(const ExperimentConfig& c, int workers) {
  const auto model = build_model<D>(c.field);
  const auto& dy = c.dynamics;
  const auto est = estimate_lambda1<D>(model, dy.A, dy.T, dy.dt, c.ensemble.realizations, c.seed,
                                       {c.lyapunov.qr_every, workers, scheme_of(dy.scheme)});
  RunOutputs out;
  CsvTable t{{"realization", "lambda"}, {}};
  for (std::size_t r = 0; r < est.finite_time.size(); ++r) t.add(r, est.finite_time[r]);
  out.tables.emplace_back(std::string("lyapunov.csv"), std::move(t));

  if (c.lyapunov.snapshot_particles > 0) {
    EnsembleConfig<D> ec;
    const GaussianSource src(c.seed, stream_id(StreamKind::Initial, 0, 1));
    for (int i = 0; i < c.lyapunov.snapshot_particles; ++i)
      ec.initial.push_back(sample_point<D>(src, static_cast<std::uint64_t>(i)));
    ec.T = dy.T;
    ec.dt = dy.dt;
    ec.amplitude = dy.A;
    ec.seed = c.seed;
    ec.track_tangents = true;
    ec.snapshot_every = dy.snapshot_every;
    ec.qr_every = c.lyapunov.qr_every;
    ec.scheme = scheme_of(dy.scheme);
    std::vector<std::string> cols{"realization", "t", "particle"};
    for (int i = 0; i < D; ++i) cols.push_back("x" + std::to_string(i + 1));
    for (int i = 0; i < D; ++i)
      for (int k = 0; k < D; ++k) cols.push_back("J" + std::to_string(i + 1) + std::to_string(k + 1));
    cols.push_back("log_growth");
    CsvTable snap{cols, {}};
    for (const auto& s : run_ensemble<D>(model, ec)) {
      for (std::size_t p = 0; p < s.size(); ++p) {
        std::vector<std::string> row{"0", format_double(s.t), std::to_string(p)};
        for (int i = 0; i < D; ++i) row.push_back(format_double(s.positions[p][i]));
        for (int i = 0; i < D; ++i)
          for (int k = 0; k < D; ++k) row.push_back(format_double((*s.tangents)[p](i, k)));
        row.push_back(format_double((*s.log_growth)[p]));
        snap.rows.push_back(std::move(row));
      }
    }
    out.tables.emplace_back(std::string("snapshots.csv"), std::move(snap));
  }

  out.summary["model"] = model_json(model);
  out.summary["lambda1"] = est.lambda1;
  out.summary["std_error"] = est.std_error;
  out.summary["ci95"] = {est.ci_low(), est.ci_high()};
  out.summary["ci_excludes_zero"] = est.ci_low() > 0.0 || est.ci_high() < 0.0;
  out.summary["burn_in_drift"] = est.burn_in_drift;
  out.summary["realizations"] = est.realizations;
  out.lines.push_back("lambda1 = " + format_double(est.lambda1) + " +- " + format_double(1.96 * est.std_error) +
                      " (95% CI)");
  return out;
}

template <int D> RunOutputs moment_lyapunov(const ExperimentConfig& c, int workers) {
  const auto model = build_model<D>(c.field);
  const auto& dy = c.dynamics;
  MomentOptions mo;
  mo.workers = workers;
  const auto curve =
      estimate_moment_lyapunov<D>(model, dy.A, c.moment.p_grid, dy.T, dy.dt, c.moment.samples, c.seed, mo);
  RunOutputs out;
  CsvTable t{{"p", "Lambda", "stderr"}, {}};
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < curve.p.size(); ++i) {
    t.add(curve.p[i], curve.Lambda[i], curve.std_error[i]);
    pts.push_back({{"p", curve.p[i]},
                   {"Lambda", curve.Lambda[i]},
                   {"std_error", curve.std_error[i]},
                   {"weight_collapse", static_cast<bool>(curve.ess_collapsed[i])}});
  }
  out.tables.emplace_back(std::string("moment_lyapunov.csv"), std::move(t));

  // lambda1 from the same samples: the mean of log|J v| / T
  std::vector<double> rates(curve.log_growth.size());
  for (std::size_t m = 0; m < rates.size(); ++m) rates[m] = curve.log_growth[m] / curve.T;
  const auto ms = mean_and_se(rates);
  LyapunovEstimate l1;
  l1.lambda1 = ms.mean;
  l1.std_error = ms.se;
  out.summary["model"] = model_json(model);
  out.summary["lambda1"] = l1.lambda1;
  out.summary["lambda1_std_error"] = l1.std_error;
  out.summary["samples"] = curve.log_growth.size();
  out.summary["curve"] = pts;
  out.lines.push_back("lambda1 (same samples) = " + format_double(l1.lambda1) + " +- " +
                      format_double(1.96 * l1.std_error));

  const auto has = [&](double p) { return std::find(curve.p.begin(), curve.p.end(), p) != curve.p.end(); };
  if (has(c.moment.p_small) && has(-c.moment.p_small)) {
    const auto chk = check_slope_at_zero(curve, l1, c.moment.p_small);
    nlohmann::ordered_json j{{"slope", chk.slope},           {"slope_se", chk.slope_se},
                             {"difference", chk.difference}, {"tolerance", chk.tolerance},
                             {"pass", chk.pass},             {"all_pass", chk.all_pass()}};
    for (const auto* group : {&chk.concavity, &chk.jensen})
      for (const auto& s : *group)
        j["structure"].push_back({{"name", s.name}, {"measured", s.measured}, {"tolerance", s.tolerance}, {"pass", s.pass}});
    out.summary["slope_check"] = j;
    out.lines.push_back(std::string(chk.all_pass() ? "PASS" : "FAIL") + " slope/concavity/Jensen (slope " +
                        format_double(chk.slope) + ")");
  } else {
    out.summary["slope_check"] = "skipped: p grid lacks +-p_small";
  }

  if (c.moment.twisted_grid > 0) {
    if constexpr (D == 2) {
      TwistedOptions to;
      to.dt = c.moment.twisted_dt;
      to.workers = workers;
      const auto tw = estimate_twisted_eigen(model, dy.A, c.moment.twisted_p, c.moment.twisted_grid,
                                             c.moment.twisted_step, c.moment.twisted_samples, c.seed, to);
      double dev = 0.0;
      for (double v : tw.psi) dev = std::max(dev, std::abs(v - 1.0));
      out.summary["twisted"] = {{"p", c.moment.twisted_p},         {"Lambda", tw.Lambda},
                                {"std_error", tw.std_error},       {"eigenvalue", tw.eigenvalue},
                                {"iterations", tw.iterations},     {"grid", tw.grid},
                                {"psi_sup_deviation", dev}};
      out.lines.push_back("twisted Lambda(" + label(c.moment.twisted_p) + ") = " + format_double(tw.Lambda) + " +- " +
                          format_double(1.96 * tw.std_error));
    } else {
      throw ConfigError("moment.twisted_grid: the twisted-semigroup estimator needs d = 2");
    }
  }
  return out;
}

inline TwoPointOptions two_point_options(const ExperimentConfig& c, int workers) {
  TwoPointOptions o;
  o.T = c.dynamics.T;
  o.dt = c.dynamics.dt;
  o.snapshot_every = c.dynamics.snapshot_every;
  o.workers = workers;
  o.scheme = scheme_of(c.dynamics.scheme);
  return o;
}

template <int D> RunOutputs two_point(const ExperimentConfig& c, int workers) {
  const auto model = build_model<D>(c.field);
  const auto& tp = c.two_point;
  auto series = two_point_moments<D>(model, c.dynamics.A, c.dynamics.kappa, to_vec<D>(tp.x), to_vec<D>(tp.y),
                                     tp.p_list, c.ensemble.realizations, c.seed, two_point_options(c, workers));
  RunOutputs out;
  out.summary["model"] = model_json(model);
  for (std::size_t i = 0; i < tp.p_list.size(); ++i) {
    const double p = tp.p_list[i];
    fit_small_separation(series[i], p, tp.max_separation);
    out.tables.emplace_back("two_point_p" + label(p) + ".csv", series_table(series[i]));
    out.summary["moments"].push_back(prepend({{"p", p}}, fit_json(series[i])));
    out.lines.push_back(fit_line("E d_t^-" + label(p), series[i]));
  }
  if (!tp.separations.empty()) {
    const auto d = vp_drift_check<D>(model, c.dynamics.A, c.dynamics.kappa, tp.p_list.front(), tp.separations,
                                     tp.t_star, c.ensemble.realizations, c.seed, std::nullopt, 1.5, c.dynamics.dt,
                                     workers);
    CsvTable t{{"separation", "rho", "stderr"}, {}};
    for (const auto& r : d.records) t.add(r.separation, r.rho, r.rho_se);
    out.tables.emplace_back(std::string("drift.csv"), std::move(t));
    out.summary["drift"] = {{"p", d.p}, {"t_star", d.t_star}, {"rho_max", d.rho_max}, {"plateau", d.plateau}};
  }
  return out;
}

template <int D> RunOutputs correlation(const ExperimentConfig& c, int workers) {
  const auto model = build_model<D>(c.field);
  const auto& co = c.correlation;
  const ProductObservable<D> psi{parse_trig_series<D>(co.f), parse_trig_series<D>(co.g)};
  WindowOptions w;
  w.t_min = co.t_min;
  w.noise_multiple = co.noise_multiple;
  const auto s = correlation_decay<D>(model, c.dynamics.A, c.dynamics.kappa, psi, to_vec<D>(co.x), to_vec<D>(co.y),
                                      c.ensemble.realizations, c.seed, two_point_options(c, workers), w);
  RunOutputs out;
  out.tables.emplace_back(std::string("correlation.csv"), series_table(s));
  out.summary["model"] = model_json(model);
  out.summary["fit"] = fit_json(s);
  out.lines.push_back(fit_line("|E psi(x_t, y_t)|", s));
  return out;
}

template <int D> RunOutputs mixing(const ExperimentConfig& c, int workers) {
  const auto model = build_model<D>(c.field);
  const auto& mx = c.mixing;
  const auto u = parse_trig_series<D>(mx.initial);
  PairingOptions po;
  po.T = c.dynamics.T;
  po.dt = c.dynamics.dt;
  po.snapshot_every = c.dynamics.snapshot_every;
  po.workers = workers;
  WindowOptions w;
  w.t_min = mx.t_min;
  std::vector<PairingSeries<D>> runs;
  mixing_decay<D>(model, c.dynamics.A, c.dynamics.kappa, u, mx.z_cut, mx.quadrature,
                  static_cast<int>(c.ensemble.inner_samples), c.ensemble.realizations, mx.s_values.front(), c.seed,
                  po, w, &runs);
  RunOutputs out;
  out.summary["model"] = model_json(model);
  for (double s : mx.s_values) {
    const auto series = proxy_series<D>(runs, s, w);
    out.tables.emplace_back("mixing_s" + label(s) + ".csv", series_table(series));
    out.summary["decay"].push_back(
        prepend({{"s", s}, {"quadrature_floor", runs.front().quadrature_floor(s)}}, fit_json(series)));
    out.lines.push_back(fit_line("H^-" + label(s) + " proxy", series));
  }
  std::vector<std::string> cols{"t"};
  for (int i = 0; i < D; ++i) cols.push_back("z" + std::to_string(i + 1));
  cols.push_back("re");
  cols.push_back("im");
  CsvTable pt{cols, {}};
  const auto& first = runs.front();
  for (std::size_t t = 0; t < first.times.size(); ++t)
    for (std::size_t k = 0; k < first.wavevectors.size(); ++k) {
      std::vector<std::string> row{format_double(first.times[t])};
      for (int i = 0; i < D; ++i) row.push_back(std::to_string(first.wavevectors[k][i]));
      row.push_back(format_double(first.c[t][k].real()));
      row.push_back(format_double(first.c[t][k].imag()));
      pt.rows.push_back(std::move(row));
    }
  out.tables.emplace_back(std::string("pairings.csv"), std::move(pt));
  return out;
}

inline RunOutputs spde(const ExperimentConfig& c, int) {
  const auto model = build_model<2>(c.field);
  const auto& sp = c.spectral;
  SpdeRunOptions o;
  o.T = c.dynamics.T;
  o.N = sp.N;
  o.params = {c.dynamics.A, c.dynamics.kappa, c.dynamics.C, c.dynamics.dt, sp.max_substeps};
  const auto u0 = SpectralField::from_trig(sp.N, parse_trig_series<2>(sp.initial));
  const auto h = run_spde(model, u0, o, c.seed, 0);
  const auto e = energy_balance(h);
  RunOutputs out;
  CsvTable t{{"t", "L2", "H1", "Hminus1", "residual"}, {}};
  for (std::size_t i = 0; i < h.times.size(); ++i) {
    if (i % static_cast<std::size_t>(sp.record_every) != 0 && i + 1 != h.times.size()) continue;
    t.add(h.times[i], std::sqrt(h.l2_squared[i]), std::sqrt(h.l2_squared[i] + h.gradient_squared[i]), h.hminus1[i],
          e.residual[i]);
  }
  out.tables.emplace_back(std::string("spde.csv"), std::move(t));
  out.summary["model"] = model_json(model);
  out.summary["l2_ratio"] = std::sqrt(h.l2_squared.back() / h.l2_squared.front());
  out.summary["energy_residual_max"] = e.max_relative;
  out.summary["max_substeps_used"] = h.max_substeps_used;
  out.lines.push_back("||u_T|| / ||u_0|| = " + format_double(std::sqrt(h.l2_squared.back() / h.l2_squared.front())) +
                      ", energy residual " + format_double(e.max_relative));
  return out;
}

inline RunOutputs sweep(const ExperimentConfig& c, int workers) {
  const auto model = build_model<2>(c.field);
  const auto& sp = c.spectral;
  SweepOptions o;
  o.N = sp.N;
  o.kappa = c.dynamics.kappa;
  o.C = c.dynamics.C;
  o.T = c.dynamics.T;
  o.dt = c.dynamics.dt;
  o.realizations = c.ensemble.realizations;
  o.record_every = sp.record_every;
  o.fit_begin = sp.fit_begin;
  o.fit_end = sp.fit_end;
  o.max_substeps = sp.max_substeps;
  o.workers = workers;
  const auto r = enhanced_dissipation_sweep(model, parse_trig_series<2>(sp.initial), sp.amplitudes, c.seed, o);
  RunOutputs out;
  CsvTable t{{"A", "t", "value"}, {}};
  CsvTable rates{{"A", "rate", "r2"}, {}};
  for (const auto& e : r.entries) {
    for (std::size_t i = 0; i < e.series.times.size(); ++i) t.add(e.amplitude, e.series.times[i], e.series.values[i]);
    rates.add(e.amplitude, e.series.rate(), e.series.r2());
    out.summary["entries"].push_back(
        prepend({{"A", e.amplitude}, {"max_substeps_used", e.max_substeps_used}}, fit_json(e.series)));
    out.lines.push_back(fit_line("A = " + label(e.amplitude), e.series));
  }
  out.tables.emplace_back(std::string("sweep.csv"), std::move(t));
  out.tables.emplace_back(std::string("sweep_rates.csv"), std::move(rates));
  out.summary["model"] = model_json(model);
  out.summary["increasing"] = r.increasing;
  if (std::isfinite(r.exponent)) out.summary["exponent"] = r.exponent;
  out.lines.push_back("gamma(A) increasing: " + std::string(r.increasing ? "yes" : "no"));
  return out;
}

template <int D> RunOutputs dispatch(const std::string& sub, const ExperimentConfig& c, int workers) {
  if (sub == "fields-check") return fields_check<D>(c, workers);
  if (sub == "conditions") return conditions<D>(c, workers);
  if (sub == "lyapunov") return lyapunov<D>(c, workers);
  if (sub == "moment-lyapunov") return moment_lyapunov<D>(c, workers);
  if (sub == "two-point") return two_point<D>(c, workers);
  if (sub == "correlation") return correlation<D>(c, workers);
  if (sub == "mixing") return mixing<D>(c, workers);
  if constexpr (D == 2) {
    if (sub == "spde") return spde(c, workers);
    if (sub == "sweep") return sweep(c, workers);
  }
  if (sub == "spde" || sub == "sweep") throw ConfigError("field.d: " + sub + " runs on T^2 only");
  throw ConfigError("unknown subcommand '" + sub + "'");
}

}  // namespace app

/// Runs one subcommand end to end and returns its exit code. Diagnostics go
/// to `err`, progress lines to `log`.
inline int run_subcommand(const std::string& sub, const std::string& config_path,
                          const std::optional<std::string>& out_dir, int workers, std::ostream& log,
                          std::ostream& err) {
  try {
    if (std::find(subcommands().begin(), subcommands().end(), sub) == subcommands().end())
      throw ConfigError("unknown subcommand '" + sub + "'");
    if (workers < 1) throw ConfigError("--workers: must be at least 1");
    const ExperimentConfig cfg = load_config(config_path);
    RunOutputs res = cfg.field.d == 2 ? app::dispatch<2>(sub, cfg, workers) : app::dispatch<3>(sub, cfg, workers);

    ArtifactWriter writer(out_dir.value_or(cfg.output), sub, cfg.resolved());
    for (const auto& [name, table] : res.tables) writer.write_csv(name, table);
    nlohmann::ordered_json summary{{"subcommand", sub}, {"pass", res.pass}};
    summary.update(res.summary);
    writer.write_json("summary.json", summary);
    for (const auto& line : res.lines) log << line << "\n";
    log << (res.pass ? "PASS " : "FAIL ") << sub << " -> " << writer.directory().string() << "\n";
    return res.pass ? kExitOk : kExitCheckFailed;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const NumericalGuardError& e) {
    err << "numerical guard: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

}  // namespace transportlab
