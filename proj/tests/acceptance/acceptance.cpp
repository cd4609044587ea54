// Acceptance run: one PASS/FAIL line per criterion, plus CSV artifacts under
// ./acceptance_out for the plotting scripts. Exit status is nonzero only if
// the run itself breaks; individual criterion failures are reported, not
// turned into an error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "transportlab/app.hpp"

using namespace transportlab;
namespace fs = std::filesystem;

namespace {

const fs::path kOut = "acceptance_out";

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = s <= budget_s;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s [%2d] %s: %s (%.1f s of %.0f s%s)\n", ok ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), s,
              budget_s, in_time ? "" : ", over budget");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string g(double v) { return fmt("%.4g", v); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ArtifactWriter writer(const std::string& name, const nlohmann::ordered_json& params) {
  return ArtifactWriter(kOut / name, "acceptance:" + name, params);
}

const VelocityModel<2>& kraichnan() {
  static const auto m = build_kraichnan<2>(4.0, 4);
  return m;
}

// shared between criteria 6, 7 and 8
LyapunovEstimate lambda_kraichnan;
MomentLyapunovCurve moment_curve;
bool have_lambda = false, have_curve = false;

Outcome structural() {
  double worst = 0.0;
  for (const auto& rep : structural_checks<2>(kraichnan(), 1000, 101))
    if (rep.name != "shell_summability") worst = std::max(worst, rep.max());
  const double kr = worst;
  worst = 0.0;
  for (const auto& rep : structural_checks<2>(build_br(), 1000, 102))
    if (rep.name != "shell_summability") worst = std::max(worst, rep.max());
  return {kr <= 1e-12 && worst <= 1e-12, "max |div|, |<Ds,s>|: Kraichnan " + g(kr) + ", BR " + g(worst)};
}

Outcome covariance_identity() {
  const GaussianSource src(103, 0);
  double err = 0.0;
  for (int n = 0; n < 100; ++n) {
    const Vec<2> x = sample_point<2>(src, 2 * n), y = sample_point<2>(src, 2 * n + 1);
    err = std::max(err, (covariance<2>(kraichnan(), x, y) - covariance_closed_form<2>(4.0, 4, Vec<2>(x - y)))
                            .cwiseAbs()
                            .maxCoeff());
  }
  const auto one = build_kraichnan<2>(4.0, 1);
  const Vec<2> x(0.7, 2.1);
  const double d11 = covariance<2>(one, x, x)(0, 0);
  return {err <= 1e-12 && std::abs(d11 - 0.28125) <= 1e-12,
          "max entry error " + g(err) + ", D(x,x)_11 = " + fmt("%.15g", d11)};
}

Outcome volume() {
  auto defects = [](int refine) {
    std::vector<double> d(256);
    const GaussianSource src(104, 1);
    parallel_for(256, 1, [&](std::size_t r) {
      EnsembleConfig<2> cfg;
      cfg.initial = {sample_point<2>(src, r)};
      cfg.T = 1.0;
      cfg.dt = 1e-3;
      cfg.refine = refine;
      cfg.seed = 104;
      cfg.realization = r;
      cfg.track_tangents = true;
      cfg.qr_every = 0;
      cfg.snapshot_every = 1000;
      d[r] = std::abs((*run_ensemble<2>(kraichnan(), cfg).back().tangents)[0].determinant() - 1.0);
    });
    return median(d);
  };
  const double a = defects(0), b = defects(1);
  // same Brownian paths at dt and dt/2; first order halves the defect
  return {a <= 5e-3 && b / a <= 0.6,
          "median |det J - 1| = " + g(a) + " (dt), " + g(b) + " (dt/2), ratio " + g(b / a)};
}

Outcome pure_heat() {
  const auto u = SpectralField::from_trig(64, parse_trig_series<2>("cos(1,0)"));
  SpdeRunOptions o;
  o.T = 1.0;
  o.N = 64;
  o.params = {0.0, 0.1, 0.0, 1e-3, 64};
  const auto h = run_spde(kraichnan(), u, o, 105, 0);
  const double ratio = std::sqrt(h.l2_squared.back() / h.l2_squared.front());
  return {std::abs(ratio - std::exp(-0.1)) <= 1e-6, "L2 ratio error " + g(std::abs(ratio - std::exp(-0.1)))};
}

Outcome conservation() {
  const auto u = SpectralField::from_trig(64, parse_trig_series<2>("cos(1,0) + sin(0,2)"));
  SpdeRunOptions o;
  o.T = 1.0;
  o.N = 64;
  o.params = {1.0, 0.0, 0.0, 1e-3, 64};
  const auto h = run_spde(kraichnan(), u, o, 106, 0);
  double drift = 0.0;
  for (double e : h.l2_squared) drift = std::max(drift, std::abs(std::sqrt(e / h.l2_squared.front()) - 1.0));
  auto w = writer("spde_conservation", {{"A", 1}, {"kappa", 0}, {"dt", 1e-3}, {"N", 64}, {"seed", 106}});
  CsvTable t{{"t", "L2", "H1", "Hminus1", "residual"}, {}};
  const auto e = energy_balance(h);
  for (std::size_t i = 0; i < h.times.size(); i += 10)
    t.add(h.times[i], std::sqrt(h.l2_squared[i]), std::sqrt(h.l2_squared[i] + h.gradient_squared[i]), h.hminus1[i],
          e.residual[i]);
  w.write_csv("spde.csv", t);
  return {drift <= 1e-3, "max relative L2 drift " + g(drift) + " (substeps up to " +
                             std::to_string(h.max_substeps_used) + ")"};
}

Outcome lyapunov_positive() {
  lambda_kraichnan = estimate_lambda1<2>(kraichnan(), 1.0, 200.0, 1e-3, 64, 107);
  have_lambda = true;
  const auto br = estimate_lambda1<2>(build_br(), 1.0, 200.0, 1e-3, 64, 108);
  auto w = writer("lyapunov", {{"T", 200}, {"dt", 1e-3}, {"realizations", 64}, {"seeds", {107, 108}}});
  CsvTable t{{"model", "lambda1", "stderr", "ci_low", "ci_high"}, {}};
  t.add("kraichnan", lambda_kraichnan.lambda1, lambda_kraichnan.std_error, lambda_kraichnan.ci_low(),
        lambda_kraichnan.ci_high());
  t.add("br", br.lambda1, br.std_error, br.ci_low(), br.ci_high());
  w.write_csv("lyapunov.csv", t);
  return {lambda_kraichnan.ci_low() > 0.0 && br.ci_low() > 0.0,
          "Kraichnan " + g(lambda_kraichnan.lambda1) + " CI [" + g(lambda_kraichnan.ci_low()) + ", " +
              g(lambda_kraichnan.ci_high()) + "], BR " + g(br.lambda1) + " CI [" + g(br.ci_low()) + ", " +
              g(br.ci_high()) + "]"};
}

Outcome moment_structure() {
  if (!have_lambda) return {false, "needs the lambda1 estimate of criterion 6"};
  moment_curve = estimate_moment_lyapunov<2>(kraichnan(), 1.0, {-0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5}, 20.0, 5e-3,
                                             1000, 109);
  have_curve = true;
  const auto chk = check_slope_at_zero(moment_curve, lambda_kraichnan, 0.1);
  const bool zero = moment_curve.Lambda[moment_curve.index_of(0.0)] == 0.0;
  auto w = writer("moment_lyapunov", {{"T", 20}, {"dt", 5e-3}, {"samples", 1000}, {"seed", 109}});
  CsvTable t{{"p", "Lambda", "stderr"}, {}};
  for (std::size_t i = 0; i < moment_curve.p.size(); ++i)
    t.add(moment_curve.p[i], moment_curve.Lambda[i], moment_curve.std_error[i]);
  w.write_csv("moment_lyapunov.csv", t);
  w.write_json("summary.json", {{"lambda1", lambda_kraichnan.lambda1}, {"lambda1_se", lambda_kraichnan.std_error}});
  int concave = 0, jensen = 0;
  for (const auto& c : chk.concavity) concave += c.pass;
  for (const auto& c : chk.jensen) jensen += c.pass;
  return {zero && chk.all_pass(),
          std::string("Lambda(0) ") + (zero ? "= 0" : "!= 0") + ", slope " + g(chk.slope) + " vs lambda1 " +
              g(chk.lambda1) + " (tol " + g(chk.tolerance) + "), concave " + std::to_string(concave) + "/" +
              std::to_string(chk.concavity.size()) + ", Jensen " + std::to_string(jensen) + "/" +
              std::to_string(chk.jensen.size())};
}

Outcome two_point_consistency() {
  if (!have_curve) return {false, "needs the moment curve of criterion 7"};
  const double lam = moment_curve.Lambda[moment_curve.index_of(0.25)];
  const double lam_se = moment_curve.std_error[moment_curve.index_of(0.25)];
  TwoPointOptions o;
  o.T = 40.0;
  o.dt = 1e-2;
  o.snapshot_every = 50;
  auto s = two_point_moments<2>(kraichnan(), 1.0, 0.0, Vec<2>(1.0, 1.0), Vec<2>(1.001, 1.0), {0.25}, 2000, 110, o)[0];
  fit_small_separation(s, 0.25, 0.1);
  auto w = writer("two_point", {{"p", 0.25}, {"separation", 1e-3}, {"pairs", 2000}, {"T", 40}, {"dt", 1e-2}});
  w.write_csv("two_point_p0.25.csv", app::series_table(s));
  w.write_json("summary.json", app::fit_json(s));
  const double rel = std::abs(s.rate() - lam) / std::abs(lam);

  TwistedOptions to;
  to.dt = 5e-3;
  const auto tw = estimate_twisted_eigen(kraichnan(), 1.0, 0.25, 6, 2.0, 64, 111, to);
  const double gap = std::abs(tw.Lambda - lam), tol = 2.0 * std::hypot(tw.std_error, lam_se);
  return {s.fit.has_value() && rel <= 0.25 && gap <= tol,
          "two-point rate " + g(s.rate()) + " vs Lambda(0.25) " + g(lam) + " (" + fmt("%.1f", 100 * rel) +
              "%), twisted " + g(tw.Lambda) + " +- " + g(tw.std_error) + " (gap " + g(gap) + " <= " + g(tol) + "?)"};
}

Outcome correlation() {
  TwoPointOptions o;
  o.T = 20.0;
  o.dt = 1e-2;
  o.snapshot_every = 25;
  WindowOptions win;
  win.t_min = 1.0;
  const auto psi = cos_cos_observable<2>();
  const auto a = correlation_decay<2>(kraichnan(), 1.0, 0.0, psi, Vec<2>(0, 0), Vec<2>(0.5, 0.5), 4000, 112, o, win);
  const auto b = correlation_decay<2>(kraichnan(), 1.0, 0.0, psi, Vec<2>(0, 0), Vec<2>(0.5, 0.5), 8000, 112, o, win);
  auto w = writer("correlation", {{"x", {0, 0}}, {"y", {0.5, 0.5}}, {"T", 20}, {"dt", 1e-2}, {"M", {4000, 8000}}});
  w.write_csv("correlation_M4000.csv", app::series_table(a));
  w.write_csv("correlation_M8000.csv", app::series_table(b));
  if (!a.fit || !b.fit) return {false, "no fit: " + a.note + " / " + b.note};
  // rate > 0 means the fitted log-slope is negative
  const bool ok = a.rate() > 0.0 && b.rate() > 0.0 && a.r2() >= 0.9 && b.r2() >= 0.9 &&
                  b.rate_ci_halfwidth() < a.rate_ci_halfwidth();
  return {ok, "log-slope " + g(-b.rate()) + " (R^2 " + g(b.r2()) + ", M=8000), CI half-width " +
                  g(a.rate_ci_halfwidth()) + " -> " + g(b.rate_ci_halfwidth())};
}

Outcome mixing() {
  const auto u = parse_trig_series<2>("cos(1,0) + sin(0,2)");
  PairingOptions o;
  o.T = 20.0;
  o.dt = 2e-2;
  o.snapshot_every = 25;
  const auto s0 = mixing_decay<2>(kraichnan(), 1.0, 0.0, u, 4, 32, 1, 16, 1.0, 113, o);
  const auto s1 = mixing_decay<2>(kraichnan(), 1.0, 0.01, u, 4, 32, 8, 16, 1.0, 113, o);
  auto w = writer("mixing", {{"z_cut", 4}, {"Q", 32}, {"realizations", 16}, {"inner_samples", 8}, {"s", 1}});
  w.write_csv("mixing_kappa0.csv", app::series_table(s0));
  w.write_csv("mixing_kappa0.01.csv", app::series_table(s1));
  if (!s0.fit || !s1.fit) return {false, "no fit: " + s0.note + " / " + s1.note};
  const double rel = std::abs(s1.rate() - s0.rate()) / std::abs(s0.rate());
  const bool ok = s0.rate() > 0.0 && s1.rate() > 0.0 && s0.r2() >= 0.9 && s1.r2() >= 0.9 && rel <= 0.3;
  return {ok, "H^-1 log-slope " + g(-s0.rate()) + " (kappa 0, R^2 " + g(s0.r2()) + "), " + g(-s1.rate()) +
                  " (kappa 0.01, R^2 " + g(s1.r2()) + "), rates differ " + fmt("%.0f", 100 * rel) + "%"};
}

Outcome enhanced_dissipation() {
  SweepOptions o;
  o.N = 64;
  o.kappa = 0.01;
  o.T = 40.0;
  o.dt = 1e-3;
  o.realizations = 4;
  o.record_every = 100;
  const auto r = enhanced_dissipation_sweep(kraichnan(), parse_trig_series<2>("cos(1,0) + sin(0,2)"), {0, 1, 2, 4},
                                            114, o);
  auto w = writer("sweep", {{"kappa", 0.01}, {"N", 64}, {"T", 40}, {"dt", 1e-3}, {"realizations", 4}});
  CsvTable t{{"A", "t", "value"}, {}};
  CsvTable rates{{"A", "rate", "r2"}, {}};
  for (const auto& e : r.entries) {
    for (std::size_t i = 0; i < e.series.times.size(); ++i) t.add(e.amplitude, e.series.times[i], e.series.values[i]);
    rates.add(e.amplitude, e.series.rate(), e.series.r2());
  }
  w.write_csv("sweep.csv", t);
  w.write_csv("sweep_rates.csv", rates);
  const auto gamma = [&](std::size_t i) { return r.entries[i].series.rate(); };
  const double r12 = gamma(2) / gamma(1), r24 = gamma(3) / gamma(2);
  std::string rates_text;
  for (std::size_t i = 0; i < r.entries.size(); ++i) rates_text += (i ? ", " : "") + g(gamma(i));
  return {r.increasing && r12 >= 1.5 && r24 >= 1.5,
          "gamma(A=0,1,2,4) = " + rates_text + "; gamma(2)/gamma(1) " + g(r12) + ", gamma(4)/gamma(2) " + g(r24) +
              ", q = " + g(r.exponent)};
}

Outcome br_ranks() {
  const GaussianSource xs(115, 1), ys(115, 2);
  int tested = 0, full = 0;
  for (std::uint64_t i = 0; tested < 1000; ++i) {
    const Vec<2> x = sample_point<2>(xs, i), y = sample_point<2>(ys, i);
    if (std::min(torus_distance<2>(x, y), br_degeneracy_distance(x, y)) < 0.05) continue;
    ++tested;
    full += check_br_two_point_span(x, y, true).rank == 4;
  }
  const int raw = check_br_two_point_span(Vec<2>(0, 0), Vec<2>(kPi, kPi), false).rank;
  const Vec<2> x(0.3, 1.1);
  const int diag = check_br_two_point_span(x, x, true).rank;
  return {full == 1000 && raw == 2 && diag < 4, "rank 4 at " + std::to_string(full) + "/1000 generic pairs, raw rank " +
                                                    std::to_string(raw) + " at (0,0),(pi,pi), diagonal rank " +
                                                    std::to_string(diag)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

using Ini = std::map<std::string, std::map<std::string, std::string>>;

std::string to_ini(const Ini& ini) {
  std::string out;
  for (const auto& [section, keys] : ini) {
    out += "[" + section + "]\n";
    for (const auto& [k, v] : keys) out += k + " = " + v + "\n";
  }
  return out;
}

Outcome determinism() {
  const Ini base{{"run", {{"seed", "116"}}},
                 {"field", {{"kind", "kraichnan"}, {"d", "2"}, {"alpha", "4"}, {"zmax", "3"}}},
                 {"dynamics", {{"A", "1"}, {"kappa", "0.01"}, {"dt", "0.01"}, {"T", "1"}, {"snapshot_every", "10"}}},
                 {"ensemble", {{"realizations", "64"}, {"inner_samples", "3"}}},
                 {"checks", {{"points", "200"}}},
                 {"lyapunov", {{"snapshot_particles", "4"}}},
                 {"moment",
                  {{"samples", "1000"},
                   {"twisted_grid", "2"},
                   {"twisted_samples", "8"},
                   {"twisted_step", "0.5"},
                   {"twisted_dt", "0.01"}}},
                 {"two_point", {{"separations", "0.01, 0.1"}, {"t_star", "0.5"}}},
                 {"mixing", {{"z_cut", "2"}, {"quadrature", "16"}}},
                 {"spectral", {{"N", "16"}, {"amplitudes", "0, 1"}, {"record_every", "5"}}}};
  const std::vector<std::pair<std::string, Ini>> runs{
      {"fields-check", {}},
      {"conditions", {}},
      {"lyapunov", {{"ensemble", {{"realizations", "8"}}}, {"dynamics", {{"T", "50"}, {"dt", "0.05"}}}}},
      {"moment-lyapunov", {{"dynamics", {{"T", "0.5"}}}}},
      {"two-point", {}},
      {"correlation", {}},
      {"mixing", {{"ensemble", {{"realizations", "3"}}}, {"dynamics", {{"T", "0.5"}}}}},
      {"spde", {{"dynamics", {{"T", "0.2"}}}}},
      {"sweep", {{"ensemble", {{"realizations", "2"}}}, {"dynamics", {{"T", "0.5"}}}}}};
  const fs::path dir = kOut / "determinism";
  fs::create_directories(dir);
  int identical = 0, files = 0;
  std::string bad;
  for (const auto& [sub, overrides] : runs) {
    Ini ini = base;
    for (const auto& [section, keys] : overrides)
      for (const auto& [k, v] : keys) ini[section][k] = v;
    const fs::path cfg = dir / (sub + ".ini");
    std::ofstream(cfg) << to_ini(ini);
    std::ostringstream log, err;
    for (int workers : {1, 8}) {
      const auto out = dir / (sub + "_w" + std::to_string(workers));
      const int code = run_subcommand(sub, cfg.string(), out.string(), workers, log, err);
      if (code != 0) return {false, sub + " exited " + std::to_string(code) + ": " + err.str()};
    }
    for (const auto& e : fs::directory_iterator(dir / (sub + "_w1"))) {
      if (e.path().extension() != ".csv") continue;
      ++files;
      const auto other = dir / (sub + "_w8") / e.path().filename();
      if (fs::exists(other) && slurp(e.path()) == slurp(other))
        ++identical;
      else
        bad += " " + sub + "/" + e.path().filename().string();
    }
  }
  return {identical == files && files > 0, std::to_string(identical) + "/" + std::to_string(files) +
                                               " CSVs byte-identical across 1 and 8 workers over " +
                                               std::to_string(runs.size()) + " subcommands" + bad};
}

}  // namespace

int main() {
  fs::create_directories(kOut);
  criterion(1, "structural identities", 5, structural);
  criterion(2, "covariance identity", 5, covariance_identity);
  criterion(3, "volume preservation", 120, volume);
  criterion(4, "pure-heat oracle", 10, pure_heat);
  criterion(5, "pathwise L2 conservation", 120, conservation);
  criterion(6, "lambda1 > 0", 900, lyapunov_positive);
  criterion(7, "moment Lyapunov structure", 1200, moment_structure);
  criterion(8, "two-point/tangent consistency", 1200, two_point_consistency);
  criterion(9, "correlation decay", 900, correlation);
  criterion(10, "mixing decay", 900, mixing);
  criterion(11, "enhanced dissipation", 1800, enhanced_dissipation);
  criterion(12, "BR Hoermander ranks", 5, br_ranks);
  criterion(13, "determinism", 600, determinism);
  std::printf("%d of 13 criteria failed\n", failures);
  return 0;
}
