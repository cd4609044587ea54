#pragma once

// Experiment configuration: INI sections parsed with Boost.PropertyTree,
// validated strictly (unknown keys are errors, the seed is mandatory).

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace transportlab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FieldSpec {
  std::string kind = "kraichnan";  // kraichnan | br | constant
  int d = 2;
  double alpha = 4.0;
  int zmax = 4;
  double energy_scale = 1.0;
  std::vector<double> constant;  // kind = constant
};

struct DynamicsSpec {
  double A = 1.0;
  double kappa = 0.0;
  double C = 0.0;
  double dt = 1e-3;
  double T = 1.0;
  std::string scheme = "heun";  // heun | euler-maruyama
  int snapshot_every = 10;
};

struct EnsembleSpec {
  std::size_t particles = 256;
  std::size_t realizations = 64;
  std::size_t inner_samples = 8;
};

struct ChecksSpec {
  int points = 1000;
  double tolerance = 1e-12;
};

struct LyapunovSpec {
  int qr_every = 10;
  int snapshot_particles = 0;  // > 0 dumps a flow snapshot CSV of realization 0
};

struct MomentSpec {
  std::vector<double> p_grid{-0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5};
  std::size_t samples = 1000;
  double p_small = 0.1;
  int twisted_grid = 0;  // 0 disables the eigen estimator
  double twisted_p = 0.25;
  double twisted_step = 2.0;
  int twisted_samples = 64;
  double twisted_dt = 5e-3;
};

struct TwoPointSpec {
  std::vector<double> x{1.0, 1.0};
  std::vector<double> y{1.001, 1.0};
  std::vector<double> p_list{0.25};
  double max_separation = 0.1;
  std::vector<double> separations;  // empty disables the V_p drift report
  double t_star = 1.0;
};

struct CorrelationSpec {
  std::vector<double> x{0.0, 0.0};
  std::vector<double> y{0.5, 0.5};
  std::string f = "cos(1,0)";
  std::string g = "cos(1,0)";
  double t_min = 0.0;
  double noise_multiple = 3.0;
};

struct MixingSpec {
  std::string initial = "cos(1,0) + sin(0,2)";
  int z_cut = 4;
  int quadrature = 64;
  std::vector<double> s_values{1.0};
  double t_min = 0.0;
};

struct SpectralSpec {
  int N = 64;
  std::string initial = "cos(1,0) + sin(0,2)";
  int max_substeps = 64;
  int record_every = 100;
  std::vector<double> amplitudes{0.0, 1.0, 2.0, 4.0};
  double fit_begin = 0.5;
  double fit_end = 1.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output = "transportlab-out";
  FieldSpec field;
  DynamicsSpec dynamics;
  EnsembleSpec ensemble;
  ChecksSpec checks;
  LyapunovSpec lyapunov;
  MomentSpec moment;
  TwoPointSpec two_point;
  CorrelationSpec correlation;
  MixingSpec mixing;
  SpectralSpec spectral;

  /// Every parameter with its resolved value (defaults filled in).
  nlohmann::ordered_json resolved() const {
    nlohmann::ordered_json j;
    j["run"] = {{"seed", seed}};
    j["field"] = {{"kind", field.kind}, {"d", field.d}, {"alpha", field.alpha}, {"zmax", field.zmax},
                  {"energy_scale", field.energy_scale}, {"constant", field.constant}};
    j["dynamics"] = {{"A", dynamics.A},   {"kappa", dynamics.kappa},   {"C", dynamics.C},
                     {"dt", dynamics.dt}, {"T", dynamics.T},           {"scheme", dynamics.scheme},
                     {"snapshot_every", dynamics.snapshot_every}};
    j["ensemble"] = {{"particles", ensemble.particles},
                     {"realizations", ensemble.realizations},
                     {"inner_samples", ensemble.inner_samples}};
    j["checks"] = {{"points", checks.points}, {"tolerance", checks.tolerance}};
    j["lyapunov"] = {{"qr_every", lyapunov.qr_every}, {"snapshot_particles", lyapunov.snapshot_particles}};
    j["moment"] = {{"p_grid", moment.p_grid},
                   {"samples", moment.samples},
                   {"p_small", moment.p_small},
                   {"twisted_grid", moment.twisted_grid},
                   {"twisted_p", moment.twisted_p},
                   {"twisted_step", moment.twisted_step},
                   {"twisted_samples", moment.twisted_samples},
                   {"twisted_dt", moment.twisted_dt}};
    j["two_point"] = {{"x", two_point.x},
                      {"y", two_point.y},
                      {"p_list", two_point.p_list},
                      {"max_separation", two_point.max_separation},
                      {"separations", two_point.separations},
                      {"t_star", two_point.t_star}};
    j["correlation"] = {{"x", correlation.x},         {"y", correlation.y},
                        {"f", correlation.f},         {"g", correlation.g},
                        {"t_min", correlation.t_min}, {"noise_multiple", correlation.noise_multiple}};
    j["mixing"] = {{"initial", mixing.initial},
                   {"z_cut", mixing.z_cut},
                   {"quadrature", mixing.quadrature},
                   {"s_values", mixing.s_values},
                   {"t_min", mixing.t_min}};
    j["spectral"] = {{"N", spectral.N},
                     {"initial", spectral.initial},
                     {"max_substeps", spectral.max_substeps},
                     {"record_every", spectral.record_every},
                     {"amplitudes", spectral.amplitudes},
                     {"fit_begin", spectral.fit_begin},
                     {"fit_end", spectral.fit_end}};
    return j;
  }
};

namespace detail {

class IniReader {
 public:
  explicit IniReader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  bool has(const std::string& section, const std::string& key) const { return raw(section, key) != nullptr; }

  std::string text(const std::string& section, const std::string& key, const std::string& fallback) {
    const auto* v = raw(section, key);
    used_.insert(section + "." + key);
    return v ? trim(*v) : fallback;
  }

  double number(const std::string& section, const std::string& key, double fallback) {
    if (!has(section, key)) return text(section, key, ""), fallback;
    return parse_number(section + "." + key, text(section, key, ""));
  }

  int integer(const std::string& section, const std::string& key, int fallback) {
    if (!has(section, key)) return text(section, key, ""), fallback;
    const double v = number(section, key, 0.0);
    if (v != std::floor(v) || std::abs(v) > std::numeric_limits<int>::max())
      throw ConfigError(section + "." + key + ": expected an integer");
    return static_cast<int>(v);
  }

  std::size_t count(const std::string& section, const std::string& key, std::size_t fallback) {
    if (!has(section, key)) return text(section, key, ""), fallback;
    const int v = integer(section, key, 0);
    if (v < 0) throw ConfigError(section + "." + key + ": must be non-negative");
    return static_cast<std::size_t>(v);
  }

  std::vector<double> list(const std::string& section, const std::string& key, std::vector<double> fallback) {
    if (!has(section, key)) return text(section, key, ""), fallback;
    std::vector<double> out;
    std::stringstream ss(text(section, key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (trim(item).empty()) continue;
      out.push_back(parse_number(section + "." + key, trim(item)));
    }
    return out;
  }

  /// Keys present in the file but never read.
  std::vector<std::string> unknown_keys() const {
    std::vector<std::string> out;
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) {
        out.push_back(section);  // key outside any section
        continue;
      }
      for (const auto& [key, value] : body)
        if (!used_.count(section + "." + key)) out.push_back(section + "." + key);
    }
    return out;
  }

 private:
  const std::string* raw(const std::string& section, const std::string& key) const {
    const auto s = tree_.get_child_optional(section);
    if (!s) return nullptr;
    const auto v = s->get_child_optional(key);
    return v ? &v->data() : nullptr;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n\"");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n\"");
    return s.substr(b, e - b + 1);
  }

  static double parse_number(const std::string& name, const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw ConfigError(name + ": '" + s + "' is not a number");
    }
    if (used != s.size() || !std::isfinite(v)) throw ConfigError(name + ": '" + s + "' is not a finite number");
    return v;
  }

  const boost::property_tree::ptree& tree_;
  std::set<std::string> used_;
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

inline void require_dim(const std::vector<double>& v, int d, const std::string& name) {
  require(static_cast<int>(v.size()) == d, name + ": needs " + std::to_string(d) + " components");
}

}  // namespace detail

/// Parses INI text. Throws ConfigError naming the offending field.
inline ExperimentConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: " + std::string(e.message()) + " at line " + std::to_string(e.line()));
  }
  detail::IniReader r(tree);
  using detail::require;
  ExperimentConfig c;

  if (!r.has("run", "seed")) throw ConfigError("run.seed: missing (every experiment needs an explicit seed)");
  {
    const std::string s = r.text("run", "seed", "");
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      require(!s.empty() && s[0] != '-', "");
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      throw ConfigError("run.seed: '" + s + "' is not a non-negative integer");
    }
    require(used == s.size(), "run.seed: '" + s + "' is not a non-negative integer");
    c.seed = v;
  }
  c.output = r.text("run", "output", c.output);

  auto& f = c.field;
  f.kind = r.text("field", "kind", f.kind);
  f.d = r.integer("field", "d", f.d);
  f.alpha = r.number("field", "alpha", f.alpha);
  f.zmax = r.integer("field", "zmax", f.zmax);
  f.energy_scale = r.number("field", "energy_scale", f.energy_scale);
  f.constant = r.list("field", "constant", f.constant);
  require(f.kind == "kraichnan" || f.kind == "br" || f.kind == "constant",
          "field.kind: expected kraichnan, br or constant");
  require(f.d == 2 || f.d == 3, "field.d: only 2 and 3 are supported");
  require(f.kind != "br" || f.d == 2, "field.d: the br family lives on T^2");
  if (f.kind == "kraichnan") {
    require(f.alpha > 2.0, "field.alpha: must exceed 2");
    require(f.zmax >= 1, "field.zmax: must be at least 1");
    require(f.energy_scale > 0.0, "field.energy_scale: must be positive");
  }
  if (f.kind == "constant") detail::require_dim(f.constant, f.d, "field.constant");

  auto& dy = c.dynamics;
  dy.A = r.number("dynamics", "A", dy.A);
  dy.kappa = r.number("dynamics", "kappa", dy.kappa);
  dy.C = r.number("dynamics", "C", dy.C);
  dy.dt = r.number("dynamics", "dt", dy.dt);
  dy.T = r.number("dynamics", "T", dy.T);
  dy.scheme = r.text("dynamics", "scheme", dy.scheme);
  dy.snapshot_every = r.integer("dynamics", "snapshot_every", dy.snapshot_every);
  require(dy.dt > 0.0, "dynamics.dt: must be positive");
  require(dy.T > 0.0, "dynamics.T: must be positive");
  require(dy.A >= 0.0, "dynamics.A: must be non-negative");
  require(dy.kappa >= 0.0, "dynamics.kappa: must be non-negative");
  require(dy.scheme == "heun" || dy.scheme == "euler-maruyama", "dynamics.scheme: expected heun or euler-maruyama");
  require(dy.snapshot_every >= 1, "dynamics.snapshot_every: must be at least 1");
  {
    const double n = dy.T / dy.dt;
    require(std::abs(n - std::round(n)) <= 1e-9 * n, "dynamics.T: must be an integer multiple of dynamics.dt");
  }

  auto& e = c.ensemble;
  e.particles = r.count("ensemble", "particles", e.particles);
  e.realizations = r.count("ensemble", "realizations", e.realizations);
  e.inner_samples = r.count("ensemble", "inner_samples", e.inner_samples);
  require(e.particles >= 1, "ensemble.particles: must be at least 1");
  require(e.realizations >= 1, "ensemble.realizations: must be at least 1");
  require(e.inner_samples >= 1, "ensemble.inner_samples: must be at least 1");

  c.checks.points = r.integer("checks", "points", c.checks.points);
  c.checks.tolerance = r.number("checks", "tolerance", c.checks.tolerance);
  require(c.checks.points >= 1, "checks.points: must be at least 1");
  require(c.checks.tolerance > 0.0, "checks.tolerance: must be positive");

  c.lyapunov.qr_every = r.integer("lyapunov", "qr_every", c.lyapunov.qr_every);
  c.lyapunov.snapshot_particles = r.integer("lyapunov", "snapshot_particles", c.lyapunov.snapshot_particles);
  require(c.lyapunov.qr_every >= 1, "lyapunov.qr_every: must be at least 1");
  require(c.lyapunov.snapshot_particles >= 0, "lyapunov.snapshot_particles: must be non-negative");

  auto& m = c.moment;
  m.p_grid = r.list("moment", "p_grid", m.p_grid);
  m.samples = r.count("moment", "samples", m.samples);
  m.p_small = r.number("moment", "p_small", m.p_small);
  m.twisted_grid = r.integer("moment", "twisted_grid", m.twisted_grid);
  m.twisted_p = r.number("moment", "twisted_p", m.twisted_p);
  m.twisted_step = r.number("moment", "twisted_step", m.twisted_step);
  m.twisted_samples = r.integer("moment", "twisted_samples", m.twisted_samples);
  m.twisted_dt = r.number("moment", "twisted_dt", m.twisted_dt);
  require(!m.p_grid.empty(), "moment.p_grid: must not be empty");
  for (double p : m.p_grid) require(std::abs(p) <= 1.0, "moment.p_grid: entries must lie in [-1, 1]");
  require(m.twisted_grid >= 0, "moment.twisted_grid: must be non-negative");
  require(m.twisted_step > 0.0 && m.twisted_dt > 0.0, "moment.twisted_step: step and dt must be positive");

  auto& tp = c.two_point;
  tp.x = r.list("two_point", "x", f.d == 3 ? std::vector<double>{1.0, 1.0, 1.0} : tp.x);
  tp.y = r.list("two_point", "y", f.d == 3 ? std::vector<double>{1.001, 1.0, 1.0} : tp.y);
  tp.p_list = r.list("two_point", "p_list", tp.p_list);
  tp.max_separation = r.number("two_point", "max_separation", tp.max_separation);
  tp.separations = r.list("two_point", "separations", tp.separations);
  tp.t_star = r.number("two_point", "t_star", tp.t_star);
  detail::require_dim(tp.x, f.d, "two_point.x");
  detail::require_dim(tp.y, f.d, "two_point.y");
  require(!tp.p_list.empty(), "two_point.p_list: must not be empty");
  for (double p : tp.p_list) require(p > 0.0 && p <= 1.0, "two_point.p_list: entries must lie in (0, 1]");
  require(tp.max_separation > 0.0, "two_point.max_separation: must be positive");
  for (double s : tp.separations) require(s > 0.0, "two_point.separations: entries must be positive");
  require(tp.t_star > 0.0, "two_point.t_star: must be positive");

  auto& co = c.correlation;
  co.x = r.list("correlation", "x", f.d == 3 ? std::vector<double>{0.0, 0.0, 0.0} : co.x);
  co.y = r.list("correlation", "y", f.d == 3 ? std::vector<double>{0.5, 0.5, 0.5} : co.y);
  co.f = r.text("correlation", "f", f.d == 3 ? "cos(1,0,0)" : co.f);
  co.g = r.text("correlation", "g", f.d == 3 ? "cos(1,0,0)" : co.g);
  co.t_min = r.number("correlation", "t_min", co.t_min);
  co.noise_multiple = r.number("correlation", "noise_multiple", co.noise_multiple);
  detail::require_dim(co.x, f.d, "correlation.x");
  detail::require_dim(co.y, f.d, "correlation.y");
  require(co.noise_multiple > 0.0, "correlation.noise_multiple: must be positive");

  auto& mx = c.mixing;
  mx.initial = r.text("mixing", "initial", f.d == 3 ? "cos(1,0,0) + sin(0,2,0)" : mx.initial);
  mx.z_cut = r.integer("mixing", "z_cut", mx.z_cut);
  mx.quadrature = r.integer("mixing", "quadrature", mx.quadrature);
  mx.s_values = r.list("mixing", "s_values", mx.s_values);
  mx.t_min = r.number("mixing", "t_min", mx.t_min);
  require(mx.z_cut >= 1, "mixing.z_cut: must be at least 1");
  require(mx.quadrature >= 4 * mx.z_cut, "mixing.quadrature: must be at least 4 * z_cut");
  require(!mx.s_values.empty(), "mixing.s_values: must not be empty");

  auto& sp = c.spectral;
  sp.N = r.integer("spectral", "N", sp.N);
  sp.initial = r.text("spectral", "initial", sp.initial);
  sp.max_substeps = r.integer("spectral", "max_substeps", sp.max_substeps);
  sp.record_every = r.integer("spectral", "record_every", sp.record_every);
  sp.amplitudes = r.list("spectral", "amplitudes", sp.amplitudes);
  sp.fit_begin = r.number("spectral", "fit_begin", sp.fit_begin);
  sp.fit_end = r.number("spectral", "fit_end", sp.fit_end);
  require(sp.N >= 8 && (sp.N & (sp.N - 1)) == 0, "spectral.N: must be a power of two >= 8");
  require(sp.max_substeps >= 1, "spectral.max_substeps: must be at least 1");
  require(sp.record_every >= 1, "spectral.record_every: must be at least 1");
  require(!sp.amplitudes.empty(), "spectral.amplitudes: must not be empty");
  require(0.0 <= sp.fit_begin && sp.fit_begin < sp.fit_end && sp.fit_end <= 1.0,
          "spectral.fit_begin: need 0 <= fit_begin < fit_end <= 1");

  const auto unknown = r.unknown_keys();
  if (!unknown.empty()) throw ConfigError(unknown.front() + ": unknown key");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace transportlab
