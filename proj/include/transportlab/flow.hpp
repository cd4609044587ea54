#pragma once

// Stratonovich flows driven by the velocity modes:
//   dx = A sum_k sigma_k(x) o dW^k + sqrt(2 kappa) dW~,
//   dJ = A sum_k Dsigma_k(x) J o dW^k,
// integrated with the stochastic Heun (predictor-corrector) scheme. All
// particles of one realization see the same increments.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "transportlab/fields.hpp"
#include "transportlab/noise.hpp"
#include "transportlab/torus.hpp"

namespace transportlab {

/// Raised when a numerical guard trips (singular tangent map, CFL, blow-up).
class NumericalGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scheme { Heun, EulerMaruyama };

template <int D> struct FlowState {
  double t = 0.0;
  std::vector<TorusPoint<D>> positions;
  std::optional<std::vector<Mat<D>>> tangents;
  std::optional<std::vector<Vec<D>>> unit_tangents;
  /// Accumulated log-norm removed by renormalization: unit-tangent rescaling
  /// when unit tangents are tracked, otherwise log R11 from qr_renormalize.
  std::optional<std::vector<double>> log_growth;

  std::size_t size() const { return positions.size(); }
};

template <int D> FlowState<D> make_state(std::vector<TorusPoint<D>> positions, bool tangents = false,
                                         bool unit_tangents = false) {
  FlowState<D> s;
  for (auto& p : positions) p = wrap<D>(p);
  s.positions = std::move(positions);
  const auto n = s.positions.size();
  if (tangents) s.tangents.emplace(n, Mat<D>::Identity());
  if (unit_tangents) s.unit_tangents.emplace(n, Vec<D>::Unit(0));
  if (tangents || unit_tangents) s.log_growth.emplace(n, 0.0);
  return s;
}

struct FlowParams {
  double amplitude = 1.0;
  double kappa = 0.0;
  Scheme scheme = Scheme::Heun;
};

/// Advances single particles (with optional tangent data) through one step
/// whose random field was fixed by begin_step.
template <int D> class FlowIntegrator {
 public:
  FlowIntegrator(const VelocityModel<D>& model, FlowParams params) : model_(&model), params_(params) {
    if (!(params.kappa >= 0.0)) throw std::invalid_argument("FlowIntegrator: kappa must be non-negative");
  }

  const FlowParams& params() const { return params_; }
  const VelocityModel<D>& model() const { return *model_; }

  void begin_step(const IncrementBlock& block) {
    if (block.transport.size() != model_->size() || block.viscous.size() != static_cast<std::size_t>(D))
      throw std::invalid_argument("FlowIntegrator: increment block does not match (modes, dim)");
    field_.assign(*model_, block.transport);
    const double s = std::sqrt(2.0 * params_.kappa);
    for (int i = 0; i < D; ++i) kick_[i] = s * block.viscous[i];
  }

  /// Overrides the viscous kick of the current step (used when the transport
  /// noise is shared but viscous samples differ).
  void set_viscous(std::span<const double> viscous) {
    const double s = std::sqrt(2.0 * params_.kappa);
    for (int i = 0; i < D; ++i) kick_[i] = s * viscous[i];
  }

  const StepField<D>& field() const { return field_; }

  void advance(TorusPoint<D>& x) const {
    const double a = params_.amplitude;
    const Vec<D> v0 = field_.value(x);
    if (params_.scheme == Scheme::EulerMaruyama) {
      x = wrap<D>(x + a * v0 + kick_);
      return;
    }
    const Vec<D> xp = x + a * v0 + kick_;
    const Vec<D> v1 = field_.value(xp);
    x = wrap<D>(x + (0.5 * a) * (v0 + v1) + kick_);
  }

  /// Joint step of position and tangent data. Either pointer may be null.
  void advance(TorusPoint<D>& x, Mat<D>* jac, Vec<D>* unit, double* log_growth) const {
    if (!jac && !unit) {
      advance(x);
      return;
    }
    if (params_.scheme != Scheme::Heun)
      throw std::logic_error("FlowIntegrator: tangent flows require the Heun scheme");
    const double a = params_.amplitude;
    Vec<D> v0, v1;
    Mat<D> g0, g1;
    field_.value_and_jacobian(x, v0, g0);
    const Vec<D> xp = x + a * v0 + kick_;
    field_.value_and_jacobian(xp, v1, g1);
    x = wrap<D>(x + (0.5 * a) * (v0 + v1) + kick_);
    if (jac) {
      const Mat<D> gj = g0 * (*jac);
      const Mat<D> jp = *jac + a * gj;
      *jac += (0.5 * a) * (gj + g1 * jp);
    }
    if (unit) {
      const Vec<D> gu = g0 * (*unit);
      const Vec<D> up = *unit + a * gu;
      const Vec<D> w = *unit + (0.5 * a) * (gu + g1 * up);
      const double n = w.norm();
      if (!(n > 0.0) || !std::isfinite(n)) throw NumericalGuardError("unit tangent degenerated");
      *unit = w / n;
      if (log_growth) *log_growth += std::log(n);
    }
  }

 private:
  const VelocityModel<D>* model_;
  FlowParams params_;
  StepField<D> field_;
  Vec<D> kick_ = Vec<D>::Zero();
};

/// One step of the full state (positions and every tracked tangent object).
template <int D>
FlowState<D> step(const VelocityModel<D>& model, FlowState<D> state, const IncrementBlock& increments,
                  double dt, double amplitude, double kappa, Scheme scheme = Scheme::Heun) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  FlowIntegrator<D> integ(model, {amplitude, kappa, scheme});
  integ.begin_step(increments);
  const bool with_unit = state.unit_tangents.has_value();
  for (std::size_t i = 0; i < state.size(); ++i) {
    Mat<D>* j = state.tangents ? &(*state.tangents)[i] : nullptr;
    Vec<D>* u = with_unit ? &(*state.unit_tangents)[i] : nullptr;
    double* lg = (with_unit && state.log_growth) ? &(*state.log_growth)[i] : nullptr;
    integ.advance(state.positions[i], j, u, lg);
  }
  state.t += dt;
  return state;
}

template <int D>
FlowState<D> step_tangent(const VelocityModel<D>& model, FlowState<D> state,
                          const IncrementBlock& increments, double dt, double amplitude,
                          double kappa = 0.0) {
  if (!state.tangents) throw std::invalid_argument("step_tangent: state has no tangent matrices");
  return step<D>(model, std::move(state), increments, dt, amplitude, kappa);
}

template <int D>
FlowState<D> step_unit_tangent(const VelocityModel<D>& model, FlowState<D> state,
                               const IncrementBlock& increments, double dt, double amplitude,
                               double kappa = 0.0) {
  if (!state.unit_tangents) throw std::invalid_argument("step_unit_tangent: state has no unit tangents");
  if (!state.log_growth) state.log_growth.emplace(state.size(), 0.0);
  return step<D>(model, std::move(state), increments, dt, amplitude, kappa);
}

/// QR with positive diagonal R. Returns log R11 and overwrites jac with Q.
template <int D> double qr_renormalize_matrix(Mat<D>& jac) {
  Eigen::HouseholderQR<Mat<D>> qr(jac);
  Mat<D> q = qr.householderQ();
  Mat<D> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (int i = 0; i < D; ++i) {
    if (r(i, i) < 0.0) {
      q.col(i) *= -1.0;
      r.row(i) *= -1.0;
    }
  }
  const double scale = r.cwiseAbs().maxCoeff();
  for (int i = 0; i < D; ++i) {
    if (!(r(i, i) > 1e-300 * std::max(1.0, scale)) || !std::isfinite(r(i, i)))
      throw NumericalGuardError("qr_renormalize: singular tangent matrix");
  }
  jac = q;
  return std::log(r(0, 0));
}

template <int D> FlowState<D> qr_renormalize(FlowState<D> state) {
  if (!state.tangents) throw std::invalid_argument("qr_renormalize: state has no tangent matrices");
  if (state.unit_tangents)
    throw std::invalid_argument("qr_renormalize: log_growth is owned by the unit tangents");
  if (!state.log_growth) state.log_growth.emplace(state.size(), 0.0);
  for (std::size_t i = 0; i < state.size(); ++i)
    (*state.log_growth)[i] += qr_renormalize_matrix<D>((*state.tangents)[i]);
  return state;
}

template <int D> struct EnsembleConfig {
  std::vector<TorusPoint<D>> initial;
  double T = 1.0;
  double dt = 1e-3;
  double amplitude = 1.0;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t realization = 0;
  bool track_tangents = false;
  bool track_unit_tangents = false;
  std::vector<Vec<D>> initial_unit_tangents;  // defaults to e1 when empty
  int snapshot_every = 1;                     // in steps
  int qr_every = 10;                          // in steps; 0 disables
  Scheme scheme = Scheme::Heun;
  int refine = 0;                             // Brownian-bridge level: dt / 2^refine
};

inline std::int64_t step_count(double T, double dt) {
  if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("step_count: T and dt must be positive");
  const auto n = static_cast<std::int64_t>(std::llround(T / dt));
  if (n < 1 || std::abs(n * dt - T) > 1e-9 * T)
    throw std::invalid_argument("step_count: T must be an integer multiple of dt");
  return n;
}

/// Runs one realization of P particles under shared noise and returns the
/// snapshots taken at t = 0, every snapshot_every steps, and at t = T.
template <int D>
std::vector<FlowState<D>> run_ensemble(const VelocityModel<D>& model, const EnsembleConfig<D>& cfg) {
  if (cfg.initial.empty()) throw std::invalid_argument("run_ensemble: no particles");
  if (cfg.snapshot_every < 1) throw std::invalid_argument("run_ensemble: snapshot cadence must be >= 1");
  if (cfg.track_tangents && cfg.track_unit_tangents)
    throw std::invalid_argument("run_ensemble: track either tangent matrices or unit tangents");
  const double dt_fine = std::ldexp(cfg.dt, -cfg.refine);
  const auto nsteps = step_count(cfg.T, cfg.dt) << cfg.refine;
  const auto cadence = static_cast<std::int64_t>(cfg.snapshot_every) << cfg.refine;

  FlowState<D> state = make_state<D>(cfg.initial, cfg.track_tangents, cfg.track_unit_tangents);
  if (cfg.track_unit_tangents && !cfg.initial_unit_tangents.empty()) {
    if (cfg.initial_unit_tangents.size() != state.size())
      throw std::invalid_argument("run_ensemble: one unit tangent per particle required");
    for (std::size_t i = 0; i < state.size(); ++i)
      (*state.unit_tangents)[i] = cfg.initial_unit_tangents[i].normalized();
  }

  const NoiseRealization noise(cfg.seed, cfg.realization, cfg.dt, static_cast<int>(model.size()), D,
                               cfg.refine);
  FlowIntegrator<D> integ(model, {cfg.amplitude, cfg.kappa, cfg.scheme});
  IncrementBlock block;
  std::vector<FlowState<D>> snapshots{state};
  const bool with_unit = state.unit_tangents.has_value();
  for (std::int64_t n = 0; n < nsteps; ++n) {
    noise.fill(static_cast<std::uint64_t>(n), block);
    integ.begin_step(block);
    for (std::size_t i = 0; i < state.size(); ++i) {
      Mat<D>* j = state.tangents ? &(*state.tangents)[i] : nullptr;
      Vec<D>* u = with_unit ? &(*state.unit_tangents)[i] : nullptr;
      double* lg = with_unit ? &(*state.log_growth)[i] : nullptr;
      integ.advance(state.positions[i], j, u, lg);
    }
    state.t = static_cast<double>(n + 1) * dt_fine;
    if (state.tangents && cfg.qr_every > 0 && (n + 1) % (static_cast<std::int64_t>(cfg.qr_every)) == 0)
      state = qr_renormalize<D>(std::move(state));
    if ((n + 1) % cadence == 0 || n + 1 == nsteps) snapshots.push_back(state);
  }
  return snapshots;
}

}  // namespace transportlab
