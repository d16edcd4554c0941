#pragma once

// Perturbed gradient descent and friends. run_gd is plain gradient descent
// with pluggable stop rules; run_pgd adds the phasic ball perturbation with
// derived thresholds; run_pgdli chains a local-improvement phase with step
// size 1/beta after the perturbed phase.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "pgdlab/errors.hpp"
#include "pgdlab/linalg.hpp"
#include "pgdlab/objective.hpp"

namespace pgdlab {

// ---------------------------------------------------------------------------
// Derived thresholds for the perturbed runner. Every field is a pure
// function of (ell, rho, epsilon, c, delta, delta_f, dim); see
// compute_pgd_params.
// ---------------------------------------------------------------------------

struct PgdParams {
  double chi = 0.0;
  double eta = 0.0;      // step size c / ell
  double r = 0.0;        // perturbation ball radius
  double g_thres = 0.0;  // gradient norm below which a perturbation may fire
  double f_thres = 0.0;  // required decrease after a perturbation window
  long t_thres = 0;      // window length in steps

  double c = 0.0;
  double delta = 0.0;
  double delta_f = 0.0;
  double epsilon = 0.0;

  // epsilon > ell^2 / rho: every eps-first-order point is already
  // second-order there, so unperturbed descent suffices.
  bool plain_gd_suffices = false;
};

inline PgdParams compute_pgd_params(double ell, double rho, double epsilon, double c,
                                    double delta, double delta_f, int dim) {
  if (ell <= 0.0 || rho <= 0.0 || epsilon <= 0.0 || c <= 0.0 || delta <= 0.0 || delta_f <= 0.0)
    throw invalid_parameter_error("compute_pgd_params: inputs must be positive");
  if (delta >= 1.0) throw invalid_parameter_error("compute_pgd_params: delta must be < 1");
  if (dim < 1) throw invalid_parameter_error("compute_pgd_params: dim must be >= 1");

  PgdParams p;
  p.c = c;
  p.delta = delta;
  p.delta_f = delta_f;
  p.epsilon = epsilon;
  p.chi = 3.0 * std::max(std::log(dim * ell * delta_f / (c * epsilon * epsilon * delta)), 4.0);
  p.eta = c / ell;
  p.r = (std::sqrt(c) / (p.chi * p.chi)) * (epsilon / ell);
  p.g_thres = (std::sqrt(c) / (p.chi * p.chi)) * epsilon;
  p.f_thres = (c / (p.chi * p.chi * p.chi)) * std::sqrt(epsilon * epsilon * epsilon / rho);
  p.t_thres =
      static_cast<long>(std::ceil((p.chi / (c * c)) * (ell / std::sqrt(rho * epsilon))));
  p.plain_gd_suffices = epsilon > ell * ell / rho;
  return p;
}

// Worst-case iteration count (chi^4 / c^3) * ell * delta_f / epsilon^2 for
// the perturbed runner with these thresholds.
inline double pgd_iteration_bound(const PgdParams& p) {
  const double ell = p.c / p.eta;
  return std::pow(p.chi, 4) / std::pow(p.c, 3) * ell * p.delta_f / (p.epsilon * p.epsilon);
}

// ---------------------------------------------------------------------------
// Run traces
// ---------------------------------------------------------------------------

enum class Termination { threshold_return, max_iter, target_reached };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::threshold_return: return "threshold-return";
    case Termination::max_iter: return "max-iter";
    case Termination::target_reached: return "target-reached";
  }
  return "unknown";
}

struct PerturbationEvent {
  long iteration = 0;              // t_noise
  Vector pre_perturbation_point;   // the point the runner may return later
  Vector offset;                   // sampled from the radius-r ball
  double value_after = 0.0;        // f at the perturbed point
  double grad_norm_after = 0.0;
};

struct RunTrace {
  // Row t describes iterate x_t before any perturbation at t. values and
  // grad_norms are always complete; iterates stop filling once
  // dim * steps would exceed the thinning cap.
  std::vector<Vector> iterates;
  bool iterates_truncated = false;
  std::vector<double> values;
  std::vector<double> grad_norms;
  std::vector<PerturbationEvent> perturbation_events;
  Termination termination = Termination::max_iter;
  double eta = 0.0;
  Vector final_point;  // last iterate, kept even when iterates are truncated

  long iterations() const { return static_cast<long>(values.size()) - 1; }
};

inline constexpr long kIterateStorageCap = 10'000'000;  // doubles across all stored iterates

// Divergence carrying whatever part of the trace existed when the
// non-finite value appeared.
class divergence_with_trace : public divergence_error {
 public:
  divergence_with_trace(const std::string& what, long iteration, int coordinate, RunTrace trace)
      : divergence_error(what, iteration, coordinate), partial_trace(std::move(trace)) {}

  RunTrace partial_trace;
};

namespace detail {

inline void reserve_rows(RunTrace& trace, long max_iter) {
  const std::size_t rows =
      static_cast<std::size_t>(std::min<long>(max_iter + 2, 4L * 1024 * 1024));
  trace.values.reserve(rows);
  trace.grad_norms.reserve(rows);
}

inline void record_row(RunTrace& trace, const Vector& x, double fx, double gn, int dim) {
  trace.values.push_back(fx);
  trace.grad_norms.push_back(gn);
  if (!trace.iterates_truncated &&
      static_cast<long>(trace.iterates.size() + 1) * dim <= kIterateStorageCap) {
    trace.iterates.push_back(x);
  } else {
    trace.iterates_truncated = true;
  }
}

// Non-finiteness propagates into the gradient norm, so the hot path only
// tests two scalars; the offending coordinate is recovered on failure.
inline void ensure_finite(double fx, double grad_norm, const Vector& grad, long t,
                          RunTrace& trace) {
  if (std::isfinite(fx) && std::isfinite(grad_norm)) return;
  if (!std::isfinite(fx))
    throw divergence_with_trace("descent diverged: non-finite value", t, -1, std::move(trace));
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw divergence_with_trace("descent diverged: non-finite gradient", t,
                                  static_cast<int>(i), std::move(trace));
  throw divergence_with_trace("descent diverged: non-finite gradient norm", t, -1,
                              std::move(trace));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Plain gradient descent
// ---------------------------------------------------------------------------

struct GdStop {
  long max_iter = 0;                        // mandatory upper bound on steps
  double grad_tol = 0.0;                    // stop when ||grad|| <= grad_tol (if > 0)
  std::optional<Vector> target_point;       // stop when ||x - target|| <= target_tol
  double target_tol = 0.0;
  std::function<double(const Vector&)> distance_oracle;  // stop when <= distance_tol
  double distance_tol = 0.0;
};

using StepObserver = std::function<void(long, const Vector&)>;

// x_{t+1} = x_t - eta * grad f(x_t). The descent guarantee needs
// eta <= 1 / (smoothness of f on the visited region).
inline RunTrace run_gd(const ObjectiveFunction& f, const Vector& x0, double eta,
                       const GdStop& stop, const StepObserver& observer = {}) {
  if (eta <= 0.0) throw invalid_parameter_error("run_gd: eta must be positive");
  if (stop.max_iter < 0) throw invalid_parameter_error("run_gd: max_iter must be >= 0");
  if (!all_finite(x0)) throw invalid_input_error("run_gd: non-finite start point");

  RunTrace trace;
  trace.eta = eta;
  detail::reserve_rows(trace, stop.max_iter);
  Vector x = x0;
  Vector grad(x.size());
  const int dim = static_cast<int>(x.size());

  for (long t = 0;; ++t) {
    const double fx = f.eval_value_and_gradient(x, grad);
    const double gn = norm(grad);
    detail::ensure_finite(fx, gn, grad, t, trace);
    detail::record_row(trace, x, fx, gn, dim);
    if (observer) observer(t, x);

    if (stop.grad_tol > 0.0 && gn <= stop.grad_tol) {
      trace.termination = Termination::target_reached;
      break;
    }
    if (stop.target_point && distance(x, *stop.target_point) <= stop.target_tol) {
      trace.termination = Termination::target_reached;
      break;
    }
    if (stop.distance_oracle && stop.distance_oracle(x) <= stop.distance_tol) {
      trace.termination = Termination::target_reached;
      break;
    }
    if (t >= stop.max_iter) {
      trace.termination = Termination::max_iter;
      break;
    }
    axpy(-eta, grad, x);
  }
  trace.final_point = std::move(x);
  return trace;
}

// ---------------------------------------------------------------------------
// Perturbed gradient descent
// ---------------------------------------------------------------------------

struct PgdResult {
  Vector output;
  RunTrace trace;
};

// Descent with a ball perturbation whenever the gradient is small and the
// last perturbation is at least t_thres steps old. If a window of t_thres
// steps after a perturbation fails to decrease f by f_thres, the point
// before that perturbation is returned.
inline PgdResult run_pgd(const ObjectiveFunction& f, const Vector& x0, const PgdParams& params,
                         RngState& rng, long max_iter, const StepObserver& observer = {}) {
  if (max_iter < 1) throw invalid_parameter_error("run_pgd: max_iter must be >= 1");
  if (params.eta <= 0.0 || params.t_thres < 1)
    throw invalid_parameter_error("run_pgd: params not derived");
  if (!all_finite(x0)) throw invalid_input_error("run_pgd: non-finite start point");

  RunTrace trace;
  trace.eta = params.eta;
  detail::reserve_rows(trace, max_iter);
  Vector x = x0;
  Vector grad(x.size());
  const int dim = static_cast<int>(x.size());

  long t_noise = -params.t_thres - 1;
  Vector x_tilde;
  double f_tilde = std::numeric_limits<double>::quiet_NaN();

  PgdResult result;
  for (long t = 0;; ++t) {
    double fx = f.eval_value_and_gradient(x, grad);
    double gn = norm(grad);
    detail::ensure_finite(fx, gn, grad, t, trace);
    detail::record_row(trace, x, fx, gn, dim);
    if (observer) observer(t, x);

    if (gn <= params.g_thres && t - t_noise > params.t_thres) {
      x_tilde = x;
      f_tilde = fx;
      t_noise = t;
      const Vector xi = sample_ball(dim, params.r, rng);
      axpy(1.0, xi, x);
      fx = f.eval_value_and_gradient(x, grad);
      gn = norm(grad);
      detail::ensure_finite(fx, gn, grad, t, trace);
      trace.perturbation_events.push_back(PerturbationEvent{t, x_tilde, xi, fx, gn});
      if (observer) observer(t, x);
    }

    if (t - t_noise == params.t_thres && fx - f_tilde > -params.f_thres) {
      trace.termination = Termination::threshold_return;
      result.output = x_tilde;
      break;
    }
    if (t >= max_iter) {
      trace.termination = Termination::max_iter;
      result.output = x;
      break;
    }
    axpy(-params.eta, grad, x);
  }
  trace.final_point = std::move(x);
  result.trace = std::move(trace);
  return result;
}

// ---------------------------------------------------------------------------
// Perturbed descent + local improvement
// ---------------------------------------------------------------------------

struct PgdliResult {
  Vector output;
  RunTrace pgd_trace;  // perturbed phase
  RunTrace gd_trace;   // local phase, step size 1/beta
};

// Phase 1 runs the perturbed descent; phase 2 restarts plain descent from
// its output with step size 1/beta until the solution-set distance (oracle
// when available, gradient proxy alpha * eps_final otherwise) reaches
// eps_final.
inline PgdliResult run_pgdli(const ObjectiveFunction& f, const Vector& x0,
                             const PgdParams& params, double beta, RngState& rng,
                             double eps_final, long max_iter_phase1, long max_iter_phase2 = 0,
                             const StepObserver& observer = {}) {
  if (!f.regularity)
    throw invalid_parameter_error("run_pgdli: objective lacks regularity parameters");
  if (beta < f.regularity->alpha)
    throw invalid_parameter_error("run_pgdli: beta must be at least alpha");
  if (eps_final <= 0.0) throw invalid_parameter_error("run_pgdli: eps_final must be positive");

  PgdliResult result;
  PgdResult phase1 = run_pgd(f, x0, params, rng, max_iter_phase1, observer);
  result.pgd_trace = std::move(phase1.trace);

  GdStop stop;
  if (max_iter_phase2 < 1) {
    const double alpha = f.regularity->alpha;
    const double zeta = f.regularity->zeta;
    // zeta may be infinite (globally regular objectives); cap the budget.
    const double contractions =
        std::min(1e8, (beta / alpha) * std::log(std::max(zeta / eps_final, 2.0)));
    max_iter_phase2 = 100 + 10 * static_cast<long>(std::ceil(contractions));
  }
  stop.max_iter = max_iter_phase2;
  if (f.distance_to_solutions) {
    stop.distance_oracle = f.distance_to_solutions;
    stop.distance_tol = eps_final;
  } else {
    stop.grad_tol = f.regularity->alpha * eps_final;
  }
  result.gd_trace = run_gd(f, phase1.output, 1.0 / beta, stop, observer);
  result.output = result.gd_trace.final_point;
  return result;
}

// ---------------------------------------------------------------------------
// Descent-lemma audit over a recorded trace
// ---------------------------------------------------------------------------

struct DescentCheck {
  long steps_checked = 0;
  long violations = 0;
  double worst_margin = 0.0;  // most positive violation amount observed
};

// Verifies f(x_{t+1}) <= f(x_t) - eta/2 ||grad f(x_t)||^2 (up to rounding
// slack) on every plain step; steps that cross a perturbation use the
// post-perturbation value and gradient.
inline DescentCheck check_descent_lemma(const RunTrace& trace) {
  DescentCheck check;
  std::size_t next_event = 0;
  const long steps = trace.iterations();
  for (long t = 0; t < steps; ++t) {
    double from_value = trace.values[static_cast<std::size_t>(t)];
    double from_grad = trace.grad_norms[static_cast<std::size_t>(t)];
    while (next_event < trace.perturbation_events.size() &&
           trace.perturbation_events[next_event].iteration < t)
      ++next_event;
    if (next_event < trace.perturbation_events.size() &&
        trace.perturbation_events[next_event].iteration == t) {
      from_value = trace.perturbation_events[next_event].value_after;
      from_grad = trace.perturbation_events[next_event].grad_norm_after;
    }
    const double bound = from_value - 0.5 * trace.eta * from_grad * from_grad +
                         1e-12 * (1.0 + std::abs(from_value));
    const double actual = trace.values[static_cast<std::size_t>(t + 1)];
    ++check.steps_checked;
    if (actual > bound) {
      ++check.violations;
      check.worst_margin = std::max(check.worst_margin, actual - bound);
    }
  }
  return check;
}

// ---------------------------------------------------------------------------
// Natural scales near a strict saddle point
// ---------------------------------------------------------------------------

struct ScaleUnits {
  double f_unit = 0.0;    // function decrease
  double g_unit = 0.0;    // gradient norm
  double s_unit = 0.0;    // parameter-space distance
  double t_unit = 0.0;    // iteration count
  double kappa = 0.0;     // ell / gamma, at least 1
  double gamma = 0.0;     // negative-curvature magnitude used
  double eta = 0.0;       // step size used
  double delta = 0.0;     // failure probability used
  int dim = 0;            // ambient dimension used
  double log_term = 0.0;  // log(dim * kappa / delta), at least 1
};

inline ScaleUnits compute_scale_units(double ell, double rho, double gamma, double eta,
                                      double delta, int dim) {
  if (ell <= 0.0 || rho <= 0.0 || gamma <= 0.0 || eta <= 0.0)
    throw invalid_parameter_error("compute_scale_units: inputs must be positive");
  if (dim < 1) throw invalid_parameter_error("compute_scale_units: dim must be >= 1");
  if (gamma > ell)
    throw invalid_parameter_error("compute_scale_units: gamma exceeds ell (kappa < 1)");

  ScaleUnits u;
  u.kappa = ell / gamma;
  const double upper = dim * u.kappa / std::exp(1.0);
  if (delta <= 0.0 || delta > upper)
    throw invalid_parameter_error("compute_scale_units: delta outside (0, dim*kappa/e]");
  u.gamma = gamma;
  u.eta = eta;
  u.delta = delta;
  u.dim = dim;
  u.log_term = std::log(dim * u.kappa / delta);
  const double sqrt_eta_ell = std::sqrt(eta * ell);
  u.f_unit = eta * ell * (gamma * gamma * gamma) / (rho * rho) / std::pow(u.log_term, 3);
  u.g_unit = sqrt_eta_ell * (gamma * gamma) / rho / (u.log_term * u.log_term);
  u.s_unit = sqrt_eta_ell * gamma / rho / u.log_term;
  u.t_unit = u.log_term / (eta * gamma);
  return u;
}

}  // namespace pgdlab
