#pragma once

// Executable saddle-point geometry experiments: coupled descent pairs
// separated along the negative-curvature direction, Monte Carlo volume
// estimates of the stuck region inside the perturbation ball, and
// escape-time statistics.

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pgdlab/errors.hpp"
#include "pgdlab/linalg.hpp"
#include "pgdlab/objective.hpp"
#include "pgdlab/pgd.hpp"

namespace pgdlab {

// 95% Wilson score interval for a binomial proportion; well behaved at
// counts near zero.
struct WilsonInterval {
  double lower = 0.0;
  double upper = 1.0;
  double halfwidth = 0.5;
};

inline WilsonInterval wilson_interval(long successes, long trials, double z = 1.959963984540054) {
  if (trials <= 0) throw invalid_parameter_error("wilson_interval: trials must be positive");
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2.0 * n)) / denom;
  const double spread =
      z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
  WilsonInterval w;
  w.lower = std::max(0.0, center - spread);
  w.upper = std::min(1.0, center + spread);
  w.halfwidth = spread;
  return w;
}

namespace detail {

// Plain descent from x0 for at most `horizon` steps, watching the decrease
// f(base) - f(x_t). Returns the first step index at which the decrease
// reaches `target` (or -1 if censored) plus the decrease actually achieved.
// With eta <= 1/ell each step only decreases f, so runs may stop at the
// crossing; otherwise they run the full horizon.
struct DecreaseRun {
  long steps_to_target = -1;
  double achieved_decrease = 0.0;  // f(base) - f(x_end)
  double max_distance_from = 0.0;  // max_t ||x_t - reference||
};

inline DecreaseRun decrease_run(const ObjectiveFunction& f, Vector x, double f_base,
                                double target, double eta, long horizon,
                                const Vector& reference) {
  const bool can_stop_early = eta <= 1.0 / f.profile.ell;
  DecreaseRun out;
  Vector grad(x.size());
  for (long t = 0;; ++t) {
    const double fx = f.eval_value_and_gradient(x, grad);
    if (!std::isfinite(fx))
      throw divergence_error("geometry run diverged", t, -1);
    out.max_distance_from = std::max(out.max_distance_from, distance(x, reference));
    out.achieved_decrease = f_base - fx;
    if (out.steps_to_target < 0 && out.achieved_decrease >= target) {
      out.steps_to_target = t;
      if (can_stop_early) break;
    }
    if (t >= horizon) break;
    axpy(-eta, grad, x);
  }
  return out;
}

inline double min_curvature_at(const ObjectiveFunction& f, const Vector& point) {
  return sym_eigen(dense_hessian(f, point)).values.front();
}

// Desk-scale caps for the Monte Carlo experiments.
inline constexpr int kMaxExperimentDim = 200;
inline constexpr long kMaxExperimentSamples = 100000;

inline void check_experiment_scale(int dim, long samples, const char* op) {
  if (dim > kMaxExperimentDim)
    throw invalid_parameter_error(std::string(op) + ": dimension above the desk-scale cap");
  if (samples > kMaxExperimentSamples)
    throw invalid_parameter_error(std::string(op) + ": sample count above the desk-scale cap");
}

}  // namespace detail

// Unit eigenvector of the smallest Hessian eigenvalue at `point` (exact
// Hessian when available, finite differences otherwise). Eigenvalue ties
// resolve to the smallest original index.
inline Vector min_curvature_direction(const ObjectiveFunction& f, const Vector& point) {
  const EigenDecomposition eig = sym_eigen(dense_hessian(f, point));
  Vector e1(point.size());
  for (std::size_t i = 0; i < e1.size(); ++i) e1[i] = eig.vectors(static_cast<int>(i), 0);
  return e1;
}

// ---------------------------------------------------------------------------
// Coupled escape experiment: two descent sequences whose starts differ by
// mu * radius along the minimum-eigenvector direction e1. With mu at least
// delta / (2 sqrt(d)) the pair cannot both stay stuck.
// ---------------------------------------------------------------------------

struct CoupledSpec {
  Vector base_point;            // candidate saddle x-tilde
  double radius = 0.0;          // perturbation radius for u0
  double mu = 0.0;              // separation in [delta/(2 sqrt d), 1]
  Vector e1;                    // unit negative-curvature direction
  long horizon = 0;             // descent steps for both sequences
  double decrease_target = 2.5; // in multiples of the f_unit scale
};

struct CoupledEscapeResult {
  bool escaped_u = false;
  bool escaped_w = false;
  double decrease_u = 0.0;   // f(u_end) - f(u_0), negative when descending
  double decrease_w = 0.0;
  double min_decrease = 0.0; // min of the two
  // Observational: largest ||u_t - x~|| in s_unit multiples across both runs.
  double max_radius_over_s_unit = 0.0;
};

inline CoupledEscapeResult coupled_escape_test(const ObjectiveFunction& f,
                                               const CoupledSpec& spec, const ScaleUnits& units,
                                               RngState& rng) {
  const int d = f.dim;
  detail::check_experiment_scale(d, 1, "coupled_escape_test");
  if (static_cast<int>(spec.base_point.size()) != d || static_cast<int>(spec.e1.size()) != d)
    throw invalid_parameter_error("coupled_escape_test: dimension mismatch");
  if (std::abs(norm(spec.e1) - 1.0) > 1e-8)
    throw invalid_parameter_error("coupled_escape_test: e1 must be unit norm");
  if (spec.horizon < 1 || spec.radius <= 0.0 || spec.decrease_target <= 0.0)
    throw invalid_parameter_error("coupled_escape_test: invalid spec");
  const double mu_min = units.delta / (2.0 * std::sqrt(static_cast<double>(d)));
  if (spec.mu < mu_min || spec.mu > 1.0)
    throw invalid_parameter_error("coupled_escape_test: mu outside [delta/(2 sqrt d), 1]");

  const double base_grad = norm(f.gradient(spec.base_point));
  if (base_grad > units.g_unit)
    throw precondition_error("coupled_escape_test: gradient norm at base point exceeds g_unit");
  const double curvature = detail::min_curvature_at(f, spec.base_point);
  if (curvature > -units.gamma)
    throw precondition_error(
        "coupled_escape_test: smallest Hessian eigenvalue at base point exceeds -gamma");

  Vector u0 = add(spec.base_point, sample_ball(d, spec.radius, rng));
  Vector w0 = u0;
  axpy(spec.mu * spec.radius, spec.e1, w0);

  const double target = spec.decrease_target * units.f_unit;
  const double fu0 = f.value(u0);
  const double fw0 = f.value(w0);
  const auto run_u = detail::decrease_run(f, u0, fu0, target, units.eta, spec.horizon,
                                          spec.base_point);
  const auto run_w = detail::decrease_run(f, w0, fw0, target, units.eta, spec.horizon,
                                          spec.base_point);

  CoupledEscapeResult out;
  out.escaped_u = run_u.steps_to_target >= 0;
  out.escaped_w = run_w.steps_to_target >= 0;
  out.decrease_u = -run_u.achieved_decrease;
  out.decrease_w = -run_w.achieved_decrease;
  out.min_decrease = std::min(out.decrease_u, out.decrease_w);
  out.max_radius_over_s_unit =
      std::max(run_u.max_distance_from, run_w.max_distance_from) / units.s_unit;
  return out;
}

// ---------------------------------------------------------------------------
// Stuck-region volume estimate: fraction of the perturbation ball from
// which t_thres descent steps fail to decrease f by f_thres (the runner's
// own termination test).
// ---------------------------------------------------------------------------

struct StuckRegionEstimate {
  long samples = 0;
  long stuck_count = 0;
  double fraction = 0.0;
  double confidence_halfwidth = 0.0;  // Wilson 95%
  double wilson_upper = 1.0;
  double delta_bound = 0.0;    // the failure probability the estimate is tested against
  double min_curvature = 0.0;  // smallest Hessian eigenvalue at the base point
};

// Called once per sample with the sampled start, the decrease achieved
// over the window, and the stuck verdict.
using StuckSampleObserver = std::function<void(long, const Vector&, double, bool)>;

// Per-sample descent state is derived from (rng, sample index), so results
// do not depend on evaluation order and trials may fan out across workers.
inline StuckRegionEstimate estimate_stuck_volume(const ObjectiveFunction& f,
                                                 const Vector& base_point,
                                                 const PgdParams& params, long n_samples,
                                                 RngState& rng, long steps_override = 0,
                                                 const StuckSampleObserver& observer = {}) {
  if (n_samples < 1) throw invalid_parameter_error("estimate_stuck_volume: need samples");
  detail::check_experiment_scale(f.dim, n_samples, "estimate_stuck_volume");
  if (static_cast<int>(base_point.size()) != f.dim)
    throw invalid_parameter_error("estimate_stuck_volume: dimension mismatch");
  const double base_grad = norm(f.gradient(base_point));
  if (base_grad > params.g_thres)
    throw precondition_error(
        "estimate_stuck_volume: gradient norm at base point exceeds g_thres");

  StuckRegionEstimate out;
  out.samples = n_samples;
  out.delta_bound = params.delta;
  // Negative curvature is reported, not enforced: a PSD base point simply
  // yields a fraction near one.
  out.min_curvature = detail::min_curvature_at(f, base_point);

  const long horizon = steps_override > 0 ? steps_override : params.t_thres;
  const double f_base = f.value(base_point);
  const RngState salt(rng.next_u64());
  for (long i = 0; i < n_samples; ++i) {
    RngState stream = salt.derive(static_cast<std::uint64_t>(i));
    const Vector x0 = add(base_point, sample_ball(f.dim, params.r, stream));
    const auto run = detail::decrease_run(f, x0, f_base, params.f_thres, params.eta, horizon,
                                          base_point);
    const bool stuck = run.steps_to_target < 0;
    if (stuck) ++out.stuck_count;
    if (observer) observer(i, x0, run.achieved_decrease, stuck);
  }
  out.fraction = static_cast<double>(out.stuck_count) / static_cast<double>(n_samples);
  const WilsonInterval ci = wilson_interval(out.stuck_count, n_samples);
  out.confidence_halfwidth = ci.halfwidth;
  out.wilson_upper = ci.upper;
  return out;
}

// ---------------------------------------------------------------------------
// Escape-time statistics: per trial, perturb and run descent until the
// decrease target is met (recording the step count) or the window ends
// (censored).
// ---------------------------------------------------------------------------

struct EscapeTimeStats {
  long trials = 0;
  long censored = 0;
  std::vector<long> steps;  // per escaped trial

  double censored_fraction() const {
    return trials > 0 ? static_cast<double>(censored) / static_cast<double>(trials) : 0.0;
  }

  // Median steps over escaped trials; censored runs excluded.
  double median_steps() const {
    if (steps.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<long> sorted = steps;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    return n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                      : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }

  std::map<long, long> histogram(long bin_width = 1) const {
    if (bin_width < 1) throw invalid_parameter_error("histogram: bin width must be >= 1");
    std::map<long, long> bins;
    for (long s : steps) ++bins[(s / bin_width) * bin_width];
    return bins;
  }
};

inline EscapeTimeStats escape_time_stats(const ObjectiveFunction& f, const Vector& base_point,
                                         const PgdParams& params, long n_trials, RngState& rng,
                                         long steps_override = 0) {
  if (n_trials < 1) throw invalid_parameter_error("escape_time_stats: need trials");
  detail::check_experiment_scale(f.dim, n_trials, "escape_time_stats");
  if (static_cast<int>(base_point.size()) != f.dim)
    throw invalid_parameter_error("escape_time_stats: dimension mismatch");

  EscapeTimeStats out;
  out.trials = n_trials;
  const long horizon = steps_override > 0 ? steps_override : params.t_thres;
  const double f_base = f.value(base_point);
  const RngState salt(rng.next_u64());
  for (long i = 0; i < n_trials; ++i) {
    RngState stream = salt.derive(static_cast<std::uint64_t>(i));
    const Vector x0 = add(base_point, sample_ball(f.dim, params.r, stream));
    const auto run = detail::decrease_run(f, x0, f_base, params.f_thres, params.eta, horizon,
                                          base_point);
    if (run.steps_to_target < 0)
      ++out.censored;
    else
      out.steps.push_back(run.steps_to_target);
  }
  return out;
}

}  // namespace pgdlab
