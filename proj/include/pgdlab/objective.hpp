#pragma once

// Objective-function abstraction with declared smoothness constants,
// finite-difference oracles, and first/second-order stationarity
// classification.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "pgdlab/errors.hpp"
#include "pgdlab/linalg.hpp"

namespace pgdlab {

// Gradient-Lipschitz constant ell and Hessian-Lipschitz constant rho,
// valid inside the objective's declared domain ball.
struct SmoothnessProfile {
  double ell = 1.0;
  double rho = 1.0;
};

// (theta, gamma, zeta): at every point at least one of {gradient >= theta,
// smallest Hessian eigenvalue <= -gamma, within zeta of the solution set}
// holds.
struct StrictSaddleParams {
  double theta = 0.0;
  double gamma = 0.0;
  double zeta = 0.0;
};

// (alpha, beta) regularity in a zeta-neighborhood of the solution set:
// <grad f(x), x - P(x)> >= alpha/2 ||x - P(x)||^2 + 1/(2 beta) ||grad f(x)||^2.
struct RegularityParams {
  double alpha = 0.0;
  double beta = 0.0;
  double zeta = 0.0;
};

struct ObjectiveFunction {
  int dim = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;

  // Optional exact Hessian-vector product.
  std::function<Vector(const Vector&, const Vector&)> hessian_vec;

  // Optional fused evaluation writing the gradient into a caller buffer;
  // descent loops use it to avoid per-step allocation.
  std::function<double(const Vector&, Vector&)> value_and_gradient;

  SmoothnessProfile profile;
  std::optional<StrictSaddleParams> saddle;
  std::optional<RegularityParams> regularity;

  // Validity ball {||x|| <= domain_radius} inside which the profile holds.
  double domain_radius = std::numeric_limits<double>::infinity();

  // Optional distance oracle to the solution set.
  std::function<double(const Vector&)> distance_to_solutions;

  double eval_value_and_gradient(const Vector& x, Vector& grad_out) const {
    if (value_and_gradient) return value_and_gradient(x, grad_out);
    grad_out = gradient(x);
    return value(x);
  }
};

// Central-difference step scaled to the working point.
inline double fd_default_step(const Vector& x) {
  return std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + inf_norm(x));
}

inline Vector fd_gradient(const ObjectiveFunction& f, const Vector& x, double h = 0.0) {
  if (h == 0.0) h = fd_default_step(x);
  if (h <= 0.0) throw invalid_parameter_error("fd_gradient: step must be positive");
  Vector grad(x.size());
  Vector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f.value(probe);
    probe[i] = x[i] - h;
    const double fm = f.value(probe);
    probe[i] = x[i];
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// Columns are central differences of the gradient; result symmetrized.
inline SymMatrix fd_hessian(const ObjectiveFunction& f, const Vector& x, double h = 0.0) {
  if (h == 0.0) h = fd_default_step(x);
  if (h <= 0.0) throw invalid_parameter_error("fd_hessian: step must be positive");
  const int d = static_cast<int>(x.size());
  Matrix hess(d, d);
  Vector probe = x;
  for (int j = 0; j < d; ++j) {
    probe[j] = x[j] + h;
    const Vector gp = f.gradient(probe);
    probe[j] = x[j] - h;
    const Vector gm = f.gradient(probe);
    probe[j] = x[j];
    for (int i = 0; i < d; ++i) hess(i, j) = (gp[i] - gm[i]) / (2.0 * h);
  }
  return SymMatrix{hess};
}

// Dense Hessian: exact columns via hessian_vec when available, finite
// differences otherwise.
inline SymMatrix dense_hessian(const ObjectiveFunction& f, const Vector& x) {
  if (!f.hessian_vec) return fd_hessian(f, x);
  const int d = static_cast<int>(x.size());
  Matrix hess(d, d);
  Vector e(x.size(), 0.0);
  for (int j = 0; j < d; ++j) {
    e[j] = 1.0;
    const Vector col = f.hessian_vec(x, e);
    e[j] = 0.0;
    for (int i = 0; i < d; ++i) hess(i, j) = col[i];
  }
  return SymMatrix{hess};
}

struct StationarityReport {
  double grad_norm = 0.0;
  double min_hessian_eig = 0.0;
  bool is_eps_fosp = false;
  bool is_eps_sosp = false;
  double epsilon = 0.0;
  double rho = 0.0;
  // Point lies outside the declared validity ball; the profile constants
  // (and hence the sosp threshold) may not apply there.
  bool outside_domain = false;
};

// First/second-order stationarity at x: first-order when the gradient norm
// is at most epsilon, second-order when additionally the smallest Hessian
// eigenvalue is at least -sqrt(rho * epsilon).
inline StationarityReport classify_point(const ObjectiveFunction& f, const Vector& x,
                                         double epsilon) {
  if (epsilon <= 0.0) throw invalid_parameter_error("classify_point: epsilon must be positive");
  if (!all_finite(x)) throw invalid_input_error("classify_point: non-finite point");

  const double fx = f.value(x);
  if (!std::isfinite(fx)) throw evaluation_error("classify_point: non-finite value", -1);
  const Vector grad = f.gradient(x);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i]))
      throw evaluation_error("classify_point: non-finite gradient component " + std::to_string(i),
                             static_cast<int>(i));
  }

  StationarityReport report;
  report.epsilon = epsilon;
  report.rho = f.profile.rho;
  report.grad_norm = norm(grad);
  report.min_hessian_eig = sym_eigen(dense_hessian(f, x)).values.front();
  report.is_eps_fosp = report.grad_norm <= epsilon;
  report.is_eps_sosp =
      report.is_eps_fosp && report.min_hessian_eig >= -std::sqrt(f.profile.rho * epsilon);
  report.outside_domain = norm(x) > f.domain_radius;
  return report;
}

}  // namespace pgdlab
