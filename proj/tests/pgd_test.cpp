#include "pgdlab/pgd.hpp"

#include <cstring>

#include "gtest/gtest.h"

using namespace pgdlab;

namespace {

// f(x) = 1/2 (x - target)^T A (x - target) for symmetric positive definite A.
ObjectiveFunction quadratic_bowl(const SymMatrix& a, Vector target) {
  ObjectiveFunction f;
  f.dim = a.dim();
  const EigenDecomposition eig = sym_eigen(a);
  f.profile.ell = eig.values.back();
  f.profile.rho = 1.0;  // constant Hessian; any positive constant is valid
  f.regularity = RegularityParams{eig.values.front(), eig.values.back(), 1e30};
  auto shared_target = std::make_shared<Vector>(std::move(target));
  f.value = [a, shared_target](const Vector& x) {
    const Vector d = sub(x, *shared_target);
    return 0.5 * dot(d, a.multiply(d));
  };
  f.gradient = [a, shared_target](const Vector& x) { return a.multiply(sub(x, *shared_target)); };
  f.hessian_vec = [a](const Vector&, const Vector& v) { return a.multiply(v); };
  f.distance_to_solutions = [shared_target](const Vector& x) {
    return distance(x, *shared_target);
  };
  return f;
}

ObjectiveFunction isotropic_bowl(int dim) {
  return quadratic_bowl(SymMatrix::identity(dim), Vector(dim, 0.0));
}

// f(x) = x1^2 - x2^2; ell = 2, declared rho = 1 (constant Hessian).
ObjectiveFunction saddle_2d() {
  ObjectiveFunction f;
  f.dim = 2;
  f.value = [](const Vector& x) { return x[0] * x[0] - x[1] * x[1]; };
  f.gradient = [](const Vector& x) { return Vector{2.0 * x[0], -2.0 * x[1]}; };
  f.hessian_vec = [](const Vector&, const Vector& v) { return Vector{2.0 * v[0], -2.0 * v[1]}; };
  f.profile = {2.0, 1.0};
  return f;
}

// Double well f(x) = (x^2 - 1)^2 / 4: local max at 0, minima at +-1.
ObjectiveFunction double_well_1d() {
  ObjectiveFunction f;
  f.dim = 1;
  f.value = [](const Vector& x) {
    const double q = x[0] * x[0] - 1.0;
    return 0.25 * q * q;
  };
  f.gradient = [](const Vector& x) { return Vector{x[0] * (x[0] * x[0] - 1.0)}; };
  f.hessian_vec = [](const Vector& x, const Vector& v) {
    return Vector{(3.0 * x[0] * x[0] - 1.0) * v[0]};
  };
  f.profile = {11.0, 12.0};  // valid on |x| <= 2
  f.domain_radius = 2.0;
  return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// compute_pgd_params
// ---------------------------------------------------------------------------

TEST(PgdParams, WorkedExampleIsExact) {
  const PgdParams p = compute_pgd_params(1.0, 1.0, 1.0, 1.0, 0.5, 1.0, 1);
  EXPECT_DOUBLE_EQ(p.chi, 12.0);
  EXPECT_DOUBLE_EQ(p.eta, 1.0);
  EXPECT_DOUBLE_EQ(p.r, 1.0 / 144.0);
  EXPECT_DOUBLE_EQ(p.g_thres, 1.0 / 144.0);
  EXPECT_DOUBLE_EQ(p.f_thres, 1.0 / 1728.0);
  EXPECT_EQ(p.t_thres, 12);
}

TEST(PgdParams, StepSizeIsCOverEll) {
  RngState rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const double ell = 0.5 + 10.0 * rng.next_double();
    const double c = 0.1 + 0.8 * rng.next_double();
    const PgdParams p = compute_pgd_params(ell, 1.0, 0.01, c, 0.1, 1.0, 5);
    EXPECT_DOUBLE_EQ(p.eta, c / ell);
  }
}

TEST(PgdParams, DoublingEllHalvesEta) {
  const PgdParams p1 = compute_pgd_params(1.0, 1.0, 0.01, 0.5, 0.1, 1.0, 5);
  const PgdParams p2 = compute_pgd_params(2.0, 1.0, 0.01, 0.5, 0.1, 1.0, 5);
  EXPECT_DOUBLE_EQ(p2.eta, 0.5 * p1.eta);
}

TEST(PgdParams, FieldsMatchFormulaRecomputation) {
  const double ell = 3.0, rho = 2.0, eps = 0.05, c = 0.4, delta = 0.2, df = 7.0;
  const int dim = 12;
  const PgdParams p = compute_pgd_params(ell, rho, eps, c, delta, df, dim);
  const double chi = 3.0 * std::max(std::log(dim * ell * df / (c * eps * eps * delta)), 4.0);
  EXPECT_DOUBLE_EQ(p.chi, chi);
  EXPECT_DOUBLE_EQ(p.r, std::sqrt(c) / (chi * chi) * eps / ell);
  EXPECT_DOUBLE_EQ(p.g_thres, std::sqrt(c) / (chi * chi) * eps);
  EXPECT_DOUBLE_EQ(p.f_thres, c / (chi * chi * chi) * std::sqrt(eps * eps * eps / rho));
  EXPECT_EQ(p.t_thres, static_cast<long>(std::ceil(chi / (c * c) * ell / std::sqrt(rho * eps))));
}

TEST(PgdParams, RegimeFlagWhenEpsilonLarge) {
  EXPECT_FALSE(compute_pgd_params(1.0, 1.0, 0.5, 0.5, 0.1, 1.0, 2).plain_gd_suffices);
  EXPECT_TRUE(compute_pgd_params(1.0, 1.0, 1.5, 0.5, 0.1, 1.0, 2).plain_gd_suffices);
}

TEST(PgdParams, RejectsBadInputs) {
  EXPECT_THROW(compute_pgd_params(0.0, 1.0, 1.0, 1.0, 0.5, 1.0, 1), invalid_parameter_error);
  EXPECT_THROW(compute_pgd_params(1.0, 1.0, 1.0, 1.0, 1.5, 1.0, 1), invalid_parameter_error);
  EXPECT_THROW(compute_pgd_params(1.0, 1.0, -1.0, 1.0, 0.5, 1.0, 1), invalid_parameter_error);
  EXPECT_THROW(compute_pgd_params(1.0, 1.0, 1.0, 1.0, 0.5, 1.0, 0), invalid_parameter_error);
}

// ---------------------------------------------------------------------------
// run_gd
// ---------------------------------------------------------------------------

TEST(RunGd, IdentityHessianConvergesInOneStep) {
  const ObjectiveFunction f = isotropic_bowl(3);
  GdStop stop;
  stop.max_iter = 10;
  stop.grad_tol = 1e-14;
  const RunTrace trace = run_gd(f, {0.3, -2.0, 1.0}, 1.0, stop);
  EXPECT_EQ(trace.termination, Termination::target_reached);
  EXPECT_EQ(trace.iterations(), 1);
  EXPECT_NEAR(trace.values.back(), 0.0, 1e-28);
}

// Strongly convex rate: eta = 1/ell reaches the eps-ball of the minimizer
// within ceil(2 (ell/alpha) log(||x0 - x*|| / eps)) iterations.
TEST(RunGd, StronglyConvexIterationBound) {
  RngState rng(29);
  const int d = 50;
  const double alpha = 1.0, ell = 10.0, eps = 1e-6;

  Matrix gauss(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) gauss(i, j) = rng.next_gaussian();
  const Matrix q = small_svd(gauss).u;
  Vector spectrum(d);
  spectrum[0] = alpha;
  spectrum[d - 1] = ell;
  for (int i = 1; i + 1 < d; ++i) spectrum[i] = alpha + (ell - alpha) * rng.next_double();
  Matrix lam_qt = q.transposed();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) lam_qt(i, j) *= spectrum[i];
  const SymMatrix a{q * lam_qt};

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RngState point_rng = rng.derive(seed);
    const Vector target = sample_ball(d, 3.0, point_rng);
    const Vector x0 = sample_ball(d, 5.0, point_rng);
    const ObjectiveFunction f = quadratic_bowl(a, target);

    const double bound = std::ceil(2.0 * (ell / alpha) * std::log(distance(x0, target) / eps));
    GdStop stop;
    stop.max_iter = static_cast<long>(bound) + 10;
    stop.target_point = target;
    stop.target_tol = eps;
    const RunTrace trace = run_gd(f, x0, 1.0 / ell, stop);
    EXPECT_EQ(trace.termination, Termination::target_reached);
    EXPECT_LE(trace.iterations(), static_cast<long>(bound));
  }
}

// Plain descent walks straight into the saddle when started on its stable
// manifold: x_t = (1 - 2 eta)^t x_0.
TEST(RunGd, ConvergesToSaddleFromStableManifold) {
  const ObjectiveFunction f = saddle_2d();
  const double eta = 0.25;
  GdStop stop;
  stop.max_iter = 200;
  const RunTrace trace = run_gd(f, {1.0, 0.0}, eta, stop);
  ASSERT_EQ(trace.iterations(), 200);
  for (long t = 0; t <= 20; ++t) {
    EXPECT_NEAR(trace.iterates[static_cast<std::size_t>(t)][0], std::pow(1.0 - 2.0 * eta, t),
                1e-12);
    EXPECT_DOUBLE_EQ(trace.iterates[static_cast<std::size_t>(t)][1], 0.0);
  }
  EXPECT_LE(trace.grad_norms.back(), 1e-20);
  const StationarityReport report = classify_point(f, trace.iterates.back(), 0.1);
  EXPECT_TRUE(report.is_eps_fosp);
  EXPECT_FALSE(report.is_eps_sosp);
}

TEST(RunGd, DescentLemmaHoldsOnTrace) {
  const ObjectiveFunction f = saddle_2d();
  GdStop stop;
  stop.max_iter = 500;
  const RunTrace trace = run_gd(f, {0.8, 1e-6}, 0.25, stop);  // eta < 1/ell = 0.5
  const DescentCheck check = check_descent_lemma(trace);
  EXPECT_EQ(check.violations, 0);
  EXPECT_EQ(check.steps_checked, trace.iterations());
}

TEST(RunGd, DivergenceCarriesPartialTrace) {
  ObjectiveFunction f;
  f.dim = 1;
  f.value = [](const Vector& x) { return -x[0] * x[0]; };
  f.gradient = [](const Vector& x) { return Vector{-2.0 * x[0]}; };
  f.profile = {2.0, 1.0};
  GdStop stop;
  stop.max_iter = 10000;
  try {
    run_gd(f, {1.0}, 1.0, stop);
    FAIL() << "expected divergence";
  } catch (const divergence_with_trace& e) {
    EXPECT_GT(e.iteration, 10);
    EXPECT_GT(e.partial_trace.values.size(), 10u);
  }
}

// ---------------------------------------------------------------------------
// run_pgd
// ---------------------------------------------------------------------------

TEST(RunPgd, ReturnsPrePerturbationPointNearMinimum) {
  const ObjectiveFunction f = isotropic_bowl(2);
  const PgdParams params = compute_pgd_params(1.0, 1.0, 0.1, 0.5, 0.1, 1.0, 2);

  // Start close enough that the gradient is already below g_thres.
  const Vector x0 = {0.5 * params.g_thres, 0.0};
  RngState rng(5);
  const PgdResult result = run_pgd(f, x0, params, rng, 100000);

  EXPECT_EQ(result.trace.termination, Termination::threshold_return);
  ASSERT_EQ(result.trace.perturbation_events.size(), 1u);
  EXPECT_EQ(result.trace.perturbation_events[0].iteration, 0);
  EXPECT_EQ(result.output, x0);  // x-tilde_0 returned verbatim
  EXPECT_EQ(result.trace.iterations(), params.t_thres);
  EXPECT_TRUE(classify_point(f, result.output, params.epsilon).is_eps_sosp);
}

TEST(RunPgd, EscapesSaddleWhereGdIsStuck) {
  const ObjectiveFunction f = saddle_2d();
  const PgdParams params = compute_pgd_params(2.0, 1.0, 0.1, 0.5, 0.1, 1.0, 2);

  // Plain descent initialized exactly at the saddle never moves.
  GdStop stop;
  stop.max_iter = 1000;
  const RunTrace gd_trace = run_gd(f, {0.0, 0.0}, params.eta, stop);
  EXPECT_DOUBLE_EQ(gd_trace.values.back(), 0.0);

  int escapes = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngState rng(seed);
    const PgdResult result = run_pgd(f, {0.0, 0.0}, params, rng, params.t_thres + 20);
    ASSERT_GE(result.trace.perturbation_events.size(), 1u);
    const long t0 = result.trace.perturbation_events[0].iteration;
    const double f_tilde = result.trace.values[static_cast<std::size_t>(t0)];
    bool escaped = false;
    const long horizon =
        std::min<long>(t0 + params.t_thres, result.trace.iterations());
    for (long t = t0 + 1; t <= horizon; ++t) {
      if (result.trace.values[static_cast<std::size_t>(t)] <= f_tilde - params.f_thres) {
        escaped = true;
        break;
      }
    }
    if (escaped) ++escapes;
  }
  EXPECT_GE(escapes, 95);
}

TEST(RunPgd, DeterministicGivenSeed) {
  const ObjectiveFunction f = saddle_2d();
  const PgdParams params = compute_pgd_params(2.0, 1.0, 0.1, 0.5, 0.1, 1.0, 2);
  RngState rng_a(77), rng_b(77);
  const PgdResult a = run_pgd(f, {0.0, 0.0}, params, rng_a, 900);
  const PgdResult b = run_pgd(f, {0.0, 0.0}, params, rng_b, 900);
  ASSERT_EQ(a.trace.values.size(), b.trace.values.size());
  EXPECT_EQ(0, std::memcmp(a.trace.values.data(), b.trace.values.data(),
                           a.trace.values.size() * sizeof(double)));
  ASSERT_EQ(a.trace.perturbation_events.size(), b.trace.perturbation_events.size());
  for (std::size_t i = 0; i < a.trace.perturbation_events.size(); ++i) {
    EXPECT_EQ(a.trace.perturbation_events[i].offset, b.trace.perturbation_events[i].offset);
  }
  EXPECT_EQ(a.output, b.output);
}

// Two perturbations in one run: escape from the local max of a double well,
// then a stuck window at the reached minimum.
TEST(RunPgd, EventBookkeepingAcrossMultiplePerturbations) {
  const ObjectiveFunction f = double_well_1d();
  const PgdParams params = compute_pgd_params(11.0, 12.0, 0.01, 0.5, 0.1, 0.25, 1);
  RngState rng(9);
  const PgdResult result = run_pgd(f, {0.0}, params, rng, 40000);

  EXPECT_EQ(result.trace.termination, Termination::threshold_return);
  ASSERT_EQ(result.trace.perturbation_events.size(), 2u);
  const auto& events = result.trace.perturbation_events;
  EXPECT_GT(events[1].iteration - events[0].iteration, params.t_thres);
  for (const auto& event : events) {
    EXPECT_LE(result.trace.grad_norms[static_cast<std::size_t>(event.iteration)],
              params.g_thres);
    EXPECT_LE(norm(event.offset), params.r);
  }
  // Returned point sits at one of the true minima and is second-order.
  EXPECT_NEAR(std::abs(result.output[0]), 1.0, 1e-3);
  EXPECT_TRUE(classify_point(f, result.output, params.epsilon).is_eps_sosp);
  // Threshold return hands back the point recorded at the final event.
  EXPECT_EQ(result.output, events[1].pre_perturbation_point);

  const DescentCheck check = check_descent_lemma(result.trace);
  EXPECT_EQ(check.violations, 0);
}

TEST(RunPgd, MaxIterTermination) {
  const ObjectiveFunction f = saddle_2d();
  const PgdParams params = compute_pgd_params(2.0, 1.0, 0.1, 0.5, 0.1, 1.0, 2);
  RngState rng(1);
  const PgdResult result = run_pgd(f, {0.0, 0.0}, params, rng, 5);
  EXPECT_EQ(result.trace.termination, Termination::max_iter);
  EXPECT_EQ(result.trace.iterations(), 5);
}

// ---------------------------------------------------------------------------
// run_pgdli
// ---------------------------------------------------------------------------

TEST(RunPgdli, RequiresRegularity) {
  const ObjectiveFunction f = saddle_2d();  // no regularity attached
  const PgdParams params = compute_pgd_params(2.0, 1.0, 0.1, 0.5, 0.1, 1.0, 2);
  RngState rng(2);
  EXPECT_THROW(run_pgdli(f, {0.0, 0.0}, params, 2.0, rng, 1e-3, 1000),
               invalid_parameter_error);
}

TEST(RunPgdli, PhaseTwoDistanceIsNonIncreasing) {
  RngState rng(31);
  const SymMatrix a = SymMatrix::diagonal({1.0, 4.0, 9.0});
  const Vector target = {1.0, -2.0, 0.5};
  const ObjectiveFunction f = quadratic_bowl(a, target);
  const PgdParams params = compute_pgd_params(9.0, 1.0, 0.5, 0.5, 0.1, 50.0, 3);

  const PgdliResult result =
      run_pgdli(f, {4.0, 4.0, -4.0}, params, f.regularity->beta, rng, 1e-9, 2000000);
  EXPECT_LE(distance(result.output, target), 1e-9);

  double prev = std::numeric_limits<double>::infinity();
  for (const Vector& x : result.gd_trace.iterates) {
    const double d = distance(x, target);
    EXPECT_LE(d, prev + 1e-15);
    prev = d;
  }
}

// ---------------------------------------------------------------------------
// compute_scale_units
// ---------------------------------------------------------------------------

TEST(ScaleUnitsTest, UnitInputs) {
  // dim * kappa / delta = e so the log term is exactly 1.
  const double delta = 1.0 / std::exp(1.0);
  const ScaleUnits u = compute_scale_units(1.0, 1.0, 1.0, 1.0, delta, 1);
  EXPECT_NEAR(u.f_unit, 1.0, 1e-12);
  EXPECT_NEAR(u.g_unit, 1.0, 1e-12);
  EXPECT_NEAR(u.s_unit, 1.0, 1e-12);
  EXPECT_NEAR(u.t_unit, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(u.kappa, 1.0);
}

TEST(ScaleUnitsTest, UnitsIdentityHoldsOnRandomInputs) {
  RngState rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const double gamma = 0.1 + rng.next_double();
    const double ell = gamma * (1.0 + 9.0 * rng.next_double());
    const double rho = 0.1 + 2.0 * rng.next_double();
    const double eta = (0.1 + 0.9 * rng.next_double()) / ell;
    const int dim = 1 + static_cast<int>(rng.next_u64() % 100);
    const double upper = dim * (ell / gamma) / std::exp(1.0);
    const double delta = upper * (0.05 + 0.9 * rng.next_double());
    const ScaleUnits u = compute_scale_units(ell, rho, gamma, eta, delta, dim);

    EXPECT_NEAR(std::sqrt(u.f_unit * u.log_term / gamma), u.s_unit, 1e-10 * u.s_unit);
    EXPECT_NEAR(u.g_unit * u.log_term / gamma, u.s_unit, 1e-10 * u.s_unit);
    EXPECT_GE(u.kappa, 1.0);
    EXPECT_GE(u.log_term, 1.0 - 1e-12);
  }
}

TEST(ScaleUnitsTest, RejectsKappaBelowOne) {
  EXPECT_THROW(compute_scale_units(1.0, 1.0, 2.0, 0.5, 0.1, 4), invalid_parameter_error);
}

TEST(ScaleUnitsTest, RejectsDeltaOutsideRange) {
  // Upper limit is dim * kappa / e.
  const double upper = 4.0 * 1.0 / std::exp(1.0);
  EXPECT_NO_THROW(compute_scale_units(1.0, 1.0, 1.0, 0.5, upper * 0.999, 4));
  EXPECT_THROW(compute_scale_units(1.0, 1.0, 1.0, 0.5, upper * 1.001, 4),
               invalid_parameter_error);
  EXPECT_THROW(compute_scale_units(1.0, 1.0, 1.0, 0.5, 0.0, 4), invalid_parameter_error);
}
