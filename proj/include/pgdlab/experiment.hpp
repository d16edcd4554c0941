#pragma once

// Configuration-driven experiment runner: builds problems from JSON specs,
// derives or accepts algorithm parameters, executes a scenario per seed,
// and writes trace CSVs plus a JSON summary. Outputs are deterministic
// given the config (the summary wall-clock field aside).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgdlab/errors.hpp"
#include "pgdlab/geometry.hpp"
#include "pgdlab/linalg.hpp"
#include "pgdlab/objective.hpp"
#include "pgdlab/pgd.hpp"
#include "pgdlab/problems.hpp"

namespace pgdlab {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

enum class Scenario {
  gd,
  pgd,
  pgdli,
  mf_demo,
  stuck_volume,
  coupled_width,
  escape_stats,
  verify_geometry,
};

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::gd: return "gd";
    case Scenario::pgd: return "pgd";
    case Scenario::pgdli: return "pgdli";
    case Scenario::mf_demo: return "mf-demo";
    case Scenario::stuck_volume: return "stuck-volume";
    case Scenario::coupled_width: return "coupled-width";
    case Scenario::escape_stats: return "escape-stats";
    case Scenario::verify_geometry: return "verify-geometry";
  }
  return "unknown";
}

inline Scenario scenario_from_string(const std::string& name) {
  if (name == "gd") return Scenario::gd;
  if (name == "pgd") return Scenario::pgd;
  if (name == "pgdli") return Scenario::pgdli;
  if (name == "mf-demo") return Scenario::mf_demo;
  if (name == "stuck-volume") return Scenario::stuck_volume;
  if (name == "coupled-width") return Scenario::coupled_width;
  if (name == "escape-stats") return Scenario::escape_stats;
  if (name == "verify-geometry") return Scenario::verify_geometry;
  throw config_error("unknown scenario: " + name);
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  Scenario scenario = Scenario::gd;
  json problem;          // inline spec or {"file": path}
  json params;           // explicit threshold fields or {"derive": {...}}
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  json options;          // scenario-specific knobs

  static ExperimentConfig from_json(const json& j) {
    ExperimentConfig cfg;
    if (!j.contains("scenario")) throw config_error("config: missing scenario");
    cfg.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    cfg.problem = j.value("problem", json::object());
    cfg.params = j.value("params", json::object());
    cfg.options = j.value("options", json::object());
    cfg.out_dir = j.value("out", std::string{});
    if (j.contains("seeds")) {
      cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } else if (j.contains("seed_range")) {
      cfg.set_seed_range(j.at("seed_range").get<std::string>());
    }
    return cfg;
  }

  static ExperimentConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw config_error(std::string("config: bad JSON: ") + e.what());
    }
    return from_json(j);
  }

  // "A..B" inclusive.
  void set_seed_range(const std::string& range) {
    const auto sep = range.find("..");
    if (sep == std::string::npos) throw config_error("seed range: expected A..B");
    try {
      const std::uint64_t lo = std::stoull(range.substr(0, sep));
      const std::uint64_t hi = std::stoull(range.substr(sep + 2));
      if (hi < lo) throw config_error("seed range: B < A");
      seeds.clear();
      for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    } catch (const std::invalid_argument&) {
      throw config_error("seed range: not a number in " + range);
    } catch (const std::out_of_range&) {
      throw config_error("seed range: out of range in " + range);
    }
  }

  json to_json() const {
    return json{{"scenario", to_string(scenario)}, {"problem", problem},  {"params", params},
                {"seeds", seeds},                  {"options", options},  {"out", out_dir}};
  }
};

// ---------------------------------------------------------------------------
// Problem construction from JSON specs
// ---------------------------------------------------------------------------

struct BuiltProblem {
  ObjectiveFunction objective;
  std::optional<MatrixFactorizationProblem> mf;
  std::string type;
  json echo;
};

inline BuiltProblem build_problem(json spec) {
  try {
    if (spec.contains("file")) {
      std::ifstream in(spec.at("file").get<std::string>());
      if (!in) throw config_error("problem: cannot open " + spec.at("file").get<std::string>());
      json loaded;
      in >> loaded;
      spec = loaded;
    }
    if (!spec.contains("type")) throw config_error("problem: missing type");
    const std::string type = spec.at("type").get<std::string>();

    BuiltProblem built;
    built.type = type;
    built.echo = spec;
    if (type == "matrix-factorization") {
      built.mf = MatrixFactorizationProblem::from_json(spec);
      if (spec.contains("gamma_bound"))
        built.mf->set_gamma_bound(spec.at("gamma_bound").get<double>());
      built.objective = built.mf->objective();
    } else if (type == "quadratic-saddle") {
      const Vector diag = spec.at("diag").get<Vector>();
      const double quartic = spec.value("quartic_coeff", 0.0);
      const double radius =
          spec.value("domain_radius", std::numeric_limits<double>::infinity());
      built.objective = QuadraticSaddle(SymMatrix::diagonal(diag), quartic, radius).objective();
    } else if (type == "quadratic-bowl") {
      if (spec.contains("diag")) {
        const Vector diag = spec.at("diag").get<Vector>();
        Vector target(diag.size(), 0.0);
        if (spec.contains("target")) target = spec.at("target").get<Vector>();
        built.objective = quadratic_bowl_problem(SymMatrix::diagonal(diag), target);
      } else {
        const int d = spec.at("dim").get<int>();
        if (d < 1 || d > 64) throw config_error("quadratic-bowl: dim must be in [1, 64]");
        const double alpha = spec.value("alpha", 1.0);
        const double ell = spec.value("ell", 10.0);
        RngState rng(spec.value("seed", 0ull));
        Matrix gauss(d, d);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) gauss(i, j) = rng.next_gaussian();
        const Matrix q = small_svd(gauss).u;
        Vector spectrum(static_cast<std::size_t>(d));
        spectrum[0] = alpha;
        if (d > 1) spectrum[static_cast<std::size_t>(d - 1)] = ell;
        for (int i = 1; i + 1 < d; ++i)
          spectrum[static_cast<std::size_t>(i)] = alpha + (ell - alpha) * rng.next_double();
        Matrix scaled_qt = q.transposed();
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) scaled_qt(i, j) *= spectrum[static_cast<std::size_t>(i)];
        const Vector target =
            spec.contains("target") ? spec.at("target").get<Vector>() : sample_ball(d, 3.0, rng);
        built.objective = quadratic_bowl_problem(SymMatrix{q * scaled_qt}, target);
      }
    } else {
      throw config_error("problem: unknown type " + type);
    }
    if (built.objective.dim < 1) throw config_error("problem: dimension must be positive");
    return built;
  } catch (const json::exception& e) {
    throw config_error(std::string("problem spec: ") + e.what());
  } catch (const invalid_parameter_error& e) {
    throw config_error(std::string("problem spec: ") + e.what());
  } catch (const invalid_input_error& e) {
    throw config_error(std::string("problem spec: ") + e.what());
  }
}

// Thresholds either spelled out or derived from (epsilon, c, delta,
// delta_f) and the objective's declared profile. mf-demo ignores this and
// always uses the factorization-specific derivation.
inline PgdParams build_params(const json& spec, const BuiltProblem& problem) {
  try {
    if (spec.contains("derive")) {
      const json& d = spec.at("derive");
      return compute_pgd_params(problem.objective.profile.ell, problem.objective.profile.rho,
                                d.at("epsilon").get<double>(), d.value("c", 0.5),
                                d.at("delta").get<double>(), d.at("delta_f").get<double>(),
                                problem.objective.dim);
    }
    PgdParams p;
    p.chi = spec.at("chi").get<double>();
    p.eta = spec.at("eta").get<double>();
    p.r = spec.at("r").get<double>();
    p.g_thres = spec.at("g_thres").get<double>();
    p.f_thres = spec.at("f_thres").get<double>();
    p.t_thres = spec.at("t_thres").get<long>();
    p.c = spec.value("c", 0.5);
    p.delta = spec.value("delta", 0.1);
    p.delta_f = spec.value("delta_f", 1.0);
    p.epsilon = spec.value("epsilon", 0.1);
    return p;
  } catch (const json::exception& e) {
    throw config_error(std::string("params spec: ") + e.what());
  } catch (const invalid_parameter_error& e) {
    throw config_error(std::string("params spec: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Output writers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

// RFC 4180: comma separated, CRLF line endings. Columns t, f, grad_norm,
// perturbed. Rows thinned by `stride` always keep the final row.
inline void write_trace_csv(const std::string& path, const RunTrace& trace, long stride = 1) {
  if (stride < 1) throw invalid_parameter_error("write_trace_csv: stride must be >= 1");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write " + path);
  out << "t,f,grad_norm,perturbed\r\n";
  std::size_t next_event = 0;
  const long rows = static_cast<long>(trace.values.size());
  for (long t = 0; t < rows; ++t) {
    while (next_event < trace.perturbation_events.size() &&
           trace.perturbation_events[next_event].iteration < t)
      ++next_event;
    const bool perturbed = next_event < trace.perturbation_events.size() &&
                           trace.perturbation_events[next_event].iteration == t;
    if (t % stride != 0 && t != rows - 1 && !perturbed) continue;
    out << t << ',' << detail::format_double(trace.values[static_cast<std::size_t>(t)]) << ','
        << detail::format_double(trace.grad_norms[static_cast<std::size_t>(t)]) << ','
        << (perturbed ? 1 : 0) << "\r\n";
  }
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Geometry verification (sampled landscape inequalities for a
// factorization instance)
// ---------------------------------------------------------------------------

struct GeometryOverrides {
  std::optional<double> ell;    // gradient-Lipschitz constant under test
  std::optional<double> rho;    // Hessian-Lipschitz constant under test
  std::optional<double> theta;
  std::optional<double> gamma;
  std::optional<double> zeta;
  std::optional<double> alpha;
  std::optional<double> beta;
};

struct GeometrySuiteResult {
  std::string name;
  long samples = 0;
  long violations = 0;
  json witnesses = json::array();  // up to 10 violating samples
};

struct GeometryReport {
  bool passed = false;
  std::vector<GeometrySuiteResult> suites;

  json to_json() const {
    json out{{"passed", passed}, {"suites", json::array()}};
    for (const auto& s : suites)
      out["suites"].push_back(json{{"name", s.name},
                                   {"samples", s.samples},
                                   {"violations", s.violations},
                                   {"witnesses", s.witnesses}});
    return out;
  }
};

namespace detail {

inline void add_witness(GeometrySuiteResult& suite, json witness) {
  ++suite.violations;
  if (suite.witnesses.size() < 10) suite.witnesses.push_back(std::move(witness));
}

inline Matrix sample_mf_factor(const MatrixFactorizationProblem& p, double spectral_limit,
                               RngState& rng) {
  Matrix u(p.dim(), p.rank());
  for (double& x : u.data()) x = rng.next_gaussian();
  const double s = spectral_norm(u);
  const double target = spectral_limit * rng.next_double();
  if (s > 0.0)
    for (double& x : u.data()) x *= target / s;
  return u;
}

}  // namespace detail

// Three sampled suites: gradient/Hessian Lipschitz bounds inside the norm
// region, the strict-saddle trichotomy, and the regularity inequality near
// the solution set. Any violating sample is reported with its witness data.
inline GeometryReport verify_mf_geometry(const MatrixFactorizationProblem& p, long n_samples,
                                         std::uint64_t seed,
                                         const GeometryOverrides& overrides = {}) {
  if (n_samples < 1) throw config_error("verify-geometry: need samples");
  const auto constants = p.constants();
  const double gamma_bound = p.gamma_bound();
  const double ell = overrides.ell.value_or(constants.smoothness.ell);
  const double rho = overrides.rho.value_or(constants.smoothness.rho);
  const double theta = overrides.theta.value_or(constants.saddle.theta);
  const double gamma = overrides.gamma.value_or(constants.saddle.gamma);
  const double zeta = overrides.zeta.value_or(constants.saddle.zeta);
  const double alpha = overrides.alpha.value_or(constants.regularity.alpha);
  const double beta = overrides.beta.value_or(constants.regularity.beta);

  const ObjectiveFunction f = p.objective();
  const double limit = std::sqrt(gamma_bound) * 0.999;
  const int d = p.dim();
  const int r = p.rank();

  GeometryReport report;
  report.suites.resize(3);

  // Suite 1: Lipschitz bounds for gradient differences and Hessian
  // quadratic forms over sampled pairs (half of them tight nearby pairs).
  {
    GeometrySuiteResult& suite = report.suites[0];
    suite.name = "smoothness";
    suite.samples = n_samples;
    RngState rng = RngState(seed).derive(1);
    for (long i = 0; i < n_samples; ++i) {
      const Matrix u = detail::sample_mf_factor(p, limit, rng);
      Matrix v;
      if (i % 2 == 0) {
        v = detail::sample_mf_factor(p, limit, rng);
      } else {
        v = u;
        Matrix step(d, r);
        for (double& x : step.data()) x = rng.next_gaussian();
        const double s = 1e-4 / std::max(1e-12, frobenius_norm(step));
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < r; ++b) v(a, b) += s * step(a, b);
        if (spectral_norm(v) >= limit) v = u;  // keep the pair inside the region
      }
      const double sep = frobenius_norm(u - v);
      if (sep == 0.0) continue;
      const double grad_gap = frobenius_norm(p.gradient(u) - p.gradient(v));
      bool bad = grad_gap > ell * sep + 1e-9;
      Matrix z(d, r);
      for (double& x : z.data()) x = rng.next_gaussian();
      const double zn = frobenius_norm(z);
      for (double& x : z.data()) x /= zn;
      const double hess_gap = std::abs(p.hessian_quadform(u, z) - p.hessian_quadform(v, z));
      bad = bad || hess_gap > rho * sep + 1e-9;
      if (bad)
        detail::add_witness(suite, json{{"sample", i},
                                        {"separation", sep},
                                        {"gradient_gap", grad_gap},
                                        {"gradient_bound", ell * sep},
                                        {"hessian_gap", hess_gap},
                                        {"hessian_bound", rho * sep}});
    }
  }

  // Suite 2: at every sampled point at least one of {large gradient,
  // curvature below -gamma, within zeta of the solutions} holds.
  {
    GeometrySuiteResult& suite = report.suites[1];
    suite.name = "strict-saddle";
    suite.samples = n_samples;
    RngState rng = RngState(seed).derive(2);
    for (long i = 0; i < n_samples; ++i) {
      const Matrix u = detail::sample_mf_factor(p, limit, rng);
      const double grad_norm = frobenius_norm(p.gradient(u));
      if (grad_norm >= theta) continue;
      const double dist = p.distance_to_solutions(u).distance;
      if (dist <= zeta) continue;
      const double min_eig =
          sym_eigen(dense_hessian(f, p.flatten(u))).values.front();
      if (min_eig <= -gamma + 1e-9) continue;
      detail::add_witness(suite, json{{"sample", i},
                                      {"gradient_norm", grad_norm},
                                      {"distance", dist},
                                      {"min_hessian_eig", min_eig}});
    }
  }

  // Suite 3: regularity inequality inside the zeta-neighborhood.
  {
    GeometrySuiteResult& suite = report.suites[2];
    suite.name = "regularity";
    suite.samples = n_samples;
    RngState rng = RngState(seed).derive(3);
    for (long i = 0; i < n_samples; ++i) {
      Matrix rot(r, r);
      for (double& x : rot.data()) x = rng.next_gaussian();
      const Svd svd = small_svd(rot);
      Matrix u = p.v_star() * times_transpose(svd.u, svd.v);
      Matrix step(d, r);
      for (double& x : step.data()) x = rng.next_gaussian();
      const double radius = zeta * rng.next_double();
      const double s = radius / std::max(1e-12, frobenius_norm(step));
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < r; ++b) u(a, b) += s * step(a, b);

      const auto alignment = p.distance_to_solutions(u);
      if (alignment.distance > zeta) continue;  // measure-zero safety
      const Matrix grad = p.gradient(u);
      const double inner = frobenius_dot(grad, u - alignment.aligned);
      const double rhs = 0.5 * alpha * alignment.distance * alignment.distance +
                         0.5 / beta * frobenius_dot(grad, grad);
      if (inner >= rhs - 1e-9) continue;
      detail::add_witness(suite, json{{"sample", i},
                                      {"inner_product", inner},
                                      {"required", rhs},
                                      {"distance", alignment.distance}});
    }
  }

  report.passed = true;
  for (const auto& s : report.suites) report.passed = report.passed && s.violations == 0;
  return report;
}

// ---------------------------------------------------------------------------
// Summary report
// ---------------------------------------------------------------------------

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool success = false;
  long iterations = 0;
  double final_value = 0.0;
  double final_grad_norm = 0.0;
  double final_distance = std::numeric_limits<double>::quiet_NaN();
  std::optional<StationarityReport> report;

  json to_json() const {
    json j{{"seed", seed},
           {"success", success},
           {"iterations", iterations},
           {"final_value", final_value},
           {"final_grad_norm", final_grad_norm}};
    if (std::isfinite(final_distance)) j["final_distance"] = final_distance;
    if (report) {
      j["stationarity"] = json{{"grad_norm", report->grad_norm},
                               {"min_hessian_eig", report->min_hessian_eig},
                               {"is_eps_fosp", report->is_eps_fosp},
                               {"is_eps_sosp", report->is_eps_sosp},
                               {"epsilon", report->epsilon},
                               {"rho", report->rho},
                               {"outside_domain", report->outside_domain}};
    }
    return j;
  }
};

struct SummaryReport {
  std::string scenario;
  std::vector<SeedOutcome> outcomes;
  double success_rate = 0.0;
  double wall_clock_seconds = 0.0;
  json extra;  // scenario-specific aggregates

  json to_json() const {
    json per_seed = json::array();
    for (const auto& o : outcomes) per_seed.push_back(o.to_json());
    json j{{"scenario", scenario},
           {"success_rate", success_rate},
           {"seeds", outcomes.size()},
           {"per_seed", per_seed},
           {"wall_clock_seconds", wall_clock_seconds}};
    if (!extra.is_null() && !extra.empty()) j["extra"] = extra;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Scenario execution
// ---------------------------------------------------------------------------

namespace detail {

inline Vector starting_point(const json& options, const ObjectiveFunction& f, RngState& rng) {
  if (options.contains("x0")) {
    Vector x0 = options.at("x0").get<Vector>();
    if (static_cast<int>(x0.size()) != f.dim) throw config_error("x0: dimension mismatch");
    return x0;
  }
  const double radius = options.value("x0_radius", 0.0);
  if (radius > 0.0) return sample_ball(f.dim, radius, rng);
  return Vector(static_cast<std::size_t>(f.dim), 0.0);
}

inline std::string trace_path(const std::string& out_dir, std::uint64_t seed) {
  return out_dir + "/trace-" + std::to_string(seed) + ".csv";
}

// Concatenate the two phases for CSV output; the second phase restarts
// from the returned point, so its rows are appended with shifted indices.
inline RunTrace concatenate(const RunTrace& a, const RunTrace& b) {
  RunTrace joined = a;
  joined.values.insert(joined.values.end(), b.values.begin(), b.values.end());
  joined.grad_norms.insert(joined.grad_norms.end(), b.grad_norms.begin(), b.grad_norms.end());
  const long offset = static_cast<long>(a.values.size());
  for (const auto& e : b.perturbation_events) {
    PerturbationEvent shifted = e;
    shifted.iteration += offset;
    joined.perturbation_events.push_back(std::move(shifted));
  }
  joined.termination = b.termination;
  return joined;
}

}  // namespace detail

inline SummaryReport run_experiment(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();

  SummaryReport summary;
  summary.scenario = to_string(cfg.scenario);

  if (cfg.out_dir.empty()) throw config_error("config: missing output directory");
  std::filesystem::create_directories(cfg.out_dir);
  write_json(cfg.out_dir + "/config-echo.json", cfg.to_json());

  const BuiltProblem problem = build_problem(cfg.problem);
  const ObjectiveFunction& f = problem.objective;
  const json& options = cfg.options;
  const long stride = options.value("trace_stride", 1L);

  const bool seedless = cfg.scenario == Scenario::verify_geometry;
  if (!seedless && cfg.seeds.empty()) throw config_error("config: empty seed list");

  switch (cfg.scenario) {
    case Scenario::gd: {
      const double eta = options.value("eta", 1.0 / f.profile.ell);
      GdStop stop;
      stop.max_iter = options.value("max_iter", 1000000L);
      stop.grad_tol = options.value("grad_tol", 0.0);
      if (options.contains("target")) {
        stop.target_point = options.at("target").get<Vector>();
        stop.target_tol = options.value("target_tol", 1e-6);
      } else if (f.distance_to_solutions && options.contains("target_tol")) {
        stop.distance_oracle = f.distance_to_solutions;
        stop.distance_tol = options.at("target_tol").get<double>();
      }
      for (std::uint64_t seed : cfg.seeds) {
        RngState rng(seed);
        const Vector x0 = detail::starting_point(options, f, rng);
        const RunTrace trace = run_gd(f, x0, eta, stop);
        SeedOutcome outcome;
        outcome.seed = seed;
        outcome.iterations = trace.iterations();
        outcome.final_value = trace.values.back();
        outcome.final_grad_norm = trace.grad_norms.back();
        outcome.success = trace.termination == Termination::target_reached;
        if (f.distance_to_solutions)
          outcome.final_distance = f.distance_to_solutions(trace.final_point);
        write_trace_csv(detail::trace_path(cfg.out_dir, seed), trace, stride);
        summary.outcomes.push_back(std::move(outcome));
      }
      break;
    }

    case Scenario::pgd: {
      const PgdParams params = build_params(cfg.params, problem);
      const long max_iter = options.value(
          "max_iter", static_cast<long>(std::min(1e9, 10.0 * pgd_iteration_bound(params))));
      for (std::uint64_t seed : cfg.seeds) {
        RngState rng(seed);
        const Vector x0 = detail::starting_point(options, f, rng);
        const PgdResult result = run_pgd(f, x0, params, rng, max_iter);
        SeedOutcome outcome;
        outcome.seed = seed;
        outcome.iterations = result.trace.iterations();
        outcome.final_value = f.value(result.output);
        outcome.final_grad_norm = norm(f.gradient(result.output));
        outcome.report = classify_point(f, result.output, params.epsilon);
        outcome.success = outcome.report->is_eps_sosp;
        if (f.distance_to_solutions)
          outcome.final_distance = f.distance_to_solutions(result.output);
        write_trace_csv(detail::trace_path(cfg.out_dir, seed), result.trace, stride);
        summary.outcomes.push_back(std::move(outcome));
      }
      break;
    }

    case Scenario::pgdli:
    case Scenario::mf_demo: {
      PgdParams params;
      double beta = 0.0;
      double eps_final = options.value("success_distance", 0.0);
      if (cfg.scenario == Scenario::mf_demo || options.value("derive_run_params", false)) {
        if (!problem.mf) throw config_error("mf-demo: needs a matrix-factorization problem");
        const double c = cfg.params.value("c", 0.5);
        const double delta = cfg.params.value("delta", 0.05);
        const Matrix u0 = problem.mf->unflatten(
            options.contains("x0") ? options.at("x0").get<Vector>()
                                   : Vector(static_cast<std::size_t>(f.dim), 0.0));
        const auto tp = problem.mf->derive_run_params(u0, c, delta);
        params = tp.pgd;
        beta = tp.beta;
        if (eps_final <= 0.0) eps_final = 1e-3 * std::sqrt(problem.mf->sigmar());
      } else {
        params = build_params(cfg.params, problem);
        if (!f.regularity) throw config_error("pgdli: objective lacks regularity parameters");
        beta = options.value("beta", f.regularity->beta);
        if (eps_final <= 0.0) eps_final = options.value("eps_final", 1e-3);
      }
      const long max_iter = options.value(
          "max_iter", static_cast<long>(std::min(1e9, 10.0 * pgd_iteration_bound(params))));

      for (std::uint64_t seed : cfg.seeds) {
        RngState rng(seed);
        const Vector x0 = detail::starting_point(options, f, rng);
        const PgdliResult result = run_pgdli(f, x0, params, beta, rng, eps_final, max_iter);
        SeedOutcome outcome;
        outcome.seed = seed;
        const RunTrace joined = detail::concatenate(result.pgd_trace, result.gd_trace);
        outcome.iterations = static_cast<long>(joined.values.size()) - 1;
        outcome.final_value = f.value(result.output);
        outcome.final_grad_norm = norm(f.gradient(result.output));
        if (f.distance_to_solutions) {
          outcome.final_distance = f.distance_to_solutions(result.output);
          outcome.success = outcome.final_distance <= eps_final;
        } else {
          outcome.report = classify_point(f, result.output, params.epsilon);
          outcome.success = outcome.report->is_eps_sosp;
        }
        write_trace_csv(detail::trace_path(cfg.out_dir, seed), joined, stride);
        summary.outcomes.push_back(std::move(outcome));
      }
      summary.extra = json{{"eps_final", eps_final},
                           {"eta_phase1", params.eta},
                           {"eta_phase2", 1.0 / beta},
                           {"t_thres", params.t_thres}};
      break;
    }

    case Scenario::stuck_volume: {
      const PgdParams params = build_params(cfg.params, problem);
      const long n_samples = options.value("n_samples", 10000L);
      json estimates = json::array();
      for (std::uint64_t seed : cfg.seeds) {
        RngState rng(seed);
        const Vector base = detail::starting_point(options, f, rng);
        // Point cloud along (e1 component, residual norm) for plotting.
        const Vector e1 = min_curvature_direction(f, base);
        std::ofstream cloud(detail::trace_path(cfg.out_dir, seed), std::ios::binary);
        cloud << "e1_component,orthogonal_norm,decrease,stuck\r\n";
        const auto on_sample = [&](long, const Vector& x0, double decrease, bool is_stuck) {
          const Vector offset = sub(x0, base);
          const double along = dot(offset, e1);
          const double ortho = std::sqrt(std::max(0.0, norm_sq(offset) - along * along));
          cloud << detail::format_double(along) << ',' << detail::format_double(ortho) << ','
                << detail::format_double(decrease) << ',' << (is_stuck ? 1 : 0) << "\r\n";
        };
        const StuckRegionEstimate estimate =
            estimate_stuck_volume(f, base, params, n_samples, rng, 0, on_sample);
        SeedOutcome outcome;
        outcome.seed = seed;
        outcome.iterations = n_samples;
        outcome.final_value = estimate.fraction;
        outcome.success = estimate.wilson_upper <= params.delta;
        summary.outcomes.push_back(outcome);
        estimates.push_back(json{{"seed", seed},
                                 {"samples", estimate.samples},
                                 {"stuck", estimate.stuck_count},
                                 {"fraction", estimate.fraction},
                                 {"wilson_upper", estimate.wilson_upper},
                                 {"min_curvature", estimate.min_curvature},
                                 {"delta", estimate.delta_bound}});
      }
      summary.extra = json{{"estimates", estimates}};
      break;
    }

    case Scenario::coupled_width: {
      const PgdParams params = build_params(cfg.params, problem);
      const long n_pairs = options.value("n_pairs", 10000L);
      json aggregates = json::array();
      for (std::uint64_t seed : cfg.seeds) {
        RngState rng(seed);
        const Vector base = detail::starting_point(options, f, rng);
        const double gamma = -sym_eigen(dense_hessian(f, base)).values.front();
        if (gamma <= 0.0)
          throw precondition_error("coupled-width: base point lacks negative curvature");
        const ScaleUnits units =
            compute_scale_units(f.profile.ell, f.profile.rho, gamma, params.eta,
                                std::min(params.delta, f.dim * f.profile.ell / gamma /
                                                           std::exp(1.0) * 0.999),
                                f.dim);
        CoupledSpec spec;
        spec.base_point = base;
        spec.radius = params.r;
        spec.e1 = min_curvature_direction(f, base);
        spec.horizon = options.value("horizon", params.t_thres);
        spec.decrease_target =
            options.value("decrease_target_f_multiples", params.f_thres / units.f_unit);
        spec.mu = options.value(
            "mu", units.delta / (2.0 * std::sqrt(static_cast<double>(f.dim))));

        std::ofstream pairs_csv(detail::trace_path(cfg.out_dir, seed), std::ios::binary);
        pairs_csv << "pair,decrease_u,decrease_w,escaped_u,escaped_w\r\n";
        long both_stuck = 0;
        for (long i = 0; i < n_pairs; ++i) {
          const CoupledEscapeResult result = coupled_escape_test(f, spec, units, rng);
          if (!result.escaped_u && !result.escaped_w) ++both_stuck;
          pairs_csv << i << ',' << detail::format_double(result.decrease_u) << ','
                    << detail::format_double(result.decrease_w) << ','
                    << (result.escaped_u ? 1 : 0) << ',' << (result.escaped_w ? 1 : 0)
                    << "\r\n";
        }
        SeedOutcome outcome;
        outcome.seed = seed;
        outcome.iterations = n_pairs;
        outcome.final_value = static_cast<double>(both_stuck);
        outcome.success = both_stuck == 0;
        summary.outcomes.push_back(outcome);
        aggregates.push_back(json{{"seed", seed},
                                  {"pairs", n_pairs},
                                  {"both_stuck", both_stuck},
                                  {"mu", spec.mu},
                                  {"horizon", spec.horizon}});
      }
      summary.extra = json{{"pairs", aggregates}};
      break;
    }

    case Scenario::escape_stats: {
      const PgdParams params = build_params(cfg.params, problem);
      const long n_trials = options.value("n_trials", 1000L);
      json aggregates = json::array();
      for (std::uint64_t seed : cfg.seeds) {
        RngState rng(seed);
        const Vector base = detail::starting_point(options, f, rng);
        const EscapeTimeStats stats = escape_time_stats(f, base, params, n_trials, rng);
        std::ofstream hist(detail::trace_path(cfg.out_dir, seed), std::ios::binary);
        hist << "steps,count\r\n";
        for (const auto& [bin, count] : stats.histogram(options.value("bin_width", 1L)))
          hist << bin << ',' << count << "\r\n";
        SeedOutcome outcome;
        outcome.seed = seed;
        outcome.iterations = n_trials;
        outcome.final_value = stats.median_steps();
        outcome.success = stats.censored_fraction() <= params.delta;
        summary.outcomes.push_back(outcome);
        aggregates.push_back(json{{"seed", seed},
                                  {"trials", stats.trials},
                                  {"censored", stats.censored},
                                  {"median_steps", stats.median_steps()}});
      }
      summary.extra = json{{"escape_times", aggregates}};
      break;
    }

    case Scenario::verify_geometry: {
      if (!problem.mf) throw config_error("verify-geometry: needs a matrix-factorization problem");
      GeometryOverrides overrides;
      if (options.contains("ell")) overrides.ell = options.at("ell").get<double>();
      if (options.contains("rho")) overrides.rho = options.at("rho").get<double>();
      if (options.contains("theta")) overrides.theta = options.at("theta").get<double>();
      if (options.contains("gamma")) overrides.gamma = options.at("gamma").get<double>();
      if (options.contains("zeta")) overrides.zeta = options.at("zeta").get<double>();
      if (options.contains("alpha")) overrides.alpha = options.at("alpha").get<double>();
      if (options.contains("beta")) overrides.beta = options.at("beta").get<double>();
      const long n_samples = options.value("n_samples", 1000L);
      const std::uint64_t seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
      const GeometryReport report = verify_mf_geometry(*problem.mf, n_samples, seed, overrides);
      write_json(cfg.out_dir + "/geometry-report.json", report.to_json());
      SeedOutcome outcome;
      outcome.seed = seed;
      outcome.iterations = n_samples;
      outcome.success = report.passed;
      summary.outcomes.push_back(outcome);
      summary.extra = report.to_json();
      break;
    }
  }

  long successes = 0;
  for (const auto& o : summary.outcomes) successes += o.success ? 1 : 0;
  summary.success_rate =
      summary.outcomes.empty()
          ? 0.0
          : static_cast<double>(successes) / static_cast<double>(summary.outcomes.size());
  summary.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  write_json(cfg.out_dir + "/summary.json", summary.to_json());
  return summary;
}

}  // namespace pgdlab
