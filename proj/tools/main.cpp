// Experiment runner CLI. Each subcommand is a scenario; the config file
// supplies the problem, parameters, seeds, and output directory, and flags
// override the file. Exit codes: 0 done, 2 bad config, 3 divergence
// (verify-geometry additionally exits 1 when a suite reports violations).

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "pgdlab/experiment.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string seed_range;
  std::string out_dir;
  bool derive_params = false;
};

void attach_common(CLI::App* sub, CliArgs& args) {
  sub->add_option("--config", args.config_path, "JSON experiment config")->required();
  sub->add_option("--seed-range", args.seed_range, "inclusive A..B, overrides config seeds");
  sub->add_option("--out", args.out_dir, "output directory, overrides config");
  sub->add_flag("--derive-params", args.derive_params,
                "treat params fields as inputs to the threshold formulas");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pgdlab: perturbed gradient descent experiments"};
  app.require_subcommand(1);

  CliArgs args;
  const char* scenario_names[] = {"gd",           "pgd",           "pgdli",
                                  "mf-demo",      "stuck-volume",  "coupled-width",
                                  "escape-stats", "verify-geometry"};
  const char* descriptions[] = {
      "plain gradient descent",
      "perturbed gradient descent",
      "perturbed descent with a local-improvement phase",
      "matrix factorization demo with derived parameters",
      "Monte Carlo stuck-region volume estimate",
      "coupled-pair escape experiment",
      "escape-time statistics",
      "sampled landscape inequality suites"};
  for (int i = 0; i < 8; ++i) attach_common(app.add_subcommand(scenario_names[i], descriptions[i]), args);

  CLI11_PARSE(app, argc, argv);
  const std::string scenario = app.get_subcommands().front()->get_name();

  try {
    std::ifstream in(args.config_path);
    if (!in) throw pgdlab::config_error("cannot open config " + args.config_path);
    pgdlab::json raw;
    try {
      in >> raw;
    } catch (const pgdlab::json::exception& e) {
      throw pgdlab::config_error(std::string("bad config JSON: ") + e.what());
    }
    raw["scenario"] = scenario;  // subcommand wins over the file
    pgdlab::ExperimentConfig cfg = pgdlab::ExperimentConfig::from_json(raw);
    if (!args.seed_range.empty()) cfg.set_seed_range(args.seed_range);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.derive_params && !cfg.params.contains("derive"))
      cfg.params = pgdlab::json{{"derive", cfg.params}};

    const pgdlab::SummaryReport summary = pgdlab::run_experiment(cfg);
    std::printf("%s: %zu seed(s), success rate %.3f, %.2fs\n", scenario.c_str(),
                summary.outcomes.size(), summary.success_rate, summary.wall_clock_seconds);
    std::printf("outputs in %s\n", cfg.out_dir.c_str());
    if (cfg.scenario == pgdlab::Scenario::verify_geometry && summary.success_rate < 1.0)
      return 1;
    return 0;
  } catch (const pgdlab::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const pgdlab::divergence_error& e) {
    std::fprintf(stderr, "divergence: %s (iteration %ld)\n", e.what(), e.iteration);
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
