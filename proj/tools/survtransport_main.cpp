#include <iostream>
#include <utility>

#include "CLI11.hpp"
#include "survtransport/cli.hpp"

int main(int argc, char** argv) {
  using survtransport::cli::CommandLine;
  CLI::App app{"Transport trial survival effects to an external population"};
  app.require_subcommand(1);

  CommandLine cmd;
  std::string config, out, estimators, arms;
  std::uint64_t seed = 0;
  int boot = 0;
  double horizon = 0.0;

  const std::pair<const char*, const char*> commands[] = {
      {"diagnose-ph", "Per-arm Schoenfeld residual tests of proportional hazards"},
      {"emulate", "Write an emulated external covariate sample"},
      {"transport", "Estimate transported survival curves and the treatment effect"},
      {"bootstrap", "Transport with bootstrap standard errors and bands"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Run configuration (JSON)")->required();
    sub->add_option("--out", out, "Output directory (overrides SURVTRANSPORT_OUT and the config)");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--boot", boot, "Bootstrap replicates");
    sub->add_option("--estimators", estimators, "Comma list of estimator tags");
    sub->add_option("--horizon", horizon, "Landmark time");
    sub->add_option("--arms", arms, "Arm labels: experimental,control");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (CLI::App* sub : app.get_subcommands()) {
    cmd.command = sub->get_name();
    cmd.config = config;
    if (sub->count("--out")) cmd.out = out;
    if (sub->count("--seed")) cmd.seed = seed;
    if (sub->count("--boot")) cmd.boot = boot;
    if (sub->count("--estimators")) cmd.estimators = estimators;
    if (sub->count("--horizon")) cmd.horizon = horizon;
    if (sub->count("--arms")) cmd.arms = arms;
  }
  return survtransport::cli::run_command(cmd);
}
