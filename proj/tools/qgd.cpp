#include "qgd/runner.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Gaussian dissipative dynamics under unitary Lindblad operators"};
  app.require_subcommand(1);

  qgd::cli::Command command;
  std::uint64_t seed = 0;
  const std::pair<const char*, const char*> subcommands[] = {
      {"evolve", "Deterministic covariance/mean evolution (ode, series, spectral or mc)"},
      {"sample", "Monte-Carlo trajectory ensemble"},
      {"entangle", "Two-mode evolution with PPT, entropy and coherent-information columns"},
      {"oracle", "Cross-check against the truncated Fock-space density-matrix oracle"},
      {"validate", "Validate a scenario without running it"},
  };
  for (const auto& [name, help] : subcommands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", command.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", command.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Random seed (overrides the scenario)");
    sub->add_flag("--quiet", command.quiet, "Suppress progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qgd::cli::kExitInput;
  }
  for (const auto& [name, help] : subcommands) {
    (void)help;
    CLI::App* sub = app.get_subcommand(name);
    if (sub->parsed()) {
      command.name = name;
      if (sub->count("--seed") > 0) command.seed = seed;
    }
  }
  return qgd::cli::run_command(command);
}
