#pragma once

#include "qgd/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace qgd::cli {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitNumeric = 3 };

struct Command {
  /// evolve, sample, entangle, oracle or validate.
  std::string name;
  std::filesystem::path config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

/// Runs one subcommand. Failures are reported as a single line
/// `error kind=<Kind> message="<text>"` on `err` and mapped to exit codes 2 (input) or 3 (numeric).
int run_command(const Command& command, std::ostream& err = std::cerr, std::ostream& info = std::cout);

/// Series term cap, overridden by QGD_MAX_TERMS when set.
std::uint64_t max_terms_from_env();

}  // namespace qgd::cli
