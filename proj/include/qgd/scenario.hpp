#pragma once

// JSON scenario model for the command-line front end. Fields are kept in
// plain containers so the echo written to summary.json parses back to an
// equal Scenario.

#include "qgd/dynamics.hpp"

#include <json.hpp>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qgd::cli {

using Rows = std::vector<std::vector<double>>;
using ComplexRows = std::vector<std::vector<std::complex<double>>>;

struct InitialSpec {
  /// nullopt means "vacuum".
  std::optional<Rows> covariance;
  std::optional<std::vector<double>> mean;
  bool operator==(const InitialSpec&) const = default;
};

struct ChannelSpec {
  double gamma = 0.0;
  std::optional<Rows> generator;
  /// Named generator "two_mode_squeeze" with this r.
  std::optional<double> squeeze_r;
  std::optional<Rows> kick;
  bool operator==(const ChannelSpec&) const = default;
};

struct BaselineSpec {
  Rows G;
  ComplexRows C;
  bool operator==(const BaselineSpec&) const = default;
};

struct TimesSpec {
  std::optional<double> start, stop;
  std::optional<std::int64_t> count;
  std::optional<std::vector<double>> list;
  bool operator==(const TimesSpec&) const = default;
};

struct SolverSpec {
  std::string method = "ode";
  std::optional<double> tol;
  std::optional<std::uint64_t> trajectories;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<std::uint64_t> steps;
  bool operator==(const SolverSpec&) const = default;
};

struct OracleSpec {
  std::optional<std::int64_t> cutoff;
  std::optional<std::int64_t> check_cutoff;
  std::optional<double> moments_threshold;
  std::optional<Rows> prepare_generator;
  bool operator==(const OracleSpec&) const = default;
};

struct Scenario {
  int modes = 1;
  InitialSpec initial;
  std::vector<ChannelSpec> channels;
  std::optional<BaselineSpec> baseline;
  TimesSpec times;
  SolverSpec solver;
  std::vector<std::string> diagnostics;
  std::optional<OracleSpec> oracle;
  bool operator==(const Scenario&) const = default;

  bool wants(const std::string& diagnostic) const;
};

/// Strict parse: unknown keys, wrong types and inconsistent sizes raise ValidationError.
Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const Scenario& s);

Matrix to_matrix(const Rows& rows);
ChannelSet build_channels(const Scenario& s);
GaussianMoments build_initial(const Scenario& s);
std::optional<GaussianBaseline> build_baseline(const Scenario& s);
std::vector<double> time_grid(const Scenario& s);
SolverKind solver_kind(const Scenario& s);

}  // namespace qgd::cli
