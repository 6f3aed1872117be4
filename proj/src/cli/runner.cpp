#include "qgd/runner.hpp"

#include "qgd/entanglement.hpp"
#include "qgd/fock.hpp"
#include "qgd/matrix_io.hpp"
#include "qgd/sampler.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace qgd::cli {

using nlohmann::json;

namespace {

struct OracleFailure : NumericError {
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "OracleResidual"; }
};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

SolverOptions solver_options(const Scenario& s) {
  SolverOptions o;
  o.max_terms = max_terms_from_env();
  if (s.solver.tol) {
    o.rel_tol = *s.solver.tol;
    o.series_tol = *s.solver.tol;
  }
  return o;
}

/// CSV rows in the fixed column order: t, upper triangle of V, xi, nu, optional diagnostics.
class StateTable {
 public:
  StateTable(const Scenario& s) : scenario_(s), dim_(2 * static_cast<Index>(s.modes)) {
    std::ostringstream h;
    h << "t";
    for (Index i = 0; i < dim_; ++i)
      for (Index k = i; k < dim_; ++k) h << ",V_" << i + 1 << '_' << k + 1;
    for (Index i = 0; i < dim_; ++i) h << ",xi_" << i + 1;
    for (int i = 0; i < s.modes; ++i) h << ",nu_" << i + 1;
    if (s.wants("ppt")) h << ",nu_tilde_min,entangled";
    if (s.wants("entropy")) h << ",S_total,S_reduced";
    if (s.wants("coherent_info")) h << ",I_C";
    text_ = h.str() + "\n";
  }

  void add(double t, const GaussianMoments& state) {
    const Matrix& v = state.covariance;
    std::ostringstream row;
    row << format_double(t);
    for (Index i = 0; i < dim_; ++i)
      for (Index k = i; k < dim_; ++k) row << ',' << format_double(v(i, k));
    for (Index i = 0; i < dim_; ++i) row << ',' << format_double(state.mean(i));
    const Vector nu = symplectic_eigenvalues(v);
    for (Index i = 0; i < nu.size(); ++i) row << ',' << format_double(nu(i));
    if (scenario_.wants("ppt") || scenario_.wants("entropy") || scenario_.wants("coherent_info")) {
      const EntanglementReport r = entanglement_report(v, t);
      if (scenario_.wants("ppt")) row << ',' << format_double(r.min_ppt_nu) << ',' << (r.entangled ? 1 : 0);
      if (scenario_.wants("entropy"))
        row << ',' << format_double(r.entropy_total) << ',' << format_double(r.entropy_reduced);
      if (scenario_.wants("coherent_info")) row << ',' << format_double(r.coherent_information);
    }
    text_ += row.str() + "\n";
    ++rows_;
  }

  const std::string& text() const { return text_; }
  std::size_t rows() const { return rows_; }

 private:
  const Scenario& scenario_;
  Index dim_;
  std::string text_;
  std::size_t rows_ = 0;
};

EvolutionProblem build_problem(const Scenario& s) {
  EvolutionProblem p{build_channels(s), build_baseline(s), build_initial(s), time_grid(s), solver_kind(s),
                     solver_options(s)};
  return p;
}

json base_summary(const std::string& command, const Scenario& s) {
  json j;
  j["command"] = command;
  j["scenario"] = to_json(s);
  j["warnings"] = json::array();
  return j;
}

void run_sampler(const Scenario& s, std::uint64_t seed, StateTable& table, json& summary) {
  if (s.baseline) throw ValidationError("the mc sampler does not support a Gaussian baseline");
  const GaussianMoments initial = build_initial(s);
  if (initial.mean.cwiseAbs().maxCoeff() != 0.0)
    throw ValidationError("the mc sampler tracks covariances only; initial mean must be zero");
  if (!check_uncertainty(initial.covariance, kDefaultTol))
    throw ValidationError("initial covariance violates the uncertainty relation V + iJ/2 >= 0");
  const ChannelSet channels = build_channels(s);
  const std::vector<double> times = time_grid(s);
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && !(times[i] > times[i - 1])))
      throw ValidationError("times must be non-negative and strictly increasing");
  }

  TrajectoryConfig config;
  config.n_trajectories = s.solver.trajectories.value_or(10000);
  config.seed = seed;
  json per_time = json::array();
  std::uint64_t divergent = 0;
  for (double t : times) {
    config.horizon = t;
    EnsembleStatistics stats;
    if (s.solver.dt || s.solver.steps) {
      std::uint64_t steps = 0;
      double dt = 0.0;
      if (s.solver.dt) {
        dt = *s.solver.dt;
        steps = static_cast<std::uint64_t>(std::llround(t / dt));
      } else {
        steps = *s.solver.steps;
        dt = steps == 0 ? 1.0 : t / static_cast<double>(steps);
      }
      stats = collision_ensemble(channels, initial.covariance, dt, steps, config);
    } else {
      stats = ensemble_mean(channels, initial.covariance, config);
    }
    if (stats.n_samples == 0) throw OverflowError("every trajectory diverged at t=" + format_double(t));
    table.add(t, GaussianMoments(stats.mean_covariance));
    json hist = json::object();
    for (const auto& [k, n] : stats.jump_counts) hist[std::to_string(k)] = n;
    per_time.push_back({{"t", t},
                        {"n_samples", stats.n_samples},
                        {"n_divergent", stats.n_divergent},
                        {"max_standard_error", stats.standard_error.maxCoeff()},
                        {"jump_counts", hist}});
    divergent += stats.n_divergent;
  }
  summary["ensemble"] = per_time;
  summary["solver"] = {{"method", "mc"}, {"trajectories", config.n_trajectories}, {"seed", seed}};
  if (divergent > 0)
    summary["warnings"].push_back(std::to_string(divergent) + " divergent trajectories excluded from the means");
}

int evolve_like(const Command& cmd, Scenario s, bool force_entanglement, std::ostream& info) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  if (force_entanglement) {
    if (s.modes != 2) throw ValidationError("entangle requires modes = 2");
    for (const char* d : {"ppt", "entropy", "coherent_info"})
      if (!s.wants(d)) s.diagnostics.push_back(d);
  }
  const bool sampling = cmd.name == "sample" || s.solver.method == "mc";
  std::uint64_t seed = cmd.seed.value_or(s.solver.seed.value_or(0));

  StateTable table(s);
  json summary = base_summary(cmd.name, s);
  if (sampling) {
    run_sampler(s, seed, table, summary);
  } else {
    const EvolutionProblem problem = build_problem(s);
    const std::vector<GaussianMoments> states = evolve(problem);
    for (std::size_t i = 0; i < states.size(); ++i) table.add(problem.times[i], states[i]);
    const SolverOptions& o = problem.options;
    summary["solver"] = {{"method", s.solver.method},
                         {"rel_tol", o.rel_tol},
                         {"abs_tol", o.abs_tol},
                         {"series_tol", o.series_tol},
                         {"max_terms", o.max_terms}};
  }
  summary["rows"] = table.rows();
  summary["wall_time_s"] = std::chrono::duration<double>(Clock::now() - start).count();

  std::filesystem::create_directories(cmd.out);
  write_text(cmd.out / "states.csv", table.text());
  write_text(cmd.out / "summary.json", summary.dump(2) + "\n");
  if (!cmd.quiet) info << "wrote " << table.rows() << " rows to " << (cmd.out / "states.csv").string() << "\n";
  return kExitOk;
}

/// Vacuum, optionally kicked by the preparation generator and displaced by the mean.
struct PreparedState {
  GaussianMoments moments;
  CMatrix rho;
};

PreparedState prepare(const Scenario& s, const FockSystem& sys) {
  if (s.initial.covariance) throw ValidationError("oracle scenarios start from vacuum; use oracle.prepare_generator");
  const ModeLayout layout(s.modes);
  GaussianMoments m = GaussianMoments::vacuum(layout);
  CMatrix rho = vacuum_density(sys);
  if (s.oracle && s.oracle->prepare_generator) {
    const SymmetricGenerator g(to_matrix(*s.oracle->prepare_generator));
    const Matrix k = symplectic_exp(g).matrix();
    m.covariance = symmetrized(Matrix(k * m.covariance * k.transpose()));
    const CMatrix u = unitary_from_generator(quadratic_operator(sys, g.matrix()));
    rho = u * rho * u.adjoint();
  }
  if (s.initial.mean) {
    Vector d(layout.dim());
    for (Index i = 0; i < d.size(); ++i) d(i) = (*s.initial.mean)[static_cast<std::size_t>(i)];
    m.mean = d;
    const CMatrix u = unitary_from_generator(displacement_generator(sys, d));
    rho = u * rho * u.adjoint();
  }
  return {m, (rho + rho.adjoint()) / 2.0};
}

std::vector<CMatrix> fock_generators(const Scenario& s, const ChannelSet& channels, const FockSystem& sys) {
  (void)s;
  std::vector<CMatrix> out;
  for (const auto& c : channels.channels()) {
    if (!c.generator) throw ValidationError("oracle needs a generator for every channel");
    out.push_back(quadratic_operator(sys, c.generator->matrix()));
  }
  return out;
}

int run_oracle(const Command& cmd, const Scenario& s, std::ostream& info) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const ChannelSet channels = build_channels(s);
  const std::vector<double> times = time_grid(s);
  std::vector<double> gammas;
  bool passive = true;
  for (const auto& c : channels.channels()) {
    gammas.push_back(c.gamma);
    if (std::abs(c.kick.max_singular_value() - 1.0) > 1e-9) passive = false;
  }
  const int cutoff = static_cast<int>(s.oracle && s.oracle->cutoff ? *s.oracle->cutoff : 20);
  const int check_cutoff = static_cast<int>(s.oracle && s.oracle->check_cutoff ? *s.oracle->check_cutoff : 8);
  const double moments_threshold =
      s.oracle && s.oracle->moments_threshold ? *s.oracle->moments_threshold : (passive ? 1e-4 : 1e-3);
  constexpr double kLeakageThreshold = 1e-6;
  constexpr double kSpectralThreshold = 1e-8;
  constexpr double kControlledUnitaryThreshold = 1e-10;

  const FockSystem sys = build_fock_system(s.modes, cutoff);
  const PreparedState prepared = prepare(s, sys);
  const std::vector<CMatrix> generators = fock_generators(s, channels, sys);

  EvolutionProblem problem{channels, std::nullopt, prepared.moments, times, solver_kind(s), solver_options(s)};
  const std::vector<GaussianMoments> symplectic = evolve(problem);

  double moments_residual = 0.0, spectral_residual = 0.0, max_leakage = 0.0;
  const bool single = generators.size() == 1;
  CMatrix rho = prepared.rho;
  double now = 0.0;
  json per_time = json::array();
  for (std::size_t i = 0; i < times.size(); ++i) {
    GklsOptions opts;
    opts.enforce_leakage = false;
    rho = gkls_integrate(sys, generators, gammas, rho, times[i] - now, opts).matrix;
    now = times[i];
    const double leak = leakage(sys, rho);
    max_leakage = std::max(max_leakage, leak);
    const GaussianMoments fock = extract_moments(sys, rho, std::numeric_limits<double>::infinity());
    const double r = std::max((fock.covariance - symplectic[i].covariance).cwiseAbs().maxCoeff(),
                              (fock.mean - symplectic[i].mean).cwiseAbs().maxCoeff());
    moments_residual = std::max(moments_residual, r);
    json row = {{"t", times[i]}, {"leakage", leak}, {"moments_residual", r}};
    if (single) {
      const double sr = trace_norm(spectral_solution(generators.front(), prepared.rho, times[i]) - rho);
      spectral_residual = std::max(spectral_residual, sr);
      row["spectral_residual"] = sr;
    }
    per_time.push_back(row);
  }

  // operator-level identities on a small system
  const FockSystem small = build_fock_system(s.modes, check_cutoff);
  const std::vector<CMatrix> small_generators = fock_generators(s, channels, small);
  const double controlled = controlled_unitary_check(small_generators);
  const CMatrix small_rho = prepare(s, small).rho;
  const CollisionResiduals c1 = collision_step_check(small_generators, gammas, 0.05, small_rho);
  const CollisionResiduals c2 = collision_step_check(small_generators, gammas, 0.025, small_rho);
  const bool trivial = c1.continuum < 1e-13 && c2.continuum < 1e-13;
  const double ratio = trivial ? 4.0 : c1.continuum / c2.continuum;
  const bool collision_ok = c1.first_order <= 1e-10 && c2.first_order <= 1e-10 && std::abs(ratio / 4.0 - 1.0) <= 0.25;

  json report;
  report["cutoff"] = cutoff;
  report["check_cutoff"] = check_cutoff;
  report["leakage"] = {{"value", max_leakage}, {"threshold", kLeakageThreshold}, {"pass", max_leakage <= kLeakageThreshold}};
  json residuals;
  residuals["moments_vs_symplectic"] = {
      {"value", moments_residual}, {"threshold", moments_threshold}, {"pass", moments_residual <= moments_threshold}};
  if (single) {
    residuals["spectral_vs_integrator"] = {{"value", spectral_residual},
                                           {"threshold", kSpectralThreshold},
                                           {"pass", spectral_residual <= kSpectralThreshold}};
  } else {
    residuals["spectral_vs_integrator"] = nullptr;
  }
  residuals["appendix_identity"] = {
      {"value", controlled}, {"threshold", kControlledUnitaryThreshold}, {"pass", controlled <= kControlledUnitaryThreshold}};
  residuals["collision_step"] = {{"first_order", {c1.first_order, c2.first_order}},
                                 {"continuum", {c1.continuum, c2.continuum}},
                                 {"dt", {0.05, 0.025}},
                                 {"ratio", ratio},
                                 {"pass", collision_ok}};
  report["residuals"] = residuals;
  report["times"] = per_time;
  report["scenario"] = to_json(s);
  report["wall_time_s"] = std::chrono::duration<double>(Clock::now() - start).count();

  std::filesystem::create_directories(cmd.out);
  write_text(cmd.out / "oracle.json", report.dump(2) + "\n");

  if (max_leakage > kLeakageThreshold)
    throw LeakageExceeded("leakage " + format_double(max_leakage) + " exceeds " + format_double(kLeakageThreshold) +
                              " at cutoff " + std::to_string(cutoff),
                          max_leakage);
  for (const char* name : {"moments_vs_symplectic", "spectral_vs_integrator", "appendix_identity", "collision_step"}) {
    const json& r = residuals[name];
    if (!r.is_null() && !r["pass"].get<bool>())
      throw OracleFailure(std::string(name) + " residual exceeds its threshold (see oracle.json)");
  }
  if (!cmd.quiet) info << "oracle residuals within thresholds; wrote " << (cmd.out / "oracle.json").string() << "\n";
  return kExitOk;
}

int run_validate(const Command& cmd, const Scenario& s, std::ostream& info) {
  const ChannelSet channels = build_channels(s);
  const GaussianMoments initial = build_initial(s);
  if (s.solver.method != "mc") {
    build_problem(s).validate();
  } else if (!check_uncertainty(initial.covariance, kDefaultTol)) {
    throw ValidationError("initial covariance violates the uncertainty relation V + iJ/2 >= 0");
  }
  (void)channels;
  if (!cmd.quiet) info << "scenario is valid\n";
  return kExitOk;
}

}  // namespace

std::uint64_t max_terms_from_env() {
  const char* raw = std::getenv("QGD_MAX_TERMS");
  if (raw == nullptr || *raw == '\0') return SolverOptions{}.max_terms;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0' || v == 0) throw ValidationError("QGD_MAX_TERMS must be a positive integer");
  return v;
}

int run_command(const Command& cmd, std::ostream& err, std::ostream& info) {
  try {
    const Scenario s = load_scenario(cmd.config);
    if (cmd.name == "evolve") return evolve_like(cmd, s, false, info);
    if (cmd.name == "sample") return evolve_like(cmd, s, false, info);
    if (cmd.name == "entangle") return evolve_like(cmd, s, true, info);
    if (cmd.name == "oracle") return run_oracle(cmd, s, info);
    if (cmd.name == "validate") return run_validate(cmd, s, info);
    throw ValidationError("unknown command \"" + cmd.name + "\"");
  } catch (const InputError& e) {
    err << "error kind=" << e.kind() << " message=\"" << escape(e.what()) << "\"\n";
    return kExitInput;
  } catch (const Error& e) {
    err << "error kind=" << e.kind() << " message=\"" << escape(e.what()) << "\"\n";
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error kind=IOError message=\"" << escape(e.what()) << "\"\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error kind=InternalError message=\"" << escape(e.what()) << "\"\n";
    return kExitNumeric;
  }
}

}  // namespace qgd::cli
