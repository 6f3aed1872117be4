#include "qgd/scenario.hpp"

#include "qgd/entanglement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

namespace qgd::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ValidationError(where + ": " + what);
}

void expect_object(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(where, "unknown key \"" + key + "\"");
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "expected a finite number");
  return v;
}

std::int64_t integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<std::int64_t>();
}

std::uint64_t unsigned_integer(const json& j, const std::string& where) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  fail(where, "expected a non-negative integer");
}

std::vector<double> vector_of(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

Rows rows_of(const json& j, const std::string& where, std::size_t n_rows, std::size_t n_cols) {
  if (!j.is_array()) fail(where, "expected an array of rows");
  if (j.size() != n_rows) fail(where, "expected " + std::to_string(n_rows) + " rows, got " + std::to_string(j.size()));
  Rows out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    out.push_back(vector_of(j[i], at));
    if (out.back().size() != n_cols)
      fail(at, "expected " + std::to_string(n_cols) + " columns, got " + std::to_string(out.back().size()));
  }
  return out;
}

ComplexRows complex_rows_of(const json& j, const std::string& where, std::size_t n_cols) {
  if (!j.is_array()) fail(where, "expected an array of rows");
  ComplexRows out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].size() != n_cols) fail(at, "expected a row of " + std::to_string(n_cols) + " entries");
    std::vector<std::complex<double>> row;
    for (std::size_t c = 0; c < n_cols; ++c) {
      const json& e = j[i][c];
      const std::string ec = at + "[" + std::to_string(c) + "]";
      if (e.is_array()) {
        if (e.size() != 2) fail(ec, "complex entries are [re, im]");
        row.emplace_back(number(e[0], ec), number(e[1], ec));
      } else {
        row.emplace_back(number(e, ec), 0.0);
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

json rows_json(const Rows& rows) { return json(rows); }

const std::set<std::string> kDiagnostics = {"nu", "ppt", "entropy", "coherent_info"};
const std::set<std::string> kMethods = {"ode", "series", "spectral", "mc"};

}  // namespace

bool Scenario::wants(const std::string& diagnostic) const {
  return std::find(diagnostics.begin(), diagnostics.end(), diagnostic) != diagnostics.end();
}

Scenario parse_scenario(const json& j) {
  expect_object(j, "scenario", {"modes", "initial", "channels", "baseline", "times", "solver", "diagnostics", "oracle"});
  Scenario s;
  if (!j.contains("modes")) fail("scenario", "missing \"modes\"");
  const std::int64_t modes = integer(j["modes"], "modes");
  if (modes < 1 || modes > 32) fail("modes", "must be between 1 and 32");
  s.modes = static_cast<int>(modes);
  const std::size_t dim = 2 * static_cast<std::size_t>(s.modes);

  if (j.contains("initial")) {
    const json& ji = j["initial"];
    expect_object(ji, "initial", {"covariance", "mean"});
    if (ji.contains("covariance")) {
      const json& c = ji["covariance"];
      if (c.is_string()) {
        if (c.get<std::string>() != "vacuum") fail("initial.covariance", "string form must be \"vacuum\"");
      } else {
        s.initial.covariance = rows_of(c, "initial.covariance", dim, dim);
      }
    }
    if (ji.contains("mean")) {
      s.initial.mean = vector_of(ji["mean"], "initial.mean");
      if (s.initial.mean->size() != dim) fail("initial.mean", "expected length " + std::to_string(dim));
    }
  }

  if (!j.contains("channels")) fail("scenario", "missing \"channels\"");
  const json& jc = j["channels"];
  if (!jc.is_array() || jc.empty()) fail("channels", "expected a non-empty array");
  for (std::size_t i = 0; i < jc.size(); ++i) {
    const std::string at = "channels[" + std::to_string(i) + "]";
    expect_object(jc[i], at, {"gamma", "generator", "kick"});
    ChannelSpec c;
    if (!jc[i].contains("gamma")) fail(at, "missing \"gamma\"");
    c.gamma = number(jc[i]["gamma"], at + ".gamma");
    if (c.gamma < 0.0) fail(at + ".gamma", "must be >= 0");
    if (jc[i].contains("generator")) {
      const json& g = jc[i]["generator"];
      if (g.is_object()) {
        expect_object(g, at + ".generator", {"name", "r"});
        if (!g.contains("name") || !g["name"].is_string()) fail(at + ".generator", "missing \"name\"");
        if (g["name"].get<std::string>() != "two_mode_squeeze")
          fail(at + ".generator.name", "unknown named generator \"" + g["name"].get<std::string>() + "\"");
        if (s.modes != 2) fail(at + ".generator", "two_mode_squeeze requires modes = 2");
        if (!g.contains("r")) fail(at + ".generator", "missing \"r\"");
        c.squeeze_r = number(g["r"], at + ".generator.r");
        if (!(*c.squeeze_r > 0.0)) fail(at + ".generator.r", "two_mode_squeeze requires r > 0");
      } else {
        c.generator = rows_of(g, at + ".generator", dim, dim);
      }
    }
    if (jc[i].contains("kick")) c.kick = rows_of(jc[i]["kick"], at + ".kick", dim, dim);
    if (!c.generator && !c.squeeze_r && !c.kick) fail(at, "needs a \"generator\" or a \"kick\"");
    s.channels.push_back(std::move(c));
  }

  if (j.contains("baseline")) {
    const json& jb = j["baseline"];
    expect_object(jb, "baseline", {"G", "C"});
    BaselineSpec b;
    if (jb.contains("G")) {
      b.G = rows_of(jb["G"], "baseline.G", dim, dim);
    } else {
      b.G = Rows(dim, std::vector<double>(dim, 0.0));
    }
    if (jb.contains("C")) b.C = complex_rows_of(jb["C"], "baseline.C", dim);
    s.baseline = std::move(b);
  }

  if (!j.contains("times")) fail("scenario", "missing \"times\"");
  const json& jt = j["times"];
  if (jt.is_array()) {
    s.times.list = vector_of(jt, "times");
    if (s.times.list->empty()) fail("times", "expected at least one time");
  } else {
    expect_object(jt, "times", {"start", "stop", "count"});
    if (!jt.contains("stop") || !jt.contains("count")) fail("times", "range form needs \"stop\" and \"count\"");
    s.times.start = jt.contains("start") ? number(jt["start"], "times.start") : 0.0;
    s.times.stop = number(jt["stop"], "times.stop");
    s.times.count = integer(jt["count"], "times.count");
    if (*s.times.count < 1) fail("times.count", "must be >= 1");
    if (*s.times.count > 1 && !(*s.times.stop > *s.times.start)) fail("times", "stop must exceed start");
  }

  if (j.contains("solver")) {
    const json& js = j["solver"];
    expect_object(js, "solver", {"method", "tol", "trajectories", "seed", "dt", "steps"});
    if (js.contains("method")) {
      if (!js["method"].is_string()) fail("solver.method", "expected a string");
      s.solver.method = js["method"].get<std::string>();
      if (!kMethods.count(s.solver.method)) fail("solver.method", "unknown method \"" + s.solver.method + "\"");
    }
    if (js.contains("tol")) {
      s.solver.tol = number(js["tol"], "solver.tol");
      if (!(*s.solver.tol > 0.0)) fail("solver.tol", "must be > 0");
    }
    if (js.contains("trajectories")) {
      s.solver.trajectories = unsigned_integer(js["trajectories"], "solver.trajectories");
      if (*s.solver.trajectories < 2) fail("solver.trajectories", "must be >= 2");
    }
    if (js.contains("seed")) s.solver.seed = unsigned_integer(js["seed"], "solver.seed");
    if (js.contains("dt")) {
      s.solver.dt = number(js["dt"], "solver.dt");
      if (!(*s.solver.dt > 0.0 && *s.solver.dt <= 1.0)) fail("solver.dt", "must be in (0, 1]");
    }
    if (js.contains("steps")) s.solver.steps = unsigned_integer(js["steps"], "solver.steps");
  }

  if (j.contains("diagnostics")) {
    const json& jd = j["diagnostics"];
    if (!jd.is_array()) fail("diagnostics", "expected an array of strings");
    for (const auto& d : jd) {
      if (!d.is_string() || !kDiagnostics.count(d.get<std::string>()))
        fail("diagnostics", "entries must be one of nu, ppt, entropy, coherent_info");
      const std::string name = d.get<std::string>();
      if (name != "nu" && s.modes != 2) fail("diagnostics", "\"" + name + "\" requires modes = 2");
      if (!s.wants(name)) s.diagnostics.push_back(name);
    }
  }

  if (j.contains("oracle")) {
    const json& jo = j["oracle"];
    expect_object(jo, "oracle", {"cutoff", "check_cutoff", "moments_threshold", "prepare_generator"});
    OracleSpec o;
    if (jo.contains("cutoff")) o.cutoff = integer(jo["cutoff"], "oracle.cutoff");
    if (jo.contains("check_cutoff")) o.check_cutoff = integer(jo["check_cutoff"], "oracle.check_cutoff");
    if (o.cutoff && *o.cutoff < 4) fail("oracle.cutoff", "must be >= 4");
    if (o.check_cutoff && *o.check_cutoff < 4) fail("oracle.check_cutoff", "must be >= 4");
    if (jo.contains("moments_threshold")) {
      o.moments_threshold = number(jo["moments_threshold"], "oracle.moments_threshold");
      if (!(*o.moments_threshold > 0.0)) fail("oracle.moments_threshold", "must be > 0");
    }
    if (jo.contains("prepare_generator"))
      o.prepare_generator = rows_of(jo["prepare_generator"], "oracle.prepare_generator", dim, dim);
    s.oracle = std::move(o);
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("scenario is not valid JSON: " + std::string(e.what()));
  }
  return parse_scenario(j);
}

json to_json(const Scenario& s) {
  json j;
  j["modes"] = s.modes;
  json initial;
  initial["covariance"] = s.initial.covariance ? rows_json(*s.initial.covariance) : json("vacuum");
  if (s.initial.mean) initial["mean"] = *s.initial.mean;
  j["initial"] = initial;

  json channels = json::array();
  for (const auto& c : s.channels) {
    json jc;
    jc["gamma"] = c.gamma;
    if (c.squeeze_r) jc["generator"] = {{"name", "two_mode_squeeze"}, {"r", *c.squeeze_r}};
    if (c.generator) jc["generator"] = rows_json(*c.generator);
    if (c.kick) jc["kick"] = rows_json(*c.kick);
    channels.push_back(jc);
  }
  j["channels"] = channels;

  if (s.baseline) {
    json c = json::array();
    for (const auto& row : s.baseline->C) {
      json jr = json::array();
      for (const auto& z : row) jr.push_back({z.real(), z.imag()});
      c.push_back(jr);
    }
    j["baseline"] = {{"G", rows_json(s.baseline->G)}, {"C", c}};
  }

  if (s.times.list) {
    j["times"] = *s.times.list;
  } else {
    j["times"] = {{"start", *s.times.start}, {"stop", *s.times.stop}, {"count", *s.times.count}};
  }

  json solver;
  solver["method"] = s.solver.method;
  if (s.solver.tol) solver["tol"] = *s.solver.tol;
  if (s.solver.trajectories) solver["trajectories"] = *s.solver.trajectories;
  if (s.solver.seed) solver["seed"] = *s.solver.seed;
  if (s.solver.dt) solver["dt"] = *s.solver.dt;
  if (s.solver.steps) solver["steps"] = *s.solver.steps;
  j["solver"] = solver;
  j["diagnostics"] = s.diagnostics;

  if (s.oracle) {
    json o = json::object();
    if (s.oracle->cutoff) o["cutoff"] = *s.oracle->cutoff;
    if (s.oracle->check_cutoff) o["check_cutoff"] = *s.oracle->check_cutoff;
    if (s.oracle->moments_threshold) o["moments_threshold"] = *s.oracle->moments_threshold;
    if (s.oracle->prepare_generator) o["prepare_generator"] = rows_json(*s.oracle->prepare_generator);
    j["oracle"] = o;
  }
  return j;
}

Matrix to_matrix(const Rows& rows) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = r == 0 ? 0 : static_cast<Index>(rows.front().size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index k = 0; k < c; ++k) m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  return m;
}

ChannelSet build_channels(const Scenario& s) {
  std::vector<UnitaryChannel> channels;
  for (const auto& c : s.channels) {
    std::optional<SymmetricGenerator> generator;
    std::optional<SymplecticMatrix> kick;
    if (c.squeeze_r) {
      auto [g, k] = squeeze_channel(*c.squeeze_r);
      generator = g;
      kick = k;
    }
    if (c.generator) {
      const Matrix g = to_matrix(*c.generator);
      if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff()))
        throw ValidationError("channel generator must be symmetric");
      generator = SymmetricGenerator(g);
      kick = symplectic_exp(*generator);
    }
    if (c.kick) kick = SymplecticMatrix(to_matrix(*c.kick));
    channels.emplace_back(c.gamma, *kick, generator);
  }
  return ChannelSet(std::move(channels));
}

GaussianMoments build_initial(const Scenario& s) {
  const ModeLayout layout(s.modes);
  Matrix v = s.initial.covariance ? to_matrix(*s.initial.covariance) : GaussianMoments::vacuum(layout).covariance;
  if ((v - v.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff()))
    throw ValidationError("initial covariance must be symmetric");
  Vector xi = Vector::Zero(layout.dim());
  if (s.initial.mean)
    for (std::size_t i = 0; i < s.initial.mean->size(); ++i) xi(static_cast<Index>(i)) = (*s.initial.mean)[i];
  return GaussianMoments(symmetrized(v), xi);
}

std::optional<GaussianBaseline> build_baseline(const Scenario& s) {
  if (!s.baseline) return std::nullopt;
  const Matrix g = to_matrix(s.baseline->G);
  const Index dim = 2 * static_cast<Index>(s.modes);
  CMatrix c(static_cast<Index>(s.baseline->C.size()), dim);
  for (Index i = 0; i < c.rows(); ++i)
    for (Index k = 0; k < dim; ++k) c(i, k) = s.baseline->C[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  return GaussianBaseline(g, c);
}

std::vector<double> time_grid(const Scenario& s) {
  if (s.times.list) return *s.times.list;
  const double start = *s.times.start, stop = *s.times.stop;
  const std::int64_t count = *s.times.count;
  if (count == 1) return {start};
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i)
    out.push_back(i == count - 1 ? stop : start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1));
  return out;
}

SolverKind solver_kind(const Scenario& s) {
  if (s.solver.method == "series") return SolverKind::series;
  if (s.solver.method == "spectral") return SolverKind::spectral;
  return SolverKind::ode;
}

}  // namespace qgd::cli
