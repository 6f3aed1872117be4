#include "qgd/dynamics.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace qgd {

namespace {

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

void check_finite_and_bounded(const Matrix& v, double max_entry, double t) {
  const double peak = max_abs(v);
  if (!std::isfinite(peak) || peak > max_entry)
    throw OverflowError("covariance entry " + std::to_string(peak) + " exceeds " + std::to_string(max_entry) +
                        " at t=" + std::to_string(t));
}

void check_physical(const Matrix& v, double tol, double t) {
  const double eff = std::max(tol, 64.0 * std::numeric_limits<double>::epsilon() * max_abs(v));
  const double lambda = min_uncertainty_eigenvalue(v);
  if (lambda < -eff)
    throw PhysicalityError("uncertainty relation violated at t=" + std::to_string(t) +
                           " (min eigenvalue of V + iJ/2 = " + std::to_string(lambda) + ")");
}

double log_poisson(int k, double t) {
  if (t == 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return -t + k * std::log(t) - std::lgamma(k + 1.0);
}

}  // namespace

// ---------------------------------------------------------------- channels

UnitaryChannel::UnitaryChannel(double gamma_, SymplecticMatrix kick_, std::optional<SymmetricGenerator> generator_)
    : gamma(gamma_), kick(std::move(kick_)), generator(std::move(generator_)) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("channel weight must be finite and >= 0");
  if (generator) {
    if (!(generator->layout() == kick.layout())) throw DimensionError("generator and kick dimensions differ");
    const Matrix expected = symplectic_exp(*generator).matrix();
    const double scale = std::max(1.0, max_abs(expected));
    if (max_abs(expected - kick.matrix()) > kDefaultTol * scale)
      throw DomainError("kick does not equal exp(JS) of its generator");
  }
}

UnitaryChannel UnitaryChannel::from_generator(double gamma, const SymmetricGenerator& s) {
  return UnitaryChannel(gamma, symplectic_exp(s), s);
}

ChannelSet::ChannelSet(std::vector<UnitaryChannel> channels)
    : layout_(channels.empty() ? ModeLayout(1) : channels.front().kick.layout()), channels_(std::move(channels)) {
  if (channels_.empty()) throw ValidationError("channel set is empty");
  double total = 0.0;
  for (const auto& c : channels_) {
    if (!(c.kick.layout() == layout_)) throw DimensionError("channels act on different phase-space dimensions");
    total += c.gamma;
  }
  if (std::abs(total - 1.0) > kNormalizationTol)
    throw ValidationError("channel weights must sum to 1 (got " + std::to_string(total) + ")");
}

bool ChannelSet::has_generators() const {
  return std::all_of(channels_.begin(), channels_.end(), [](const auto& c) { return c.generator.has_value(); });
}

Matrix ChannelSet::conjugation_average(const Matrix& m) const {
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (const auto& c : channels_) {
    if (c.gamma == 0.0) continue;
    const Matrix& k = c.kick.matrix();
    out.noalias() += c.gamma * (k * m * k.transpose());
  }
  return out;
}

Matrix ChannelSet::kick_average() const {
  Matrix out = Matrix::Zero(dim(), dim());
  for (const auto& c : channels_) out += c.gamma * c.kick.matrix();
  return out;
}

double ChannelSet::max_singular_value() const {
  double g = 1.0;
  for (const auto& c : channels_) g = std::max(g, c.kick.max_singular_value());
  return g;
}

// ---------------------------------------------------------------- baseline

GaussianBaseline::GaussianBaseline(Matrix hamiltonian, CMatrix coupling) : g_(std::move(hamiltonian)), c_(std::move(coupling)) {
  const ModeLayout layout = ModeLayout::of(g_.rows(), g_.cols());
  if (max_abs(g_ - g_.transpose()) > 1e-12 * std::max(1.0, max_abs(g_)))
    throw DomainError("baseline Hamiltonian matrix must be symmetric");
  g_ = symmetrized(g_);
  if (c_.size() != 0 && c_.cols() != layout.dim())
    throw DimensionError("coupling matrix must have 2N columns");
}

Matrix GaussianBaseline::drift() const {
  const ModeLayout layout = ModeLayout::of(g_.rows(), g_.cols());
  const Matrix J = symplectic_form(layout);
  if (c_.size() == 0) return J * g_;
  const CMatrix cc = c_.adjoint() * c_;
  return J * (g_ + cc.imag());
}

Matrix GaussianBaseline::diffusion() const {
  const ModeLayout layout = ModeLayout::of(g_.rows(), g_.cols());
  if (c_.size() == 0) return Matrix::Zero(layout.dim(), layout.dim());
  const Matrix J = symplectic_form(layout);
  const CMatrix cc = c_.adjoint() * c_;
  return J * cc.real() * J.transpose();
}

// ---------------------------------------------------------------- problem

void EvolutionProblem::validate() const {
  if (times.empty()) throw ValidationError("time grid is empty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) throw ValidationError("times must be finite and non-negative");
    if (i > 0 && !(times[i] > times[i - 1])) throw ValidationError("times must be strictly increasing");
  }
  if (!(initial.layout() == channels.layout())) throw DimensionError("initial state and channels differ in dimension");
  if (baseline && baseline->hamiltonian_matrix().rows() != channels.dim())
    throw DimensionError("baseline dimension differs from channels");
  if (!check_uncertainty(initial.covariance, kDefaultTol))
    throw ValidationError("initial covariance violates the uncertainty relation V + iJ/2 >= 0");
  if (solver == SolverKind::spectral) {
    if (baseline) throw ValidationError("spectral solver does not support a Gaussian baseline");
    if (!channels.has_generators()) throw ValidationError("spectral solver needs a generator for every channel");
  }
  if (solver == SolverKind::series && baseline) throw ValidationError("series solver does not support a Gaussian baseline");
}

// ---------------------------------------------------------------- ODE

namespace {

using OdeState = std::vector<double>;

struct MomentRhs {
  std::vector<double> gammas;
  std::vector<Matrix> kicks;
  std::vector<Matrix> shifted;  // K_j - 1
  std::optional<Matrix> drift;
  std::optional<Matrix> diffusion;
  Index d = 0;
  double max_entry = kDefaultMaxEntry;

  void operator()(const OdeState& x, OdeState& dxdt, double t) const {
    Eigen::Map<const Matrix> v(x.data(), d, d);
    Eigen::Map<const Vector> xi(x.data() + d * d, d);
    Eigen::Map<Matrix> dv(dxdt.data(), d, d);
    Eigen::Map<Vector> dxi(dxdt.data() + d * d, d);

    if (!std::isfinite(v.cwiseAbs().maxCoeff()) || v.cwiseAbs().maxCoeff() > max_entry)
      throw OverflowError("covariance entry exceeds " + std::to_string(max_entry) + " near t=" + std::to_string(t));

    dv.setZero();
    dxi.setZero();
    const bool has_mean = xi.cwiseAbs().maxCoeff() > 0.0;
    for (std::size_t j = 0; j < kicks.size(); ++j) {
      const Matrix& k = kicks[j];
      dv.noalias() += gammas[j] * (k * v * k.transpose());
      dv -= gammas[j] * v;
      if (has_mean) {
        const Vector shift = shifted[j] * xi;
        dv.noalias() += gammas[j] * (shift * shift.transpose());
        dxi.noalias() += gammas[j] * shift;
      }
    }
    if (drift) {
      dv.noalias() += *drift * v + v * drift->transpose();
      dxi.noalias() += *drift * xi;
    }
    if (diffusion) dv += *diffusion;
  }
};

}  // namespace

std::vector<GaussianMoments> ode_evolve(const EvolutionProblem& problem) {
  problem.validate();
  namespace odeint = boost::numeric::odeint;
  const SolverOptions& opt = problem.options;
  const Index d = problem.channels.dim();

  MomentRhs rhs;
  rhs.d = d;
  rhs.max_entry = opt.max_entry;
  for (const auto& c : problem.channels.channels()) {
    rhs.gammas.push_back(c.gamma);
    rhs.kicks.push_back(c.kick.matrix());
    rhs.shifted.push_back(c.kick.matrix() - Matrix::Identity(d, d));
  }
  if (problem.baseline) {
    rhs.drift = problem.baseline->drift();
    rhs.diffusion = problem.baseline->diffusion();
  }

  OdeState x(static_cast<std::size_t>(d * d + d));
  Eigen::Map<Matrix>(x.data(), d, d) = problem.initial.covariance;
  Eigen::Map<Vector>(x.data() + d * d, d) = problem.initial.mean;

  std::vector<double> grid = problem.times;
  const bool prepended = grid.front() > 0.0;
  if (prepended) grid.insert(grid.begin(), 0.0);

  std::vector<GaussianMoments> out;
  out.reserve(problem.times.size());
  double last_time = 0.0;
  bool skip_first = prepended;
  auto observer = [&](const OdeState& state, double t) {
    last_time = t;
    if (skip_first) {
      skip_first = false;
      return;
    }
    Matrix v = symmetrized(Eigen::Map<const Matrix>(state.data(), d, d));
    Vector xi = Eigen::Map<const Vector>(state.data() + d * d, d);
    check_finite_and_bounded(v, opt.max_entry, t);
    check_physical(v, opt.physicality_tol, t);
    out.emplace_back(std::move(v), std::move(xi));
  };

  if (grid.size() == 1) {
    observer(x, grid.front());
    return out;
  }

  auto stepper = odeint::make_controlled(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<OdeState>());
  const double span = grid.back() - grid.front();
  const double dt0 = std::min(1e-3, span / 100.0);
  try {
    odeint::integrate_times(stepper, std::cref(rhs), x, grid.begin(), grid.end(), dt0, observer);
  } catch (const odeint::odeint_error& e) {
    throw IntegrationError(std::string("step-size control failed after t=") + std::to_string(last_time) + ": " + e.what(),
                           last_time);
  }
  return out;
}

// ---------------------------------------------------------------- series

SeriesTruncation series_truncation(double t, double growth, double norm, double tol) {
  if (!(t >= 0.0)) throw DomainError("time must be non-negative");
  if (!(tol > 0.0)) throw DomainError("series tolerance must be positive");
  if (growth < 1.0) growth = 1.0;
  SeriesTruncation out;
  if (t == 0.0 || norm == 0.0) {
    out.depth = 0;
    out.tail_bound = 0.0;
    out.poisson_mass = 1.0;
    return out;
  }
  const double a = t * growth * growth;
  const double log_a = std::log(a);
  const double target = tol / norm;
  constexpr int kMaxDepth = 1'000'000;
  int k = 0;
  for (;; ++k) {
    if (k > kMaxDepth) throw TermCapError("series truncation depth exceeds " + std::to_string(kMaxDepth));
    // next term p_{k+1}(t) g^{2(k+1)}; geometric tail bound once the ratio drops below 1
    const double next = std::exp(-t + (k + 1) * log_a - std::lgamma(k + 2.0));
    if (k + 2 > a) {
      const double bound = next / (1.0 - a / (k + 2));
      if (bound <= target) {
        out.tail_bound = bound;
        break;
      }
    }
  }
  out.depth = k;
  double mass = 0.0;
  for (int i = 0; i <= k; ++i) mass += std::exp(log_poisson(i, t));
  out.poisson_mass = mass;
  return out;
}

GaussianMoments series_evolve(const ChannelSet& channels, const GaussianMoments& initial, double t, double tol,
                              const SolverOptions& options) {
  if (!(initial.layout() == channels.layout())) throw DimensionError("initial state and channels differ in dimension");
  const Matrix m0 = initial.second_moments();
  const double norm = Eigen::SelfAdjointEigenSolver<Matrix>(m0, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
  const SeriesTruncation trunc = series_truncation(t, channels.max_singular_value(), norm, tol);

  const std::uint64_t conjugations =
      static_cast<std::uint64_t>(trunc.depth + 1) * static_cast<std::uint64_t>(channels.size());
  if (conjugations > options.max_terms)
    throw TermCapError("series needs " + std::to_string(conjugations) + " kick conjugations (cap " +
                       std::to_string(options.max_terms) + "); use the ode or mc solver");

  const Matrix psi = channels.kick_average();
  const bool has_mean = initial.mean.cwiseAbs().maxCoeff() > 0.0;
  Matrix term = m0;
  Vector mean_term = initial.mean;
  Matrix acc = Matrix::Zero(m0.rows(), m0.cols());
  Vector mean_acc = Vector::Zero(initial.mean.size());
  for (int k = 0; k <= trunc.depth; ++k) {
    const double p = std::exp(log_poisson(k, t));
    acc += p * term;
    if (has_mean) mean_acc += p * mean_term;
    if (k < trunc.depth) {
      term = channels.conjugation_average(term);
      if (has_mean) mean_term = psi * mean_term;
    }
  }
  Matrix v = symmetrized(Matrix(acc - mean_acc * mean_acc.transpose()));
  check_finite_and_bounded(v, options.max_entry, t);
  return GaussianMoments(std::move(v), std::move(mean_acc));
}

// ---------------------------------------------------------------- spectral

SpectralDecomposition spectral_decomposition(const SymmetricGenerator& s) {
  const Matrix js = s.hamiltonian_matrix();
  if (!is_normal(js)) throw NotNormalError("JS is not normal; use the ode or series solver");
  Eigen::ComplexSchur<CMatrix> schur(js.cast<Complex>());
  return {schur.matrixT().diagonal(), schur.matrixU()};
}

namespace {

/// Common unitary eigenbasis of commuting normal matrices and each one's eigenvalues in it.
struct JointSpectrum {
  CMatrix basis;
  std::vector<CVector> eigenvalues;
};

JointSpectrum joint_spectrum(const std::vector<Matrix>& generators) {
  JointSpectrum out;
  CMatrix combination = CMatrix::Zero(generators.front().rows(), generators.front().cols());
  for (std::size_t j = 0; j < generators.size(); ++j) {
    const Matrix& a = generators[j];
    if (!is_normal(a)) throw NotNormalError("JS of channel " + std::to_string(j) + " is not normal");
    for (std::size_t i = 0; i < j; ++i) {
      const Matrix& b = generators[i];
      const double comm = (a * b - b * a).norm();
      if (comm > 1e-10 * std::max(1e-300, a.norm() * b.norm()))
        throw NotNormalError("channel generators do not commute; no common eigenbasis");
    }
    // generic weights keep accidental degeneracies of the combination unlikely
    combination += Complex(1.0 + std::numbers::phi * static_cast<double>(j), 0.0) * a.cast<Complex>();
  }
  Eigen::ComplexSchur<CMatrix> schur(combination);
  out.basis = schur.matrixU();
  for (std::size_t j = 0; j < generators.size(); ++j) {
    const CMatrix d = out.basis.adjoint() * generators[j].cast<Complex>() * out.basis;
    const CVector diag = d.diagonal();
    const double off = (d - CMatrix(diag.asDiagonal())).cwiseAbs().maxCoeff();
    if (off > 1e-8 * std::max(1.0, generators[j].norm()))
      throw NotNormalError("channel generators are not simultaneously diagonalizable");
    out.eigenvalues.push_back(diag);
  }
  return out;
}

}  // namespace

GaussianMoments spectral_evolve(const ChannelSet& channels, const GaussianMoments& initial, double t,
                                const SolverOptions& options) {
  if (!(t >= 0.0)) throw DomainError("time must be non-negative");
  if (!channels.has_generators()) throw ValidationError("spectral solver needs a generator for every channel");
  if (!(initial.layout() == channels.layout())) throw DimensionError("initial state and channels differ in dimension");

  std::vector<Matrix> generators;
  std::vector<double> gammas;
  for (const auto& c : channels.channels()) {
    generators.push_back(c.generator->hamiltonian_matrix());
    gammas.push_back(c.gamma);
  }
  const JointSpectrum spectrum = joint_spectrum(generators);
  const CMatrix& q = spectrum.basis;
  const Index d = channels.dim();
  const Matrix J = symplectic_form(channels.layout());

  // rate(k, k') = sum_j gamma_j (exp(s^j_k - s^j_k') - 1)
  CMatrix rate = CMatrix::Zero(d, d);
  CVector mean_rate = CVector::Zero(d);
  for (std::size_t j = 0; j < generators.size(); ++j) {
    const CVector& s = spectrum.eigenvalues[j];
    for (Index k = 0; k < d; ++k) {
      mean_rate(k) += gammas[j] * (std::exp(s(k)) - 1.0);
      for (Index kp = 0; kp < d; ++kp) rate(k, kp) += gammas[j] * (std::exp(s(k) - s(kp)) - 1.0);
    }
  }
  const double max_exponent = t * rate.real().maxCoeff();
  if (max_exponent > std::log(options.max_entry) + 50.0)
    throw OverflowError("spectral growth exponent " + std::to_string(max_exponent) + " overflows at t=" + std::to_string(t));

  // W = M J evolves as W -> K W K^{-1}, diagonal in the eigenbasis of JS.
  const Matrix w0 = initial.second_moments() * J;
  CMatrix y = q.adjoint() * w0.cast<Complex>() * q;
  y.array() *= (t * rate.array()).exp();
  const Matrix w = (q * y * q.adjoint()).real();
  const Matrix m = -w * J;

  Vector xi = initial.mean;
  if (xi.cwiseAbs().maxCoeff() > 0.0) {
    const CVector factors = (t * mean_rate.array()).exp();
    xi = (q * factors.asDiagonal() * (q.adjoint() * initial.mean.cast<Complex>())).real();
  }
  Matrix v = symmetrized(Matrix(m - xi * xi.transpose()));
  check_finite_and_bounded(v, options.max_entry, t);
  return GaussianMoments(std::move(v), std::move(xi));
}

GaussianMoments spectral_evolve(const SymmetricGenerator& s, const GaussianMoments& initial, double t,
                                const SolverOptions& options) {
  const ChannelSet single({UnitaryChannel::from_generator(1.0, s)});
  return spectral_evolve(single, initial, t, options);
}

std::vector<GaussianMoments> evolve(const EvolutionProblem& problem) {
  problem.validate();
  switch (problem.solver) {
    case SolverKind::ode:
      return ode_evolve(problem);
    case SolverKind::series:
    case SolverKind::spectral: {
      std::vector<GaussianMoments> out;
      out.reserve(problem.times.size());
      for (double t : problem.times) {
        GaussianMoments state = problem.solver == SolverKind::series
                                    ? series_evolve(problem.channels, problem.initial, t, problem.options.series_tol,
                                                    problem.options)
                                    : spectral_evolve(problem.channels, problem.initial, t, problem.options);
        check_physical(state.covariance, problem.options.physicality_tol, t);
        out.push_back(std::move(state));
      }
      return out;
    }
  }
  throw ValidationError("unknown solver");
}

// ---------------------------------------------------------------- asymptotics

const char* to_string(Asymptotics a) noexcept {
  switch (a) {
    case Asymptotics::divergent: return "divergent";
    case Asymptotics::oscillatory: return "oscillatory";
    case Asymptotics::decaying: return "decaying";
  }
  return "unknown";
}

AsymptoticClassification classify_asymptotics(const SymmetricGenerator& s) {
  constexpr double kZetaTol = 1e-12;
  AsymptoticClassification out;
  out.spectrum = spectral_decomposition(s);
  const CVector& ev = out.spectrum.eigenvalues;
  const Index d = ev.size();
  out.pairs.assign(static_cast<std::size_t>(d), std::vector<PairAsymptotics>(static_cast<std::size_t>(d)));
  for (Index k = 0; k < d; ++k) {
    for (Index kp = 0; kp < d; ++kp) {
      PairAsymptotics& p = out.pairs[static_cast<std::size_t>(k)][static_cast<std::size_t>(kp)];
      const Complex diff = ev(k) - ev(kp);
      p.x = diff.real();
      p.y = diff.imag();
      p.zeta = std::exp(p.x) * std::cos(p.y);
      if (std::abs(p.zeta - 1.0) <= kZetaTol) {
        p.kind = Asymptotics::oscillatory;
        p.phase_rate = std::abs(p.y) <= kZetaTol ? 0.0 : std::tan(p.y);
        p.boundary_flag = std::abs(p.y) > kZetaTol;
      } else {
        p.kind = p.zeta > 1.0 ? Asymptotics::divergent : Asymptotics::decaying;
      }
    }
  }
  return out;
}

StationaryState stationary_state(const SymmetricGenerator& s, const GaussianMoments& initial) {
  constexpr double kImagTol = 1e-10;
  constexpr double kGroupTol = 1e-10;
  if (!(initial.layout() == s.layout())) throw DimensionError("initial state and generator differ in dimension");
  const SpectralDecomposition spectrum = spectral_decomposition(s);
  const CVector& ev = spectrum.eigenvalues;
  const CMatrix& q = spectrum.eigenvectors;
  const Index d = ev.size();
  for (Index k = 0; k < d; ++k)
    if (std::abs(ev(k).real()) > kImagTol)
      throw NotPassiveError("JS has an eigenvalue with non-zero real part; no stationary state exists");

  // group eigenvalues; each group contributes P_g W0 P_g
  std::vector<int> group(static_cast<std::size_t>(d), -1);
  int n_groups = 0;
  bool degenerate = false;
  for (Index k = 0; k < d; ++k) {
    if (group[static_cast<std::size_t>(k)] >= 0) continue;
    group[static_cast<std::size_t>(k)] = n_groups;
    for (Index kp = k + 1; kp < d; ++kp) {
      if (group[static_cast<std::size_t>(kp)] < 0 && std::abs(ev(k) - ev(kp)) <= kGroupTol) {
        group[static_cast<std::size_t>(kp)] = n_groups;
        degenerate = true;
      }
    }
    ++n_groups;
  }

  const Matrix J = symplectic_form(s.layout());
  const CMatrix y0 = q.adjoint() * (initial.second_moments() * J).cast<Complex>() * q;
  CMatrix y = CMatrix::Zero(d, d);
  CVector mean_coeff = CVector::Zero(d);
  const CVector mean_basis = q.adjoint() * initial.mean.cast<Complex>();
  for (Index k = 0; k < d; ++k) {
    for (Index kp = 0; kp < d; ++kp)
      if (group[static_cast<std::size_t>(k)] == group[static_cast<std::size_t>(kp)]) y(k, kp) = y0(k, kp);
    // the mean keeps only its component with K-eigenvalue 1 (s = 0)
    if (std::abs(ev(k)) <= kGroupTol) mean_coeff(k) = mean_basis(k);
  }
  const Matrix m = -(q * y * q.adjoint()).real() * J;
  const Vector xi = (q * mean_coeff).real();
  return {GaussianMoments(symmetrized(Matrix(m - xi * xi.transpose())), xi), degenerate};
}

}  // namespace qgd
