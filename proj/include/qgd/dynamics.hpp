#pragma once

// Deterministic covariance/mean evolution under dissipators built from
// Gaussian unitary Lindblad operators L_j = sqrt(gamma_j) U_j. In phase
// space each U_j acts as a kick K_j and
//
//   dV/dt  = sum_j gamma_j [K_j V K_j^T - V + (K_j - 1) xi xi^T (K_j - 1)^T]
//   dxi/dt = sum_j gamma_j (K_j - 1) xi
//
// optionally plus a quadratic Gaussian baseline (drift A, diffusion D).

#include "qgd/symplectic.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace qgd {

struct UnitaryChannel {
  double gamma = 0.0;
  SymplecticMatrix kick;
  std::optional<SymmetricGenerator> generator;

  UnitaryChannel(double gamma, SymplecticMatrix kick, std::optional<SymmetricGenerator> generator = std::nullopt);

  static UnitaryChannel from_generator(double gamma, const SymmetricGenerator& s);
};

/// Ordered channels of a common dimension with weights summing to one.
class ChannelSet {
 public:
  static constexpr double kNormalizationTol = 1e-12;

  explicit ChannelSet(std::vector<UnitaryChannel> channels);

  const std::vector<UnitaryChannel>& channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return channels_.size(); }
  const ModeLayout& layout() const noexcept { return layout_; }
  Index dim() const noexcept { return layout_.dim(); }
  bool has_generators() const;

  /// Phi(M) = sum_j gamma_j K_j M K_j^T.
  Matrix conjugation_average(const Matrix& m) const;
  /// Psi = sum_j gamma_j K_j.
  Matrix kick_average() const;
  /// max_j of the largest singular value of K_j (>= 1 for symplectic kicks).
  double max_singular_value() const;

 private:
  ModeLayout layout_;
  std::vector<UnitaryChannel> channels_;
};

/// Quadratic Hamiltonian G and linear Lindblad couplings C (rows c_j).
class GaussianBaseline {
 public:
  GaussianBaseline(Matrix hamiltonian, CMatrix coupling);

  const Matrix& hamiltonian_matrix() const noexcept { return g_; }
  const CMatrix& coupling_matrix() const noexcept { return c_; }
  /// A = J [G + Im C^H C].
  Matrix drift() const;
  /// D = J Re(C^H C) J^T.
  Matrix diffusion() const;

 private:
  Matrix g_;
  CMatrix c_;
};

enum class SolverKind { ode, series, spectral };

struct SolverOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  /// Truncation tolerance of the Poisson series.
  double series_tol = 1e-12;
  double physicality_tol = 1e-8;
  double max_entry = kDefaultMaxEntry;
  /// Cap on matrix conjugations in series_evolve; QGD_MAX_TERMS overrides.
  std::uint64_t max_terms = 10'000'000;
};

struct EvolutionProblem {
  ChannelSet channels;
  std::optional<GaussianBaseline> baseline;
  GaussianMoments initial;
  std::vector<double> times;
  SolverKind solver = SolverKind::ode;
  SolverOptions options;

  /// Grid, dimensions, physicality of the initial state, solver applicability.
  void validate() const;
};

/// Adaptive Dormand-Prince 5(4) integration; one state per grid time.
std::vector<GaussianMoments> ode_evolve(const EvolutionProblem& problem);

struct SeriesTruncation {
  int depth = 0;                 // k*
  double tail_bound = 0.0;       // sum_{k>k*} p_k(t) g^{2k}
  double poisson_mass = 1.0;     // sum_{k<=k*} p_k(t)
};

/// Smallest k* with sum_{k>k*} p_k(t) g^{2k} * norm <= tol.
SeriesTruncation series_truncation(double t, double growth, double norm, double tol);

/// Poisson-weighted kick series; exact up to the truncation tail.
GaussianMoments series_evolve(const ChannelSet& channels, const GaussianMoments& initial, double t,
                              double tol = 1e-12, const SolverOptions& options = {});

struct SpectralDecomposition {
  CVector eigenvalues;
  CMatrix eigenvectors;  // unitary, columns are eigenvectors
};

/// Eigendecomposition of JS; NotNormalError if JS fails the normality test.
SpectralDecomposition spectral_decomposition(const SymmetricGenerator& s);

/// Closed-form evolution in the eigenbasis of JS (single channel, weight 1).
GaussianMoments spectral_evolve(const SymmetricGenerator& s, const GaussianMoments& initial, double t,
                                const SolverOptions& options = {});
/// Same for mutually commuting normal generators, via a common eigenbasis.
GaussianMoments spectral_evolve(const ChannelSet& channels, const GaussianMoments& initial, double t,
                                const SolverOptions& options = {});

/// Runs the problem's selected solver over its grid.
std::vector<GaussianMoments> evolve(const EvolutionProblem& problem);

enum class Asymptotics { divergent, oscillatory, decaying };

const char* to_string(Asymptotics a) noexcept;

struct PairAsymptotics {
  double x = 0.0;     // Re(s_k - s_k')
  double y = 0.0;     // Im(s_k - s_k')
  double zeta = 0.0;  // e^x cos y
  Asymptotics kind = Asymptotics::decaying;
  /// tan(y) for oscillatory pairs, 0 otherwise.
  double phase_rate = 0.0;
  /// Oscillatory with y != 0: sits on the zeta = 1 manifold off the real axis.
  bool boundary_flag = false;
};

struct AsymptoticClassification {
  SpectralDecomposition spectrum;
  /// pairs[k][k'] for eigenvalue indices of `spectrum`.
  std::vector<std::vector<PairAsymptotics>> pairs;
};

AsymptoticClassification classify_asymptotics(const SymmetricGenerator& s);

struct StationaryState {
  GaussianMoments state;
  /// Degenerate eigenvalues were grouped and averaged through eigenspace projectors.
  bool degenerate = false;
};

/// t -> infinity limit for a passive single channel (purely imaginary spectrum of JS).
StationaryState stationary_state(const SymmetricGenerator& s, const GaussianMoments& initial);

}  // namespace qgd
