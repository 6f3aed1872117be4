#pragma once

// Brute-force density-matrix oracle on a truncated Fock space. Generators
// follow U = exp(-i h); a quadratic h = 1/2 xi^T H xi induces the phase-space
// kick K = exp(JH).

#include "qgd/symplectic.hpp"

#include <vector>

namespace qgd {

struct FockSystem {
  int n_modes = 0;
  int cutoff = 0;
  Index dimension = 0;
  /// x_1, p_1, ..., x_N, p_N at the cutoff, Hermitian.
  std::vector<CMatrix> quadratures;
};

inline constexpr Index kDefaultMaxFockDim = 4096;

/// Quadratures from truncated ladder operators, x = (a + a^dag)/sqrt 2, p = (a - a^dag)/(i sqrt 2).
FockSystem build_fock_system(int n_modes, int cutoff, Index max_dimension = kDefaultMaxFockDim);

/// Operator of xi_k xi_l; same-mode products are formed one level above the cutoff
/// and then cropped, so every retained matrix element is exact.
CMatrix quadrature_product(const FockSystem& sys, Index k, Index l);

/// h = 1/2 sum_kl H_kl xi_k xi_l for symmetric H.
CMatrix quadratic_operator(const FockSystem& sys, const Matrix& h);

/// Generator of the displacement xi -> xi + d: h = -xi^T J d.
CMatrix displacement_generator(const FockSystem& sys, const Vector& d);

/// exp(-i h) through the eigendecomposition of Hermitian h.
CMatrix unitary_from_generator(const CMatrix& h);

CMatrix vacuum_density(const FockSystem& sys);

/// Max over modes of the population in that mode's top ceil(cutoff / 10) levels.
double leakage(const FockSystem& sys, const CMatrix& rho);

struct DensityState {
  CMatrix matrix;
  double leakage = 0.0;
};

struct GklsOptions {
  /// Per-step Taylor truncation tolerance (max-abs).
  double tol = 1e-13;
  double leakage_threshold = 1e-6;
  /// Throw LeakageExceeded above the threshold instead of just reporting it.
  bool enforce_leakage = true;
};

/// rho(t) for d rho/dt = sum_j gamma_j (U_j rho U_j^dag - rho) on any Hilbert space.
CMatrix gkls_propagate(const std::vector<CMatrix>& generators, const std::vector<double>& gammas, const CMatrix& rho0,
                       double t, double tol = 1e-13);

/// gkls_propagate on a Fock system with leakage accounting.
DensityState gkls_integrate(const FockSystem& sys, const std::vector<CMatrix>& generators,
                            const std::vector<double>& gammas, const CMatrix& rho0, double t,
                            const GklsOptions& options = {});

/// Single-generator closed form: in the eigenbasis of h,
/// rho_kk'(t) = exp[(cos(h_k - h_k') - 1) t - i sin(h_k - h_k') t] rho_kk'(0).
CMatrix spectral_solution(const CMatrix& h, const CMatrix& rho0, double t);

/// Means and symmetrized covariance; LeakageExceeded above `leakage_threshold`.
GaussianMoments extract_moments(const FockSystem& sys, const CMatrix& rho, double leakage_threshold = 1e-6);

/// Sum of singular values of a Hermitian difference.
double trace_norm(const CMatrix& a);

/// max |exp(-i sum_j h_j (x) |j><j|) - (1 (x) |0><0| + sum_j U_j (x) |j><j|)| with the ancilla
/// of dimension M + 1 and its level 0 left uncoupled.
double controlled_unitary_check(const std::vector<CMatrix>& generators, Index max_dimension = kDefaultMaxFockDim);

struct CollisionResiduals {
  /// Against rho0 + dt sum_j gamma_j (U_j rho0 U_j^dag - rho0).
  double first_order = 0.0;
  /// Against exp(dt L) rho0; O(dt^2).
  double continuum = 0.0;
};

/// One collision step at operator level: W (1 (x) O(dt)) on rho0 (x) |0><0|, ancilla traced out.
CollisionResiduals collision_step_check(const std::vector<CMatrix>& generators, const std::vector<double>& gammas,
                                        double dt, const CMatrix& rho0, Index max_dimension = kDefaultMaxFockDim);

}  // namespace qgd
