#pragma once

// Phase-space substrate: mode layout, the symplectic form, symplectic
// matrices and their exponential family, symplectic spectra and the
// uncertainty (physicality) check.
//
// Quadratures are always interleaved, (x_1, p_1, ..., x_N, p_N), and the
// vacuum covariance is I/2.

#include "qgd/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace qgd {

class ModeLayout {
 public:
  explicit ModeLayout(int n_modes) : n_modes_(n_modes) {
    if (n_modes < 1) throw DomainError("mode count must be >= 1, got " + std::to_string(n_modes));
  }

  int modes() const noexcept { return n_modes_; }
  Index dim() const noexcept { return 2 * static_cast<Index>(n_modes_); }

  static Index x_index(int mode) noexcept { return 2 * static_cast<Index>(mode); }
  static Index p_index(int mode) noexcept { return 2 * static_cast<Index>(mode) + 1; }

  /// Layout for a 2N x 2N matrix; throws DimensionError for odd or non-square input.
  static ModeLayout of(Index rows, Index cols) {
    if (rows != cols || rows == 0 || rows % 2 != 0)
      throw DimensionError("expected a square matrix of even dimension, got " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    return ModeLayout(static_cast<int>(rows / 2));
  }

  bool operator==(const ModeLayout&) const = default;

 private:
  int n_modes_;
};

/// Direct sum of N copies of J2 = [[0, 1], [-1, 0]].
template <typename Scalar = double>
MatrixX<Scalar> symplectic_form(const ModeLayout& layout) {
  MatrixX<Scalar> J = MatrixX<Scalar>::Zero(layout.dim(), layout.dim());
  for (int k = 0; k < layout.modes(); ++k) {
    J(ModeLayout::x_index(k), ModeLayout::p_index(k)) = Scalar(1);
    J(ModeLayout::p_index(k), ModeLayout::x_index(k)) = Scalar(-1);
  }
  return J;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

/// Symmetric 2N x 2N generator S of the kick K = exp(JS).
class SymmetricGenerator {
 public:
  explicit SymmetricGenerator(const Matrix& s) : layout_(ModeLayout::of(s.rows(), s.cols())), s_(symmetrized(s)) {}

  const Matrix& matrix() const noexcept { return s_; }
  const ModeLayout& layout() const noexcept { return layout_; }
  /// J S, the matrix whose exponential is the kick.
  Matrix hamiltonian_matrix() const { return symplectic_form(layout_) * s_; }

 private:
  ModeLayout layout_;
  Matrix s_;
};

/// True iff max|K J K^T - J| <= tol.
template <typename Derived>
bool is_symplectic(const Eigen::MatrixBase<Derived>& k, double tol = kDefaultTol) {
  using Scalar = typename Derived::Scalar;
  const ModeLayout layout = ModeLayout::of(k.rows(), k.cols());
  const MatrixX<Scalar> J = symplectic_form<Scalar>(layout);
  const MatrixX<Scalar> residual = k * J * k.transpose() - J;
  using std::abs;
  return abs(residual.cwiseAbs().maxCoeff()) <= Scalar(tol);
}

/// Real symplectic matrix K (K J K^T = J).
class SymplecticMatrix {
 public:
  /// Validates symplecticity at `tol` scaled by max(1, |K|_max^2).
  explicit SymplecticMatrix(const Matrix& k, double tol = kDefaultTol)
      : layout_(ModeLayout::of(k.rows(), k.cols())), k_(k) {
    const double scale = std::max(1.0, k.cwiseAbs().maxCoeff() * k.cwiseAbs().maxCoeff());
    if (!is_symplectic(k, tol * scale)) throw DomainError("matrix is not symplectic within tolerance");
  }

  static SymplecticMatrix unchecked(const Matrix& k) { return SymplecticMatrix(k, Unchecked{}); }

  const Matrix& matrix() const noexcept { return k_; }
  const ModeLayout& layout() const noexcept { return layout_; }
  /// Largest singular value; 1 for passive kicks.
  double max_singular_value() const {
    return Eigen::JacobiSVD<Matrix>(k_).singularValues()(0);
  }

 private:
  struct Unchecked {};
  SymplecticMatrix(const Matrix& k, Unchecked) : layout_(ModeLayout::of(k.rows(), k.cols())), k_(k) {}

  ModeLayout layout_;
  Matrix k_;
};

struct ExpOptions {
  /// Upper bound on the 1-norm of JS; larger arguments raise OverflowError.
  double max_norm = 50.0;
  /// Relative normality tolerance deciding the eigen route.
  double normal_tol = 1e-10;
};

/// ||A A^H - A^H A||_F <= tol * ||A||_F^2.
template <typename Derived>
bool is_normal(const Eigen::MatrixBase<Derived>& a, double tol = 1e-10) {
  const auto ah = a.adjoint();
  const double comm = (a * ah - ah * a).norm();
  const double scale = a.squaredNorm();
  return comm <= tol * scale;
}

/// K = exp(JS). Normal JS goes through a unitary eigenbasis, everything else
/// through Pade scaling-and-squaring.
SymplecticMatrix symplectic_exp(const SymmetricGenerator& s, const ExpOptions& options = {});

/// Covariance matrix V and mean vector xi of an N-mode state.
struct GaussianMoments {
  Matrix covariance;
  Vector mean;

  GaussianMoments() = default;
  GaussianMoments(Matrix v, Vector xi) : covariance(std::move(v)), mean(std::move(xi)) {
    const ModeLayout layout = ModeLayout::of(covariance.rows(), covariance.cols());
    if (mean.size() != layout.dim())
      throw DimensionError("mean vector length " + std::to_string(mean.size()) +
                           " does not match covariance dimension " + std::to_string(layout.dim()));
  }
  explicit GaussianMoments(Matrix v) : GaussianMoments(v, Vector::Zero(v.rows())) {}

  static GaussianMoments vacuum(const ModeLayout& layout) {
    return GaussianMoments(0.5 * Matrix::Identity(layout.dim(), layout.dim()));
  }

  ModeLayout layout() const { return ModeLayout::of(covariance.rows(), covariance.cols()); }
  /// Raw second moments <xi xi^T> symmetrized: V + xi xi^T.
  Matrix second_moments() const { return covariance + mean * mean.transpose(); }
};

/// Symplectic eigenvalues nu_1 <= ... <= nu_N read off the spectrum of JV,
/// whose eigenvalues come in pairs +-i nu.
template <typename Derived>
VectorX<typename Derived::Scalar> symplectic_eigenvalues(const Eigen::MatrixBase<Derived>& v,
                                                         double pair_tol = kDefaultTol) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  const ModeLayout layout = ModeLayout::of(v.rows(), v.cols());
  const int n = layout.modes();
  const MatrixX<Scalar> jv = symplectic_form<Scalar>(layout) * v;
  Eigen::EigenSolver<MatrixX<Scalar>> solver(jv, false);
  if (solver.info() != Eigen::Success) throw PairingError("eigenvalue computation of JV failed");
  const auto& mu = solver.eigenvalues();

  Scalar scale(0);
  std::vector<Scalar> imag;
  imag.reserve(mu.size());
  for (Index i = 0; i < mu.size(); ++i) {
    scale = std::max<Scalar>(scale, abs(mu(i)));
    imag.push_back(mu(i).imag());
  }
  const Scalar tol = Scalar(pair_tol) * std::max<Scalar>(scale, Scalar(1e-300));
  for (Index i = 0; i < mu.size(); ++i) {
    if (abs(mu(i).real()) > tol)
      throw PairingError("JV has an eigenvalue with non-zero real part; input is not positive definite");
  }
  std::sort(imag.begin(), imag.end());
  VectorX<Scalar> nu(n);
  for (int k = 0; k < n; ++k) {
    const Scalar neg = imag[static_cast<std::size_t>(n - 1 - k)];
    const Scalar pos = imag[static_cast<std::size_t>(n + k)];
    if (abs(pos + neg) > tol || pos <= Scalar(0))
      throw PairingError("eigenvalues of JV do not form conjugate imaginary pairs");
    nu(k) = pos;
  }
  return nu;
}

/// Smallest eigenvalue of the Hermitian matrix V + (i/2) J.
double min_uncertainty_eigenvalue(const Matrix& v);

/// V + (i/2) J >= -tol.
inline bool check_uncertainty(const Matrix& v, double tol = kDefaultTol) {
  return min_uncertainty_eigenvalue(v) >= -tol;
}

/// Q V Q with Q flipping the p-quadrature of every listed mode (0-based).
template <typename Derived>
MatrixX<typename Derived::Scalar> partial_transpose(const Eigen::MatrixBase<Derived>& v,
                                                    std::span<const int> transposed_modes) {
  using Scalar = typename Derived::Scalar;
  const ModeLayout layout = ModeLayout::of(v.rows(), v.cols());
  std::vector<bool> flip(static_cast<std::size_t>(layout.modes()), false);
  int count = 0;
  for (int m : transposed_modes) {
    if (m < 0 || m >= layout.modes()) throw DomainError("mode index out of range: " + std::to_string(m));
    if (!flip[static_cast<std::size_t>(m)]) ++count;
    flip[static_cast<std::size_t>(m)] = true;
  }
  if (count == 0 || count == layout.modes())
    throw DomainError("partial transpose needs a non-empty proper subset of modes");

  VectorX<Scalar> q = VectorX<Scalar>::Ones(layout.dim());
  for (int m = 0; m < layout.modes(); ++m)
    if (flip[static_cast<std::size_t>(m)]) q(ModeLayout::p_index(m)) = Scalar(-1);
  return q.asDiagonal() * v * q.asDiagonal();
}

template <typename Derived>
MatrixX<typename Derived::Scalar> partial_transpose(const Eigen::MatrixBase<Derived>& v,
                                                    std::initializer_list<int> modes) {
  return partial_transpose(v, std::span<const int>(modes.begin(), modes.size()));
}

}  // namespace qgd
