#pragma once

// Two-mode squeezing dissipation: channel construction, closed-form
// covariance, PPT certification, Gaussian entropies and the coherent
// information lower bound on squashed entanglement.
//
// Everything below is templated on the scalar so that the large-time regime,
// where V has entries ~1e36 and symplectic gaps far below double epsilon,
// can be evaluated in extended precision.

#include "qgd/symplectic.hpp"

#include <boost/math/special_functions/log1p.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace qgd {

/// S_r (r on the anti-diagonal) and K_r = exp(J S_r) = cosh r I + sinh r [[0, 0, 1, 0],
/// [0, 0, 0, -1], [1, 0, 0, 0], [0, -1, 0, 0]].
inline std::pair<SymmetricGenerator, SymplecticMatrix> squeeze_channel(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("squeezing strength r must be > 0");
  Matrix s = Matrix::Zero(4, 4);
  s(0, 3) = s(3, 0) = r;
  s(1, 2) = s(2, 1) = r;
  Matrix k = Matrix::Zero(4, 4);
  const double c = std::cosh(r), sh = std::sinh(r);
  k.diagonal().setConstant(c);
  k(0, 2) = k(2, 0) = sh;
  k(1, 3) = k(3, 1) = -sh;
  return {SymmetricGenerator(s), SymplecticMatrix(k)};
}

/// V(t) from vacuum: A = a I2 on both modes, C = c diag(1, -1) off the diagonal, with
/// a = e^{2t sinh^2 r} cosh(t sinh 2r) / 2 and c = e^{2t sinh^2 r} sinh(t sinh 2r) / 2.
template <typename Scalar = double>
MatrixX<Scalar> closed_form_covariance(const Scalar& r, const Scalar& t, double max_entry = kDefaultMaxEntry) {
  using std::cosh;
  using std::exp;
  using std::sinh;
  if (!(r > Scalar(0))) throw DomainError("squeezing strength r must be > 0");
  if (!(t >= Scalar(0))) throw DomainError("time must be >= 0");
  const Scalar sr = sinh(r);
  const Scalar growth = exp(Scalar(2) * t * sr * sr) / Scalar(2);
  const Scalar a = growth * cosh(t * sinh(Scalar(2) * r));
  const Scalar c = growth * sinh(t * sinh(Scalar(2) * r));
  if (!(a <= Scalar(max_entry)))
    throw OverflowError("closed-form covariance entry exceeds " + std::to_string(max_entry));
  MatrixX<Scalar> v = MatrixX<Scalar>::Zero(4, 4);
  v.diagonal().setConstant(a);
  v(0, 2) = v(2, 0) = c;
  v(1, 3) = v(3, 1) = -c;
  return v;
}

inline GaussianMoments closed_form_V(double r, double t, double max_entry = kDefaultMaxEntry) {
  return GaussianMoments(closed_form_covariance<double>(r, t, max_entry));
}

/// f(x) = (x + 1/2) ln(x + 1/2) - (x - 1/2) ln(x - 1/2), the entropy of a thermal
/// mode with symplectic eigenvalue x; f(1/2) = 0.
template <typename Scalar>
Scalar entropy_f(Scalar x) {
  using std::log;
  const Scalar half(0.5);
  if (x < half - Scalar(1e-9)) throw DomainError("symplectic eigenvalue below 1/2: entropy undefined");
  if (x < half) x = half;
  const Scalar excess = x - half;
  if (excess < Scalar(1e-12)) {
    // f(1/2 + e) = -e ln e + e + O(e^2)
    if (excess == Scalar(0)) return Scalar(0);
    return excess * (Scalar(1) - log(excess));
  }
  return log(x + half) + excess * boost::math::log1p(Scalar(1) / excess);
}

template <typename Derived>
typename Derived::Scalar gaussian_entropy(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> nu = symplectic_eigenvalues(v);
  Scalar s(0);
  for (Index k = 0; k < nu.size(); ++k) s += entropy_f<Scalar>(nu(k));
  return s;
}

/// Smallest symplectic eigenvalue of the partial transpose on the second mode.
template <typename Derived>
typename Derived::Scalar ppt_min_nu(const Eigen::MatrixBase<Derived>& v) {
  if (v.rows() != 4 || v.cols() != 4) throw DimensionError("PPT test needs a two-mode (4x4) covariance");
  return symplectic_eigenvalues(partial_transpose(v, {1}))(0);
}

/// S(V_A) - S(V) with V_A the first mode's 2x2 block.
template <typename Derived>
typename Derived::Scalar coherent_information_bound(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.rows() != 4 || v.cols() != 4) throw DimensionError("coherent information needs a two-mode (4x4) covariance");
  const MatrixX<Scalar> va = v.topLeftCorner(2, 2);
  return gaussian_entropy(va) - gaussian_entropy(v);
}

/// The closed-form asymptote 4 sinh^2 r (coth r - 1). The finite-difference slope of
/// coherent_information_bound on closed_form_covariance tends to 1 - e^{-2r}, half of this.
inline double asymptotic_slope(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("squeezing strength r must be > 0");
  const double s = std::sinh(r);
  return 4.0 * s * s * (1.0 / std::tanh(r) - 1.0);
}

struct EntanglementReport {
  double time = 0.0;
  double min_ppt_nu = 0.0;
  bool entangled = false;
  double entropy_total = 0.0;
  double entropy_reduced = 0.0;
  double coherent_information = 0.0;
};

inline EntanglementReport entanglement_report(const Matrix& v, double time) {
  EntanglementReport out;
  out.time = time;
  out.min_ppt_nu = ppt_min_nu(v);
  out.entangled = out.min_ppt_nu < 0.5;
  out.entropy_total = gaussian_entropy(v);
  const Matrix va = v.topLeftCorner(2, 2);
  out.entropy_reduced = gaussian_entropy(va);
  out.coherent_information = out.entropy_reduced - out.entropy_total;
  return out;
}

}  // namespace qgd
