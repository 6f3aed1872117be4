#include "qgd/fock.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace qgd {

namespace {

/// Single-mode x and p at the given cutoff.
std::pair<CMatrix, CMatrix> mode_quadratures(int cutoff) {
  CMatrix a = CMatrix::Zero(cutoff, cutoff);
  for (int n = 1; n < cutoff; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  const CMatrix ad = a.adjoint();
  const double s = 1.0 / std::sqrt(2.0);
  CMatrix x = s * (a + ad);
  CMatrix p = Complex(0.0, -s) * (a - ad);
  // exact Hermitian parts; the construction is Hermitian up to round-off only
  x = (x + x.adjoint()).eval() / 2.0;
  p = (p + p.adjoint()).eval() / 2.0;
  return {x, p};
}

/// I (x) ... (x) op (at `mode`) (x) ... (x) I, mode 0 most significant.
CMatrix embed(const CMatrix& op, int mode, int n_modes, int cutoff) {
  CMatrix out = CMatrix::Identity(1, 1);
  for (int m = 0; m < n_modes; ++m) {
    const CMatrix factor = m == mode ? op : CMatrix::Identity(cutoff, cutoff);
    out = Eigen::kroneckerProduct(out, factor).eval();
  }
  return out;
}

CMatrix single_mode_product(int cutoff, Index k, Index l) {
  // one extra level keeps every retained element of the product exact
  const auto [x, p] = mode_quadratures(cutoff + 1);
  const CMatrix& qk = k % 2 == 0 ? x : p;
  const CMatrix& ql = l % 2 == 0 ? x : p;
  return (qk * ql).topLeftCorner(cutoff, cutoff);
}

Complex trace_product(const CMatrix& rho, const CMatrix& op) { return (rho.transpose().cwiseProduct(op)).sum(); }

void check_weights(const std::vector<CMatrix>& generators, const std::vector<double>& gammas) {
  if (generators.size() != gammas.size()) throw DimensionError("one weight per generator required");
  if (generators.empty()) throw ValidationError("at least one generator required");
  double total = 0.0;
  for (double g : gammas) {
    if (!(g >= 0.0)) throw DomainError("channel weights must be >= 0");
    total += g;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("channel weights must sum to 1");
  const Index d = generators.front().rows();
  for (const auto& h : generators)
    if (h.rows() != d || h.cols() != d) throw DimensionError("generators differ in dimension");
}

CMatrix hermitian_part(const CMatrix& m) { return (m + m.adjoint()) / 2.0; }

}  // namespace

FockSystem build_fock_system(int n_modes, int cutoff, Index max_dimension) {
  if (n_modes < 1) throw DomainError("mode count must be >= 1");
  if (cutoff < 4) throw DomainError("Fock cutoff must be >= 4");
  Index dim = 1;
  for (int m = 0; m < n_modes; ++m) {
    dim *= cutoff;
    if (dim > max_dimension)
      throw MemoryGuardError("Fock dimension " + std::to_string(cutoff) + "^" + std::to_string(n_modes) +
                             " exceeds the cap " + std::to_string(max_dimension));
  }
  FockSystem sys;
  sys.n_modes = n_modes;
  sys.cutoff = cutoff;
  sys.dimension = dim;
  const auto [x, p] = mode_quadratures(cutoff);
  for (int m = 0; m < n_modes; ++m) {
    sys.quadratures.push_back(embed(x, m, n_modes, cutoff));
    sys.quadratures.push_back(embed(p, m, n_modes, cutoff));
  }
  return sys;
}

CMatrix quadrature_product(const FockSystem& sys, Index k, Index l) {
  const Index n = 2 * static_cast<Index>(sys.n_modes);
  if (k < 0 || l < 0 || k >= n || l >= n) throw DomainError("quadrature index out of range");
  const int mk = static_cast<int>(k / 2), ml = static_cast<int>(l / 2);
  if (mk != ml) return sys.quadratures[static_cast<std::size_t>(k)] * sys.quadratures[static_cast<std::size_t>(l)];
  return embed(single_mode_product(sys.cutoff, k, l), mk, sys.n_modes, sys.cutoff);
}

CMatrix quadratic_operator(const FockSystem& sys, const Matrix& h) {
  const Index n = 2 * static_cast<Index>(sys.n_modes);
  if (h.rows() != n || h.cols() != n) throw DimensionError("quadratic form must be 2N x 2N");
  CMatrix out = CMatrix::Zero(sys.dimension, sys.dimension);
  for (Index k = 0; k < n; ++k) {
    for (Index l = k; l < n; ++l) {
      const CMatrix prod = quadrature_product(sys, k, l);
      if (k == l) {
        if (h(k, k) != 0.0) out += 0.5 * h(k, k) * prod;
        continue;
      }
      // H_kl xi_k xi_l + H_lk xi_l xi_k with xi_l xi_k = (xi_k xi_l)^dag
      const double w = 0.5 * (h(k, l) + h(l, k));
      if (w != 0.0) out += 0.5 * w * (prod + prod.adjoint());
    }
  }
  return hermitian_part(out);
}

CMatrix displacement_generator(const FockSystem& sys, const Vector& d) {
  const Index n = 2 * static_cast<Index>(sys.n_modes);
  if (d.size() != n) throw DimensionError("displacement must have length 2N");
  const Vector jd = symplectic_form(ModeLayout(sys.n_modes)) * d;
  CMatrix out = CMatrix::Zero(sys.dimension, sys.dimension);
  for (Index k = 0; k < n; ++k) out -= jd(k) * sys.quadratures[static_cast<std::size_t>(k)];
  return out;
}

CMatrix unitary_from_generator(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian_part(h));
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of the generator failed");
  const CVector phases = (Complex(0.0, -1.0) * eig.eigenvalues().cast<Complex>()).array().exp();
  return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

CMatrix vacuum_density(const FockSystem& sys) {
  CMatrix rho = CMatrix::Zero(sys.dimension, sys.dimension);
  rho(0, 0) = 1.0;
  return rho;
}

double leakage(const FockSystem& sys, const CMatrix& rho) {
  if (rho.rows() != sys.dimension) throw DimensionError("density matrix does not match the Fock system");
  const int top = static_cast<int>(std::ceil(0.1 * sys.cutoff));
  const int first = sys.cutoff - top;
  std::vector<double> mass(static_cast<std::size_t>(sys.n_modes), 0.0);
  for (Index i = 0; i < sys.dimension; ++i) {
    const double p = rho(i, i).real();
    Index rest = i;
    for (int m = sys.n_modes - 1; m >= 0; --m) {
      const int level = static_cast<int>(rest % sys.cutoff);
      rest /= sys.cutoff;
      if (level >= first) mass[static_cast<std::size_t>(m)] += p;
    }
  }
  return *std::max_element(mass.begin(), mass.end());
}

CMatrix gkls_propagate(const std::vector<CMatrix>& generators, const std::vector<double>& gammas, const CMatrix& rho0,
                       double t, double tol) {
  check_weights(generators, gammas);
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("time must be finite and >= 0");
  if (rho0.rows() != generators.front().rows() || rho0.cols() != rho0.rows())
    throw DimensionError("density matrix does not match the generators");

  std::vector<CMatrix> unitaries;
  unitaries.reserve(generators.size());
  for (const auto& h : generators) unitaries.push_back(unitary_from_generator(h));

  auto apply = [&](const CMatrix& r) {
    CMatrix out = -std::accumulate(gammas.begin(), gammas.end(), 0.0) * r;
    CMatrix tmp(r.rows(), r.cols());
    for (std::size_t j = 0; j < unitaries.size(); ++j) {
      if (gammas[j] == 0.0) continue;
      tmp.noalias() = unitaries[j] * r;
      out.noalias() += gammas[j] * (tmp * unitaries[j].adjoint());
    }
    return out;
  };

  // ||L|| <= 2 in the trace norm; sub-steps with h ||L|| <= 1 keep the Taylor terms decreasing
  const int steps = std::max(1, static_cast<int>(std::ceil(2.0 * t)));
  const double h = t / steps;
  CMatrix rho = rho0;
  if (t == 0.0) return rho;
  constexpr int kMaxOrder = 200;
  for (int s = 0; s < steps; ++s) {
    CMatrix term = rho;
    CMatrix acc = rho;
    int k = 1;
    for (; k <= kMaxOrder; ++k) {
      term = (h / k) * apply(term);
      acc += term;
      if (term.cwiseAbs().maxCoeff() < tol) break;
    }
    if (k > kMaxOrder) throw IntegrationError("Taylor step failed to converge", s * h);
    rho = std::move(acc);
  }

  const double scale = std::max(1.0, rho0.cwiseAbs().maxCoeff());
  const double trace_drift = std::abs(rho.trace() - rho0.trace());
  if (trace_drift > 1e-9 * scale) throw IntegrationError("trace drifted by " + std::to_string(trace_drift), t);
  const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-9 * scale) throw IntegrationError("Hermiticity lost by " + std::to_string(herm), t);
  return hermitian_part(rho);
}

DensityState gkls_integrate(const FockSystem& sys, const std::vector<CMatrix>& generators,
                            const std::vector<double>& gammas, const CMatrix& rho0, double t,
                            const GklsOptions& options) {
  if (rho0.rows() != sys.dimension) throw DimensionError("density matrix does not match the Fock system");
  DensityState out;
  out.matrix = gkls_propagate(generators, gammas, rho0, t, options.tol);
  out.leakage = leakage(sys, out.matrix);
  if (options.enforce_leakage && out.leakage > options.leakage_threshold)
    throw LeakageExceeded("Fock leakage " + std::to_string(out.leakage) + " exceeds " +
                              std::to_string(options.leakage_threshold) + "; raise the cutoff or shorten t",
                          out.leakage);
  return out;
}

CMatrix spectral_solution(const CMatrix& h, const CMatrix& rho0, double t) {
  if (h.rows() != h.cols() || rho0.rows() != h.rows() || rho0.cols() != h.cols())
    throw DimensionError("generator and density matrix differ in dimension");
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian_part(h));
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of the generator failed");
  const CMatrix& q = eig.eigenvectors();
  const Vector& e = eig.eigenvalues();
  CMatrix r = q.adjoint() * rho0 * q;
  for (Index k = 0; k < r.rows(); ++k) {
    for (Index kp = 0; kp < r.cols(); ++kp) {
      const double delta = e(k) - e(kp);
      r(k, kp) *= std::exp(Complex((std::cos(delta) - 1.0) * t, -std::sin(delta) * t));
    }
  }
  return hermitian_part(q * r * q.adjoint());
}

GaussianMoments extract_moments(const FockSystem& sys, const CMatrix& rho, double leakage_threshold) {
  const double leak = leakage(sys, rho);
  if (leak > leakage_threshold)
    throw LeakageExceeded("Fock leakage " + std::to_string(leak) + " exceeds " + std::to_string(leakage_threshold),
                          leak);
  const Index n = 2 * static_cast<Index>(sys.n_modes);
  Vector xi(n);
  for (Index k = 0; k < n; ++k) xi(k) = trace_product(rho, sys.quadratures[static_cast<std::size_t>(k)]).real();
  Matrix v(n, n);
  for (Index k = 0; k < n; ++k) {
    for (Index l = k; l < n; ++l) {
      // (1/2) tr(rho {A, B}) = Re tr(rho A B) for Hermitian rho, A, B
      v(k, l) = trace_product(rho, quadrature_product(sys, k, l)).real() - xi(k) * xi(l);
      v(l, k) = v(k, l);
    }
  }
  return GaussianMoments(std::move(v), std::move(xi));
}

double trace_norm(const CMatrix& a) {
  return Eigen::BDCSVD<CMatrix>(a).singularValues().sum();
}

double controlled_unitary_check(const std::vector<CMatrix>& generators, Index max_dimension) {
  if (generators.empty()) throw ValidationError("at least one generator required");
  const Index d = generators.front().rows();
  const Index m = static_cast<Index>(generators.size());
  const Index total = d * (m + 1);
  if (total > max_dimension)
    throw MemoryGuardError("controlled-unitary dimension " + std::to_string(total) + " exceeds the cap " +
                           std::to_string(max_dimension));

  auto projector = [&](Index j) {
    CMatrix p = CMatrix::Zero(m + 1, m + 1);
    p(j, j) = 1.0;
    return p;
  };
  CMatrix g = CMatrix::Zero(total, total);
  CMatrix expected = Eigen::kroneckerProduct(CMatrix::Identity(d, d), projector(0)).eval();
  for (Index j = 1; j <= m; ++j) {
    const CMatrix& h = generators[static_cast<std::size_t>(j - 1)];
    if (h.rows() != d || h.cols() != d) throw DimensionError("generators differ in dimension");
    g += Eigen::kroneckerProduct(h, projector(j)).eval();
    expected += Eigen::kroneckerProduct(unitary_from_generator(h), projector(j)).eval();
  }
  const CMatrix direct = (Complex(0.0, -1.0) * g).exp();
  return (direct - expected).cwiseAbs().maxCoeff();
}

CollisionResiduals collision_step_check(const std::vector<CMatrix>& generators, const std::vector<double>& gammas,
                                        double dt, const CMatrix& rho0, Index max_dimension) {
  check_weights(generators, gammas);
  if (!(dt >= 0.0 && dt <= 0.1)) throw DomainError("collision step needs 0 <= dt <= 0.1");
  const Index d = generators.front().rows();
  const Index m = static_cast<Index>(generators.size());
  const Index na = m + 1;
  if (d * na > max_dimension)
    throw MemoryGuardError("collision-step dimension " + std::to_string(d * na) + " exceeds the cap " +
                           std::to_string(max_dimension));
  if (rho0.rows() != d || rho0.cols() != d) throw DimensionError("density matrix does not match the generators");

  // O(dt): Householder reflection sending |0> to the prescribed first column c
  Vector c(na);
  c(0) = std::sqrt(1.0 - dt);
  for (Index j = 1; j <= m; ++j) c(j) = std::sqrt(gammas[static_cast<std::size_t>(j - 1)] * dt);
  Vector v = -c;
  v(0) += 1.0;
  Matrix o = Matrix::Identity(na, na);
  if (v.squaredNorm() > 0.0) o -= 2.0 * v * v.transpose() / v.squaredNorm();

  std::vector<CMatrix> unitaries;
  for (const auto& h : generators) unitaries.push_back(unitary_from_generator(h));

  CMatrix control = CMatrix::Zero(d * na, d * na);
  for (Index j = 0; j < na; ++j) {
    CMatrix p = CMatrix::Zero(na, na);
    p(j, j) = 1.0;
    const CMatrix u = j == 0 ? CMatrix::Identity(d, d) : unitaries[static_cast<std::size_t>(j - 1)];
    control += Eigen::kroneckerProduct(u, p).eval();
  }
  const CMatrix w = control * Eigen::kroneckerProduct(CMatrix::Identity(d, d), o.cast<Complex>()).eval();
  CMatrix ancilla0 = CMatrix::Zero(na, na);
  ancilla0(0, 0) = 1.0;
  const CMatrix joint = w * Eigen::kroneckerProduct(rho0, ancilla0).eval() * w.adjoint();

  CMatrix reduced = CMatrix::Zero(d, d);
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b)
      for (Index alpha = 0; alpha < na; ++alpha) reduced(a, b) += joint(a * na + alpha, b * na + alpha);

  CMatrix first_order = rho0;
  for (std::size_t j = 0; j < unitaries.size(); ++j)
    first_order += dt * gammas[j] * (unitaries[j] * rho0 * unitaries[j].adjoint() - rho0);
  const CMatrix continuum = gkls_propagate(generators, gammas, rho0, dt, 1e-15);

  return {(reduced - first_order).cwiseAbs().maxCoeff(), (reduced - continuum).cwiseAbs().maxCoeff()};
}

}  // namespace qgd
