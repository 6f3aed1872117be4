#include "qgd/symplectic.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace qgd {

SymplecticMatrix symplectic_exp(const SymmetricGenerator& s, const ExpOptions& options) {
  const Matrix js = s.hamiltonian_matrix();
  const double norm1 = js.cwiseAbs().colwise().sum().maxCoeff();
  if (norm1 > options.max_norm)
    throw OverflowError("|JS|_1 = " + std::to_string(norm1) + " exceeds the exponential bound " +
                        std::to_string(options.max_norm));

  if (is_normal(js, options.normal_tol)) {
    // Schur form of a normal matrix is diagonal with unitary Schur vectors.
    Eigen::ComplexSchur<CMatrix> schur(js.cast<Complex>());
    const CMatrix& q = schur.matrixU();
    const CVector phases = schur.matrixT().diagonal().array().exp();
    const CMatrix k = q * phases.asDiagonal() * q.adjoint();
    return SymplecticMatrix::unchecked(k.real());
  }
  return SymplecticMatrix::unchecked(js.exp());
}

double min_uncertainty_eigenvalue(const Matrix& v) {
  const ModeLayout layout = ModeLayout::of(v.rows(), v.cols());
  const CMatrix h = symmetrized(v).cast<Complex>() + Complex(0.0, 0.5) * symplectic_form(layout).cast<Complex>();
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace qgd
