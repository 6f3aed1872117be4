#include "oracles.hpp"
#include "qgd/entanglement.hpp"
#include "qgd/fock.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace qgd;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }
double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

CMatrix random_hermitian(Index dim, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix a(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) a(i, j) = Complex(n(rng), n(rng));
  return scale * (a + a.adjoint()) / 2.0;
}

CMatrix random_density(Index dim, std::mt19937_64& rng) {
  const CMatrix a = random_hermitian(dim, 1.0, rng);
  CMatrix rho = a * a.adjoint();
  return rho / rho.trace();
}

CMatrix conjugate(const CMatrix& u, const CMatrix& rho) { return u * rho * u.adjoint(); }

Matrix single_mode_squeeze(double a) {
  Matrix s = Matrix::Zero(2, 2);
  s(0, 0) = a;
  s(1, 1) = -a;
  return s;
}

}  // namespace

TEST_CASE("truncated quadratures") {
  const FockSystem sys = build_fock_system(1, 10);
  CHECK(sys.dimension == 10);
  const CMatrix& x = sys.quadratures[0];
  const CMatrix& p = sys.quadratures[1];
  CHECK(max_abs(CMatrix(x - x.adjoint())) == 0.0);
  CHECK(max_abs(CMatrix(p - p.adjoint())) == 0.0);
  // [x, p] = i away from the top level
  const CMatrix comm = x * p - p * x;
  CHECK(max_abs(CMatrix(comm.topLeftCorner(9, 9) - Complex(0.0, 1.0) * CMatrix::Identity(9, 9))) < 1e-14);

  const GaussianMoments vac = extract_moments(sys, vacuum_density(sys));
  CHECK(max_abs(Matrix(vac.covariance - 0.5 * Matrix::Identity(2, 2))) < 1e-15);
  CHECK(vac.mean.norm() == 0.0);

  // same-mode products are exact on every retained element
  const CMatrix xx = quadrature_product(sys, 0, 0);
  CHECK(xx(9, 9).real() == doctest::Approx(9.5).epsilon(1e-14));

  CHECK(build_fock_system(2, 12).dimension == 144);
  CHECK_THROWS_AS(build_fock_system(3, 20), MemoryGuardError);
  CHECK_THROWS_AS(build_fock_system(1, 3), DomainError);
  CHECK_THROWS_AS(quadrature_product(sys, 0, 2), DomainError);
}

TEST_CASE("Gaussian unitaries on the Fock space") {
  const FockSystem sys = build_fock_system(1, 30);
  const CMatrix vac = vacuum_density(sys);
  SUBCASE("displacement") {
    Vector d(2);
    d << 0.5, -0.3;
    const CMatrix rho = conjugate(unitary_from_generator(displacement_generator(sys, d)), vac);
    const GaussianMoments m = extract_moments(sys, rho);
    CHECK((m.mean - d).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(max_abs(Matrix(m.covariance - 0.5 * Matrix::Identity(2, 2))) < 1e-10);
  }
  SUBCASE("squeeze kick maps the vacuum to K V K^T") {
    const Matrix s = single_mode_squeeze(0.3);
    const CMatrix rho = conjugate(unitary_from_generator(quadratic_operator(sys, s)), vac);
    const Matrix k = symplectic_exp(SymmetricGenerator(s)).matrix();
    const GaussianMoments m = extract_moments(sys, rho);
    CHECK(max_abs(Matrix(m.covariance - 0.5 * k * k.transpose())) < 1e-6);
    CHECK(std::abs(rho.trace().real() - 1.0) < 1e-12);
  }
  SUBCASE("two-mode squeezing with mode-crossing products") {
    const FockSystem two = build_fock_system(2, 16);
    const auto [g, k] = squeeze_channel(0.2);
    const CMatrix rho = conjugate(unitary_from_generator(quadratic_operator(two, g.matrix())), vacuum_density(two));
    const GaussianMoments m = extract_moments(two, rho, 1e-5);
    CHECK(max_abs(Matrix(m.covariance - 0.5 * k.matrix() * k.matrix().transpose())) < 1e-6);
  }
}

TEST_CASE("GKLS propagation") {
  std::mt19937_64 rng(21);
  SUBCASE("t = 0 and states commuting with U are stationary") {
    const CMatrix h = random_hermitian(5, 1.0, rng);
    const CMatrix rho = random_density(5, rng);
    CHECK(max_abs(CMatrix(gkls_propagate({h}, {1.0}, rho, 0.0) - rho)) == 0.0);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(h);
    const CVector weights = CVector::LinSpaced(5, 1.0, 5.0) / 15.0;
    const CMatrix commuting = eig.eigenvectors() * weights.asDiagonal() * eig.eigenvectors().adjoint();
    CHECK(max_abs(CMatrix(gkls_propagate({h}, {1.0}, commuting, 3.0) - commuting)) < 1e-12);
  }
  SUBCASE("spectral law agrees with the integrator") {
    for (int trial = 0; trial < 10; ++trial) {
      const CMatrix h = random_hermitian(6, 1.5, rng);
      const CMatrix rho = random_density(6, rng);
      for (double t : {0.3, 2.0, 7.0}) {
        const CMatrix a = spectral_solution(h, rho, t);
        const CMatrix b = gkls_propagate({h}, {1.0}, rho, t);
        CHECK(trace_norm(a - b) <= 1e-8);
        CHECK(std::abs(b.trace() - 1.0) < 1e-12);
        // populations in the eigenbasis of h never move
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(h);
        const CMatrix q = eig.eigenvectors();
        const CVector before = (q.adjoint() * rho * q).diagonal();
        const CVector after = (q.adjoint() * a * q).diagonal();
        CHECK(max_abs(CMatrix(after - before)) <= 1e-12);
      }
    }
  }
  SUBCASE("gaps on the 2 pi lattice freeze the state") {
    Eigen::HouseholderQR<CMatrix> qr(random_hermitian(4, 1.0, rng));
    const CMatrix q = qr.householderQ();
    CVector e(4);
    e << 0.0, 2.0 * std::numbers::pi, 4.0 * std::numbers::pi, -2.0 * std::numbers::pi;
    const CMatrix h = q * e.asDiagonal() * q.adjoint();
    const CMatrix rho = random_density(4, rng);
    CHECK(max_abs(CMatrix(spectral_solution(h, rho, 5.0) - rho)) < 1e-12);
    CHECK(max_abs(CMatrix(gkls_propagate({h}, {1.0}, rho, 5.0) - rho)) < 1e-10);
  }
  SUBCASE("off-lattice coherences die out") {
    const CMatrix h = random_hermitian(4, 1.0, rng);
    const CMatrix rho = random_density(4, rng);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(h);
    const CMatrix q = eig.eigenvectors();
    const CMatrix late = q.adjoint() * spectral_solution(h, rho, 200.0) * q;
    for (Index k = 0; k < 4; ++k)
      for (Index kp = 0; kp < 4; ++kp) {
        if (k == kp) continue;
        const double delta = eig.eigenvalues()(k) - eig.eigenvalues()(kp);
        CHECK(std::abs(late(k, kp)) <= std::exp((std::cos(delta) - 1.0) * 200.0) + 1e-15);
      }
  }
  SUBCASE("input validation") {
    const CMatrix h = random_hermitian(3, 1.0, rng);
    const CMatrix rho = random_density(3, rng);
    CHECK_THROWS_AS(gkls_propagate({h}, {0.9}, rho, 1.0), ValidationError);
    CHECK_THROWS_AS(gkls_propagate({h}, {1.0}, rho, -1.0), DomainError);
    CHECK_THROWS_AS(gkls_propagate({h}, {1.0}, random_density(4, rng), 1.0), DimensionError);
  }
}

TEST_CASE("Fock oracle against the phase-space solvers") {
  SUBCASE("passive rotation of a squeezed, displaced state") {
    const FockSystem sys = build_fock_system(1, 20);
    Vector d(2);
    d << 0.4, 0.1;
    const Matrix prep = single_mode_squeeze(0.2);
    const CMatrix rho0 = conjugate(unitary_from_generator(displacement_generator(sys, d)),
                                   conjugate(unitary_from_generator(quadratic_operator(sys, prep)), vacuum_density(sys)));
    const GaussianMoments m0 = extract_moments(sys, rho0);
    const SymmetricGenerator rot(0.9 * Matrix::Identity(2, 2));
    const ChannelSet set({UnitaryChannel::from_generator(1.0, rot)});
    const DensityState out = gkls_integrate(sys, {quadratic_operator(sys, rot.matrix())}, {1.0}, rho0, 1.0);
    CHECK(std::abs(out.matrix.trace() - 1.0) < 1e-12);
    CHECK(max_abs(CMatrix(out.matrix - out.matrix.adjoint())) == 0.0);
    const GaussianMoments fock = extract_moments(sys, out.matrix);
    const GaussianMoments phase = series_evolve(set, m0, 1.0);
    CHECK(max_abs(Matrix(fock.covariance - phase.covariance)) <= 1e-4);
    CHECK((fock.mean - phase.mean).cwiseAbs().maxCoeff() <= 1e-4);
  }
  SUBCASE("leakage is reported and enforced") {
    const FockSystem sys = build_fock_system(1, 8);
    Vector d(2);
    d << 2.0, 0.0;
    const CMatrix rho = conjugate(unitary_from_generator(displacement_generator(sys, d)), vacuum_density(sys));
    CHECK(leakage(sys, rho) > 1e-3);
    CHECK_THROWS_AS(extract_moments(sys, rho), LeakageExceeded);
    const CMatrix h = quadratic_operator(sys, Matrix::Identity(2, 2));
    CHECK_THROWS_AS(gkls_integrate(sys, {h}, {1.0}, rho, 0.1), LeakageExceeded);
    GklsOptions lenient;
    lenient.enforce_leakage = false;
    CHECK(gkls_integrate(sys, {h}, {1.0}, rho, 0.1, lenient).leakage > 1e-3);
  }
}

TEST_CASE("controlled-unitary identity") {
  std::mt19937_64 rng(8);
  const FockSystem sys = build_fock_system(1, 8);
  const CMatrix h1 = quadratic_operator(sys, Matrix::Identity(2, 2));
  const CMatrix h2 = quadratic_operator(sys, single_mode_squeeze(0.4)) + random_hermitian(8, 0.2, rng);
  CHECK(controlled_unitary_check({h1}) <= 1e-10);
  CHECK(controlled_unitary_check({h1, h2}) <= 1e-10);
  CHECK(controlled_unitary_check({CMatrix(CMatrix::Zero(8, 8))}) <= 1e-15);
  CHECK_THROWS_AS(controlled_unitary_check({h1, h2}, 20), MemoryGuardError);
}

TEST_CASE("collision step") {
  std::mt19937_64 rng(13);
  const CMatrix h1 = random_hermitian(4, 1.0, rng);
  const CMatrix h2 = random_hermitian(4, 1.0, rng);
  const CMatrix rho = random_density(4, rng);
  const std::vector<double> gammas{0.4, 0.6};

  const CollisionResiduals zero = collision_step_check({h1, h2}, gammas, 0.0, rho);
  CHECK(zero.first_order == 0.0);
  CHECK(zero.continuum == 0.0);

  const CMatrix none = CMatrix::Zero(4, 4);
  const CollisionResiduals trivial = collision_step_check({none, none}, gammas, 0.05, rho);
  CHECK(trivial.first_order < 1e-15);
  CHECK(trivial.continuum < 1e-15);

  const CollisionResiduals a = collision_step_check({h1, h2}, gammas, 0.05, rho);
  const CollisionResiduals b = collision_step_check({h1, h2}, gammas, 0.025, rho);
  CHECK(a.first_order < 1e-14);
  CHECK(b.first_order < 1e-14);
  CHECK(a.continuum / b.continuum == doctest::Approx(4.0).epsilon(0.25));

  CHECK_THROWS_AS(collision_step_check({h1, h2}, gammas, 0.2, rho), DomainError);
  CHECK_THROWS_AS(collision_step_check({h1, h2}, {0.5, 0.6}, 0.05, rho), ValidationError);
}
