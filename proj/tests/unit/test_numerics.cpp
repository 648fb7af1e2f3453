#include <catch_amalgamated.hpp>

#include "qfilt/model.hpp"
#include "qfilt/numerics.hpp"

#include <cmath>

using namespace qfilt;
using Catch::Matchers::WithinAbs;

namespace {

CMatrix ket_bra(int i, int j) {
  CMatrix m = CMatrix::Zero(2, 2);
  m(i, j) = 1.0;
  return m;
}

// exp(A) by its Taylor series with scaling and squaring; independent of Eigen's Pade code.
CMatrix taylor_expm(const CMatrix& a) {
  int s = 0;
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.5) {
    norm /= 2.0;
    ++s;
  }
  const CMatrix x = a / std::pow(2.0, s);
  CMatrix term = CMatrix::Identity(a.rows(), a.cols());
  CMatrix sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

}  // namespace

TEST_CASE("matmul follows the Pauli algebra in the {g, e} basis") {
  const CMatrix ee = ket_bra(1, 1);
  CHECK(max_abs(matmul(sigma_plus(), sigma_minus()) - ee) == 0.0);
  CHECK(max_abs(matmul(identity(2), sigma_x()) - sigma_x()) == 0.0);
  RngStream rng(1, 0);
  const CMatrix a = random_complex(3, rng);
  const CMatrix b = random_complex(3, rng);
  CHECK(max_abs(adjoint(matmul(a, b)) - matmul(adjoint(b), adjoint(a))) < 1e-14);
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  CHECK_THROWS_AS(matmul(CMatrix::Zero(2, 3), CMatrix::Zero(2, 3)), DimensionError);
}

TEST_CASE("commutators of Pauli operators") {
  CHECK(max_abs(commutator(sigma_plus(), sigma_minus()) - sigma_z()) == 0.0);
  CHECK(max_abs(commutator(sigma_z(), sigma_minus()) + 2.0 * sigma_minus()) == 0.0);
  CHECK(max_abs(commutator(sigma_x(), sigma_x())) == 0.0);
  CHECK_THROWS_AS(commutator(sigma_x(), identity(3)), DimensionError);
}

TEST_CASE("kron orders the first factor slowest") {
  const CMatrix k = kron(ket_bra(0, 1), identity(2));
  CHECK(k.rows() == 4);
  CHECK(k(0, 2) == Complex(1.0));
  CHECK(k(1, 3) == Complex(1.0));
  CHECK(max_abs(k) == 1.0);
}

TEST_CASE("expm special cases") {
  CHECK(max_abs(expm(CMatrix::Zero(3, 3)) - identity(3)) == 0.0);

  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 0.3;
  d(1, 1) = Complex(-1.2, 0.5);
  const CMatrix e = expm(d);
  CHECK(std::abs(e(0, 0) - std::exp(Complex(0.3))) < 1e-14);
  CHECK(std::abs(e(1, 1) - std::exp(Complex(-1.2, 0.5))) < 1e-14);
  CHECK(std::abs(e(0, 1)) == 0.0);

  CHECK_THROWS_AS(expm(CMatrix::Zero(2, 3)), DimensionError);
}

TEST_CASE("expm of a skew-Hermitian matrix is unitary") {
  RngStream rng(2, 0);
  for (int dim = 2; dim <= 6; ++dim) {
    const CMatrix u = expm(Complex(0.0, 1.0) * random_hermitian(dim, rng));
    CHECK(max_abs(u.adjoint() * u - identity(dim)) < 1e-10);
  }
}

TEST_CASE("expm agrees with an independent Taylor evaluation") {
  RngStream rng(3, 0);
  for (int dim = 2; dim <= 8; dim += 2) {
    const CMatrix a = random_complex(dim, rng);
    CHECK(max_abs(expm(a) - taylor_expm(a)) < 1e-11 * std::max(1.0, max_abs(taylor_expm(a))));
  }
}

TEST_CASE("eigh closed forms") {
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  const Eigh a = eigh(d);
  CHECK_THAT(a.eigenvalues[0], WithinAbs(1.0, 1e-15));
  CHECK_THAT(a.eigenvalues[1], WithinAbs(2.0, 1e-15));
  CHECK(max_abs(a.eigenvectors.cwiseAbs() - CMatrix::Identity(2, 2)) < 1e-15);

  const Eigh x = eigh(sigma_x());
  CHECK_THAT(x.eigenvalues[0], WithinAbs(-1.0, 1e-15));
  CHECK_THAT(x.eigenvalues[1], WithinAbs(1.0, 1e-15));

  CHECK_THROWS_AS(eigh(sigma_plus()), std::invalid_argument);
}

TEST_CASE("eigh reconstructs random Hermitian matrices") {
  RngStream rng(4, 0);
  const CMatrix h = random_hermitian(5, rng);
  const Eigh e = eigh(h);
  Eigen::VectorXd lam(5);
  for (int i = 0; i < 5; ++i) lam(i) = e.eigenvalues[static_cast<std::size_t>(i)];
  const CMatrix back = e.eigenvectors * lam.cast<Complex>().asDiagonal() * e.eigenvectors.adjoint();
  CHECK(max_abs(back - h) < 1e-12);
  for (int i = 1; i < 5; ++i) CHECK(lam(i) >= lam(i - 1));
}

TEST_CASE("trace distance and minimum eigenvalue") {
  CHECK_THAT(trace_distance(projector_excited(), projector_ground()), WithinAbs(1.0, 1e-15));
  CHECK_THAT(trace_distance(projector_excited(), projector_excited()), WithinAbs(0.0, 1e-15));
  // |+><+| vs |e><e|: sqrt(1 - |<+|e>|^2) = 1/sqrt(2)
  CHECK_THAT(trace_distance(density_of(plus_state()), projector_excited()), WithinAbs(std::sqrt(0.5), 1e-14));

  RngStream rng(5, 0);
  for (int k = 0; k < 20; ++k) {
    const CMatrix h = random_hermitian(2, rng);
    CHECK_THAT(min_eigenvalue(h), WithinAbs(eigh(h).eigenvalues[0], 1e-12));
  }
}

TEST_CASE("quadrature covariance and its Cholesky factor") {
  const Eigen::Matrix2d l0 = quadrature_cholesky(0.0);
  CHECK((l0 - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::Matrix2d l1 = quadrature_cholesky(1.0);
  CHECK_THAT(l1(0, 0), WithinAbs(std::sqrt(3.0), 1e-15));
  CHECK_THAT(l1(0, 1), WithinAbs(0.0, 0.0));
  CHECK_THAT(l1(1, 0), WithinAbs(2.0 * std::sqrt(2.0) / std::sqrt(3.0), 1e-15));
  CHECK_THAT(l1(1, 1), WithinAbs(1.0 / std::sqrt(3.0), 1e-15));
  Eigen::Matrix2d c1;
  c1 << 3.0, 2.0 * std::sqrt(2.0), 2.0 * std::sqrt(2.0), 3.0;
  CHECK((l1 * l1.transpose() - c1).cwiseAbs().maxCoeff() < 1e-12);

  for (double n : {0.0, 0.25, 1.0, 3.7, 10.0, 100.0}) {
    CHECK_THAT(quadrature_covariance(n).determinant(), WithinAbs(1.0, 1e-12 * (2 * n + 1) * (2 * n + 1)));
    const Eigen::Matrix2d l = quadrature_cholesky(n);
    CHECK((l * l.transpose() - quadrature_covariance(n)).cwiseAbs().maxCoeff() < 1e-12 * (2 * n + 1));
  }
  CHECK_THROWS_AS(quadrature_cholesky(-0.1), std::invalid_argument);
}

TEST_CASE("noise pair validates its arguments") {
  RngStream rng(6, 0);
  CHECK_THROWS_AS(sample_noise_pair(-1.0, 1e-3, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_noise_pair(1.0, 0.0, rng), std::invalid_argument);
}

TEST_CASE("noise pair sample covariance at n = 0.5") {
  const double n = 0.5;
  const double dt = 0.01;
  const int N = 100000;
  RngStream rng(7, 0);
  double s00 = 0, s01 = 0, s11 = 0;
  for (int i = 0; i < N; ++i) {
    const NoisePair p = sample_noise_pair(n, dt, rng);
    s00 += p.dZ * p.dZ;
    s01 += p.dZ * p.dZp;
    s11 += p.dZp * p.dZp;
  }
  const double c00 = (2 * n + 1) * dt;
  const double c01 = 2 * std::sqrt(n * (n + 1)) * dt;
  // Var(x y) for a zero-mean Gaussian pair is c00 c11 + c01^2.
  const double se_diag = std::sqrt(2.0 / N) * c00;
  const double se_off = std::sqrt((c00 * c00 + c01 * c01) / N);
  CHECK(std::abs(s00 / N - c00) < 4 * se_diag);
  CHECK(std::abs(s11 / N - c00) < 4 * se_diag);
  CHECK(std::abs(s01 / N - c01) < 4 * se_off);
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, 3);
  RngStream b(42, 3);
  RngStream c(42, 4);
  bool differ = false;
  for (int i = 0; i < 10; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    if (x != c.normal()) differ = true;
  }
  CHECK(differ);

  const RngStream parent(42, 3);
  RngStream c1 = parent.child(0);
  RngStream c2 = parent.child(0);
  RngStream c3 = parent.child(1);
  const double u = c1.uniform();
  CHECK(u == c2.uniform());
  CHECK(u != c3.uniform());
  CHECK(u >= 0.0);
  CHECK(u < 1.0);
}

TEST_CASE("random operators have the requested structure") {
  RngStream rng(8, 0);
  CHECK(is_hermitian(random_hermitian(4, rng), 0.0));
  const CMatrix rho = random_density(3, rng);
  CHECK_THAT(trace_re(rho), WithinAbs(1.0, 1e-14));
  CHECK(min_eigenvalue(rho) > -1e-14);
  CHECK(hermiticity_defect(CMatrix::Zero(2, 3)) == INFINITY);
}
