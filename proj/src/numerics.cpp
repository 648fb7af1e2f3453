#include "qfilt/numerics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

namespace qfilt {

namespace {

std::string shape(const CMatrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

}  // namespace

void require_square(const CMatrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": expected square matrix, got " + shape(m));
  }
}

void require_same_shape(const CMatrix& a, const CMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

CMatrix identity(Eigen::Index dim) { return CMatrix::Identity(dim, dim); }

CMatrix adjoint(const CMatrix& a) { return a.adjoint(); }

CMatrix matmul(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ (" + shape(a) + " * " + shape(b) + ")");
  }
  return a * b;
}

CMatrix commutator(const CMatrix& a, const CMatrix& b) {
  require_square(a, "commutator");
  require_same_shape(a, b, "commutator");
  return a * b - b * a;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CMatrix expm(const CMatrix& a) {
  require_square(a, "expm");
  if (!all_finite(a)) throw std::domain_error("expm: non-finite input");
  CMatrix out = a.exp();
  if (!all_finite(out)) throw std::domain_error("expm: result overflowed");
  return out;
}

Eigh eigh(const CMatrix& a) {
  require_square(a, "eigh");
  if (!is_hermitian(a, 1e-10)) {
    throw std::invalid_argument("eigh: input is not Hermitian (defect " +
                                std::to_string(hermiticity_defect(a)) + ")");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitize(a));
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigh: solver did not converge");
  Eigh out;
  out.eigenvalues.assign(solver.eigenvalues().data(),
                         solver.eigenvalues().data() + solver.eigenvalues().size());
  out.eigenvectors = solver.eigenvectors();
  return out;
}

double hermiticity_defect(const CMatrix& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

bool is_hermitian(const CMatrix& a, double tol) { return hermiticity_defect(a) <= tol; }

CMatrix hermitize(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

bool all_finite(const CMatrix& a) { return a.allFinite(); }

double max_abs(const CMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double trace_re(const CMatrix& a) { return a.trace().real(); }

double trace_product_re(const CMatrix& a, const CMatrix& b) {
  // tr(ab) = sum_ij a_ij b_ji
  return (a.array() * b.transpose().array()).sum().real();
}

double trace_distance(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "trace_distance");
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitize(a - b), Eigen::EigenvaluesOnly);
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

double min_eigenvalue(const CMatrix& a) {
  if (a.rows() == 2 && a.cols() == 2) {
    const double p = a(0, 0).real();
    const double q = a(1, 1).real();
    const double off = std::abs(0.5 * (a(0, 1) + std::conj(a(1, 0))));
    return 0.5 * (p + q) - std::hypot(0.5 * (p - q), off);
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitize(a), Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream_index) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(stream_index + 0x632BE59BD9B4E019ULL));
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : master_seed_(master_seed),
      stream_index_(stream_index),
      engine_(derive_seed(master_seed, stream_index)) {}

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform() { return uniform_(engine_); }

RngStream RngStream::child(std::uint64_t index) const {
  return RngStream(derive_seed(master_seed_, stream_index_), index);
}

CMatrix random_complex(Eigen::Index dim, RngStream& rng) {
  CMatrix a(dim, dim);
  const double s = std::sqrt(0.5);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double re = rng.normal();
      const double im = rng.normal();
      a(i, j) = Complex{s * re, s * im};
    }
  }
  return a;
}

CMatrix random_hermitian(Eigen::Index dim, RngStream& rng) {
  CMatrix a = random_complex(dim, rng);
  return a + a.adjoint();
}

CMatrix random_density(Eigen::Index dim, RngStream& rng) {
  CMatrix g = random_complex(dim, rng);
  CMatrix rho = g * g.adjoint();
  return hermitize(rho / trace_re(rho));
}

Eigen::Matrix2d quadrature_covariance(double nbar) {
  if (!(nbar >= 0.0)) throw std::invalid_argument("quadrature_covariance: nbar must be >= 0");
  const double diag = 2.0 * nbar + 1.0;
  const double off = 2.0 * std::sqrt(nbar * (nbar + 1.0));
  Eigen::Matrix2d c;
  c << diag, off, off, diag;
  return c;
}

Eigen::Matrix2d quadrature_cholesky(double nbar) {
  if (!(nbar >= 0.0)) throw std::invalid_argument("quadrature_cholesky: nbar must be >= 0");
  // det = 1, so the (1,1) entry of the factor is the reciprocal of the (0,0) entry.
  const double l00 = std::sqrt(2.0 * nbar + 1.0);
  const double l10 = 2.0 * std::sqrt(nbar * (nbar + 1.0)) / l00;
  Eigen::Matrix2d l;
  l << l00, 0.0, l10, 1.0 / l00;
  return l;
}

NoisePair sample_noise_pair(double nbar, double dt, RngStream& rng) {
  if (!(nbar >= 0.0)) throw std::invalid_argument("sample_noise_pair: nbar must be >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("sample_noise_pair: dt must be > 0");
  const Eigen::Matrix2d l = quadrature_cholesky(nbar);
  const double w1 = rng.normal();
  const double w2 = rng.normal();
  const double s = std::sqrt(dt);
  return {s * l(0, 0) * w1, s * (l(1, 0) * w1 + l(1, 1) * w2)};
}

}  // namespace qfilt
