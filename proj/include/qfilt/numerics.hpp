#pragma once

// Small dense complex linear algebra, seeded random streams and the
// correlated quadrature-noise sampler.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qfilt {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr Complex kI{0.0, 1.0};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws DimensionError unless `m` is square.
void require_square(const CMatrix& m, const char* what);
void require_same_shape(const CMatrix& a, const CMatrix& b, const char* what);

CMatrix identity(Eigen::Index dim);
CMatrix adjoint(const CMatrix& a);

CMatrix matmul(const CMatrix& a, const CMatrix& b);

/// ab - ba.
CMatrix commutator(const CMatrix& a, const CMatrix& b);

/// Kronecker product, first factor is the slow (major) index.
CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Matrix exponential (scaling and squaring with a Pade core).
CMatrix expm(const CMatrix& a);

struct Eigh {
  std::vector<double> eigenvalues;  // ascending
  CMatrix eigenvectors;             // columns, unitary
};

/// Spectral decomposition of a Hermitian matrix. Rejects inputs whose
/// Hermiticity defect exceeds 1e-10.
Eigh eigh(const CMatrix& a);

/// max |a - a^dagger| elementwise.
double hermiticity_defect(const CMatrix& a);
bool is_hermitian(const CMatrix& a, double tol = 1e-10);
CMatrix hermitize(const CMatrix& a);

bool all_finite(const CMatrix& a);
double max_abs(const CMatrix& a);

/// Real part of the trace.
double trace_re(const CMatrix& a);

/// Re tr(a b) without forming the product.
double trace_product_re(const CMatrix& a, const CMatrix& b);

/// 0.5 * tr|a - b| for Hermitian a, b.
double trace_distance(const CMatrix& a, const CMatrix& b);

/// Smallest eigenvalue of a Hermitian matrix.
double min_eigenvalue(const CMatrix& a);

/// Avalanche mixer used to derive independent child seeds.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream_index);

/// A reproducible random stream. Identical (master_seed, stream_index)
/// pairs give bit-identical sequences. Not thread-safe: one owner at a time.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

  double normal();
  double uniform();  // [0, 1)

  /// Child stream keyed on this stream's identity; does not advance *this.
  RngStream child(std::uint64_t index) const;

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Entries are standard complex normal (E|z|^2 = 1).
CMatrix random_complex(Eigen::Index dim, RngStream& rng);
/// A + A^dagger with A standard complex normal.
CMatrix random_hermitian(Eigen::Index dim, RngStream& rng);
/// Random density matrix G G^dagger / tr.
CMatrix random_density(Eigen::Index dim, RngStream& rng);

struct NoisePair {
  double dZ;
  double dZp;
};

/// Unit-dt covariance of (dZ, dZ'): [[2n+1, 2 sqrt(n(n+1))], [., 2n+1]].
Eigen::Matrix2d quadrature_covariance(double nbar);
/// Lower Cholesky factor of quadrature_covariance(nbar).
Eigen::Matrix2d quadrature_cholesky(double nbar);

NoisePair sample_noise_pair(double nbar, double dt, RngStream& rng);

}  // namespace qfilt
