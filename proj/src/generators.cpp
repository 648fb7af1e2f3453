#include "qfilt/generators.hpp"

#include <algorithm>
#include <complex>
#include <cmath>

namespace qfilt {

namespace {

void require_operator(const SystemModel& m, const CMatrix& X, const char* what) {
  require_square(X, what);
  if (X.rows() != m.dim()) throw DimensionError(std::string(what) + ": operator dimension differs from model");
}

// D[M] rho = M rho M^dag - 1/2 {M^dag M, rho}
CMatrix dissipator(const CMatrix& M, const CMatrix& MdM, const CMatrix& rho) {
  return M * rho * M.adjoint() - 0.5 * (MdM * rho + rho * MdM);
}

}  // namespace

CMatrix drift_K(const SystemModel& m) {
  const double n = m.nbar;
  const CMatrix Ld = m.L.adjoint();
  return -0.5 * (n + 1.0) * (Ld * m.L) - 0.5 * n * (m.L * Ld) - kI * m.H;
}

CMatrix sub_generator(const CMatrix& M, const CMatrix& X) {
  require_square(M, "sub_generator");
  require_same_shape(M, X, "sub_generator");
  const CMatrix Md = M.adjoint();
  return 0.5 * (Md * X - X * Md) * M + 0.5 * Md * (X * M - M * X);
}

CMatrix lindblad_heisenberg(const SystemModel& m, const CMatrix& X) {
  require_operator(m, X, "lindblad_heisenberg");
  const double n = m.nbar;
  CMatrix out = (n + 1.0) * sub_generator(m.L, X) - kI * (X * m.H - m.H * X);
  if (n != 0.0) out += n * sub_generator(m.L.adjoint(), X);
  return out;
}

CMatrix lindblad_schrodinger(const SystemModel& m, const CMatrix& rho) {
  require_operator(m, rho, "lindblad_schrodinger");
  const double n = m.nbar;
  const CMatrix Ld = m.L.adjoint();
  CMatrix out = (n + 1.0) * dissipator(m.L, Ld * m.L, rho) - kI * (m.H * rho - rho * m.H);
  if (n != 0.0) out += n * dissipator(Ld, m.L * Ld, rho);
  return out;
}

std::vector<TimedState> evolve_master(const SystemModel& m, const CMatrix& rho0, double T, double dt,
                                      int stride) {
  require_valid(m);
  require_state(rho0, m.dim(), "evolve_master");
  if (!(dt > 0.0)) throw std::invalid_argument("evolve_master: dt must be > 0");
  if (!(T >= 0.0)) throw std::invalid_argument("evolve_master: T must be >= 0");
  if (stride < 1) throw std::invalid_argument("evolve_master: stride must be >= 1");

  const long steps = std::lround(T / dt);
  std::vector<TimedState> out;
  out.reserve(static_cast<std::size_t>(steps / stride) + 2);
  CMatrix rho = rho0;
  out.push_back({0.0, rho});
  auto f = [&](const CMatrix& r) { return lindblad_schrodinger(m, r); };
  for (long k = 1; k <= steps; ++k) {
    const CMatrix k1 = f(rho);
    const CMatrix k2 = f(rho + 0.5 * dt * k1);
    const CMatrix k3 = f(rho + 0.5 * dt * k2);
    const CMatrix k4 = f(rho + dt * k3);
    rho = hermitize(rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    if (k % stride == 0 || k == steps) out.push_back({static_cast<double>(k) * dt, rho});
  }
  return out;
}

CMatrix M_paper_literal(const SystemModel& m, const CMatrix& X) {
  require_operator(m, X, "M_paper_literal");
  const double n = m.nbar;
  const CMatrix& L = m.L;
  const CMatrix Ld = L.adjoint();
  const CMatrix K = drift_K(m);
  const CMatrix left = (n + 1.0) * Ld + n * L;   // (n+1)L^dag + nL
  const CMatrix right = (n + 1.0) * L + n * Ld;  // (n+1)L + nL^dag
  const CMatrix S = L + Ld;
  return K.adjoint() * X + X * K + (2.0 * n + 1.0) * left * X * right + (2.0 * n + 1.0) * S * X * S -
         2.0 * n * (n + 1.0) * (left * X * S + S * X * right);
}

CMatrix M_from_ito(const SystemModel& m, const CMatrix& X) {
  require_operator(m, X, "M_from_ito");
  // The terms below are O((2n+1)(n+1)^2) and cancel down to O(n+1), so they
  // are accumulated in extended precision.
  using ExtMatrix = Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, Eigen::Dynamic>;
  const long double n = m.nbar;
  const long double c = std::sqrt(n * (n + 1.0L));
  const ExtMatrix L = m.L.cast<std::complex<long double>>();
  const ExtMatrix H = m.H.cast<std::complex<long double>>();
  const ExtMatrix Y = X.cast<std::complex<long double>>();
  const ExtMatrix Ld = L.adjoint();
  const std::complex<long double> i{0.0L, 1.0L};
  const ExtMatrix K = -0.5L * (n + 1.0L) * (Ld * L) - 0.5L * n * (L * Ld) - i * H;
  // dV = (a dZ - b dZ' + K dt) V
  const ExtMatrix a = (n + 1.0L) * L + n * Ld;
  const ExtMatrix b = c * (L + Ld);
  const ExtMatrix ad = a.adjoint();
  const ExtMatrix bd = b.adjoint();
  const long double zz = 2.0L * n + 1.0L;  // dZ dZ = dZ' dZ'
  const long double zzp = 2.0L * c;        // dZ dZ'
  const ExtMatrix out =
      K.adjoint() * Y + Y * K + zz * (ad * Y * a) + zz * (bd * Y * b) - zzp * (ad * Y * b + bd * Y * a);
  return out.cast<Complex>();
}

GeneratorReport m_collapse_report(const SystemModel& m, std::size_t samples, RngStream& rng) {
  require_valid(m);
  if (samples < 1) throw std::invalid_argument("m_collapse_report: samples must be >= 1");
  GeneratorReport r;
  r.n_samples = samples;
  r.deviations.reserve(samples);
  r.paper_literal_deviations.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const CMatrix X = random_hermitian(m.dim(), rng);
    const CMatrix ref = lindblad_heisenberg(m, X);
    r.deviations.push_back(max_abs(M_from_ito(m, X) - ref));
    r.paper_literal_deviations.push_back(max_abs(M_paper_literal(m, X) - ref));
  }
  r.max_deviation = *std::max_element(r.deviations.begin(), r.deviations.end());
  r.paper_literal_max_deviation =
      *std::max_element(r.paper_literal_deviations.begin(), r.paper_literal_deviations.end());
  return r;
}

}  // namespace qfilt
