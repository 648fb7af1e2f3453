#pragma once

#include "qfilt/model.hpp"
#include "qfilt/numerics.hpp"

#include <vector>

namespace qfilt {

/// K = -1/2 (n+1) L^dag L - 1/2 n L L^dag - i H.
CMatrix drift_K(const SystemModel& m);

/// 1/2 [M^dag, X] M + 1/2 M^dag [X, M].
CMatrix sub_generator(const CMatrix& M, const CMatrix& X);

/// Thermal Lindblad generator acting on observables:
/// (n+1) sub_generator(L, X) + n sub_generator(L^dag, X) - i [X, H].
CMatrix lindblad_heisenberg(const SystemModel& m, const CMatrix& X);

/// Predual of lindblad_heisenberg acting on density matrices.
CMatrix lindblad_schrodinger(const SystemModel& m, const CMatrix& rho);

struct TimedState {
  double t;
  CMatrix rho;
};

/// Fixed-step RK4 for d rho/dt = lindblad_schrodinger(rho), hermitized after
/// every step. Emits the initial state and then every `stride`-th step; the
/// final step is always emitted.
std::vector<TimedState> evolve_master(const SystemModel& m, const CMatrix& rho0, double T, double dt,
                                      int stride = 1);

/// The drift of V^dag X V evaluated verbatim from its printed closed form,
/// including the (2n+1)(L+L^dag) X (L+L^dag) term.
CMatrix M_paper_literal(const SystemModel& m, const CMatrix& X);

/// The same drift rebuilt by contracting dV^dag X dV with the (dZ, dZ') Ito
/// table. With a = (n+1)L + n L^dag and b = sqrt(n(n+1)) (L + L^dag):
///   K^dag X + X K + (2n+1)(a^dag X a + b^dag X b) - 2 sqrt(n(n+1)) (a^dag X b + b^dag X a).
CMatrix M_from_ito(const SystemModel& m, const CMatrix& X);

struct GeneratorReport {
  double max_deviation = 0.0;  // Ito-derived drift vs Lindblad generator
  std::size_t n_samples = 0;
  std::vector<double> deviations;
  double paper_literal_max_deviation = 0.0;
  std::vector<double> paper_literal_deviations;
};

/// Max-abs deviation of both drift forms from lindblad_heisenberg over
/// random Hermitian X.
GeneratorReport m_collapse_report(const SystemModel& m, std::size_t samples, RngStream& rng);

}  // namespace qfilt
