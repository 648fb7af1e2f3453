#pragma once

// Stochastic estimators driven by a homodyne record: the linear (Zakai) and
// normalized (Kushner-Stratonovich) filters, the innovations process, a
// self-consistent record generator, and the doubled-noise vector unraveling.

#include "qfilt/model.hpp"
#include "qfilt/numerics.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qfilt {

/// Which measurement gain the filters use.
///
/// PaperLiteral appends the commuting-noise terms as if dZ' carried no
/// information about dZ: gain (n+1)(L. + .L^dag) + n(L^dag. + .L), innovations
/// drift (2n+1)^2 tr((L+L^dag) rho).
///
/// CorrelationCorrected conditions dZ' on dZ using their covariance: gain
/// [(n+1)(L. + .L^dag) - n(L^dag. + .L)] / (2n+1), innovations drift
/// tr((L+L^dag) rho).
///
/// The two coincide bit-for-bit at n = 0.
enum class FilterVariant { PaperLiteral, CorrelationCorrected };

const char* to_string(FilterVariant v);
FilterVariant variant_from_string(const std::string& s);

struct MeasurementRecord {
  double dt = 0.0;
  std::vector<double> dY;
  std::vector<double> dYp;  // empty unless the commuting quadrature was recorded

  std::size_t steps() const { return dY.size(); }
  double duration() const { return dt * static_cast<double>(dY.size()); }
  bool has_prime() const { return !dYp.empty(); }

  /// Sums consecutive blocks of `factor` increments (same path, coarser grid).
  MeasurementRecord coarsened(std::size_t factor) const;
};

struct ConditionalState {
  CMatrix matrix;
  bool normalized = true;
  FilterVariant variant = FilterVariant::CorrelationCorrected;
};

class FilterCollapse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Counters accumulated by ks_step.
struct KsDiagnostics {
  std::size_t steps = 0;
  std::size_t clamped = 0;
  double min_eigenvalue = 0.0;  // most negative eigenvalue seen before clamping
};

/// States with an eigenvalue below this are projected back onto the PSD cone.
inline constexpr double kClampThreshold = 1e-6;

/// One Euler-Maruyama step of the unnormalized filter:
///   s' = s + L^dag(s) dt + G(s) dY, hermitized.
CMatrix zakai_step(const SystemModel& m, FilterVariant v, const CMatrix& s, double dY, double dt);

/// dY - c tr((L+L^dag) rho) dt with c = (2n+1)^2 (PaperLiteral) or 1.
double innovations(const SystemModel& m, FilterVariant v, const CMatrix& rho, double dY, double dt);

/// One step of the normalized filter: rho + L^dag(rho) dt + gain(rho) dI,
/// hermitized, clamped if an eigenvalue falls below -kClampThreshold, and
/// renormalized to unit trace.
CMatrix ks_step(const SystemModel& m, FilterVariant v, const CMatrix& rho, double dY, double dt);
CMatrix ks_step(const SystemModel& m, FilterVariant v, const CMatrix& rho, double dY, double dt,
                KsDiagnostics& diag);

/// Folds zakai_step over a record. Output has steps()+1 entries when
/// stride = 1; otherwise index 0 and every stride-th step.
std::vector<CMatrix> run_zakai(const SystemModel& m, FilterVariant v, const CMatrix& s0,
                               const MeasurementRecord& record, int stride = 1);
std::vector<CMatrix> run_ks(const SystemModel& m, FilterVariant v, const CMatrix& rho0,
                            const MeasurementRecord& record, int stride = 1, KsDiagnostics* diag = nullptr);

struct GeneratedRecord {
  MeasurementRecord record;
  std::vector<ConditionalState> truth;  // index 0 is rho0, then every stride-th step
  KsDiagnostics diagnostics;
};

/// Self-consistent record: dY = tr((L+L^dag) rho) dt + sqrt(2n+1) dW, with rho
/// the CorrelationCorrected filter state fed back each step.
GeneratedRecord generate_record(const SystemModel& m, const CMatrix& rho0, double T, double dt, RngStream& rng,
                                int truth_stride = 1);

/// Xi' = Xi + {[(n+1)L + nL^dag] dY - sqrt(n(n+1)) (L+L^dag) dY' + K dt} Xi.
CVector unravel_step(const SystemModel& m, const CVector& xi, double dY, double dYp, double dt);

/// Draws dY' given dY from the Gaussian conditional of the (dZ, dZ') table:
/// mean 2 sqrt(n(n+1)) / (2n+1) dY, variance dt / (2n+1).
double conditional_Yprime(double dY, double nbar, double dt, RngStream& rng);

/// Runs `samples` unravelings from psi0 sharing the record's dY, each with its
/// own conditional dY' draws (stream rng.child(k)), and returns the average of
/// |Xi><Xi| at index 0 and every stride-th step.
std::vector<CMatrix> coarse_grain_unravel(const SystemModel& m, const CVector& psi0,
                                          const MeasurementRecord& record, std::size_t samples,
                                          const RngStream& rng, int stride = 1);

}  // namespace qfilt
