#pragma once

// Repeated-interaction (collision) model used as ground truth. Each step the
// system meets a fresh pair of truncated oscillator modes in their vacuum,
// coupled through the thermal combination b = sqrt(n+1) a (x) I + sqrt(n) I (x) a^dag,
// and the combined quadrature Q = b + b^dag is measured projectively.
//
// Joint spaces are ordered system (x) mode1 (x) mode2, with the system index
// slowest. The ancilla vacuum |0,0> is ancilla index 0.
//
// Two truncation bases are available for the ancilla pair. ArakiWoods
// truncates the Fock modes a1, a2 of b = sqrt(n+1) a1 + sqrt(n) a2^dag directly;
// there Q has a non-degenerate spectrum for n > 0, so reading Q also reveals
// the individual mode quadratures. MeasurementAdapted truncates the
// beam-split modes c = (sqrt(n+1) a1 + sqrt(n) a2) / sqrt(2n+1) and
// d = (-sqrt(n) a1 + sqrt(n+1) a2) / sqrt(2n+1), which share the same vacuum;
// there Q = sqrt(2n+1) (c + c^dag) (x) I exactly, and an outcome carries only q.

#include "qfilt/filter.hpp"
#include "qfilt/model.hpp"
#include "qfilt/numerics.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace qfilt {

enum class AncillaBasis { MeasurementAdapted, ArakiWoods };

struct AncillaConfig {
  int trunc = 4;      // Fock levels per mode
  double tau = 0.01;  // collision duration
  AncillaBasis basis = AncillaBasis::MeasurementAdapted;
};

void require_valid(const AncillaConfig& cfg);

/// Truncated annihilation operator, a|k> = sqrt(k)|k-1>.
CMatrix ladder(int trunc);

/// b = sqrt(n+1) a1 + sqrt(n) a2^dag on the ancilla pair, in cfg.basis.
/// In the ArakiWoods basis this is sqrt(n+1) a (x) I + sqrt(n) I (x) a^dag.
CMatrix coupling_b(const AncillaConfig& cfg, double nbar);
/// The commuting copy b' = sqrt(n) a1^dag + sqrt(n+1) a2, in cfg.basis.
CMatrix coupling_b_prime(const AncillaConfig& cfg, double nbar);
/// Q = b + b^dag.
CMatrix ancilla_quadrature(const AncillaConfig& cfg, double nbar);

/// expm(sqrt(tau) (L (x) b^dag - L^dag (x) b) - i tau H (x) I).
CMatrix step_unitary(const SystemModel& m, const AncillaConfig& cfg);

/// One measured outcome cluster: every ancilla eigenvector of Q whose
/// eigenvalue lies within kOutcomeClusterTol of its neighbour.
struct OutcomeBranch {
  double q = 0.0;
  std::vector<CMatrix> kraus;  // system operators <v|U|0,0>
  CMatrix effect;              // sum of kraus^dag kraus
};

inline constexpr double kOutcomeClusterTol = 1e-8;

/// Step data shared read-only by all trajectories of one (model, config).
class CollisionKernel {
 public:
  CollisionKernel(const SystemModel& m, const AncillaConfig& cfg);

  const SystemModel& model() const { return model_; }
  const AncillaConfig& config() const { return cfg_; }
  const std::vector<OutcomeBranch>& branches() const { return branches_; }
  const CMatrix& unitary() const { return unitary_; }

  /// Averaged over outcomes: sum over ancilla basis of <j|U|00> rho <00|U^dag|j>.
  CMatrix unconditional(const CMatrix& rho) const;

  /// Largest probability over system states of finding either mode in its
  /// top Fock level after one step.
  double leakage() const { return leakage_; }
  /// max |sum_k effect_k - I|.
  double completeness_defect() const;

 private:
  SystemModel model_;
  AncillaConfig cfg_;
  CMatrix unitary_;
  std::vector<OutcomeBranch> branches_;
  std::vector<CMatrix> column_ops_;  // <j|U|00> for every ancilla basis j
  double leakage_ = 0.0;
};

struct OracleTrajectory {
  double tau = 0.0;
  std::vector<double> outcomes;       // q per step
  std::vector<double> probabilities;  // probability of the observed outcome
  std::vector<CMatrix> states;        // index 0 is rho0
  double max_probability_sum_defect = 0.0;
  double min_state_eigenvalue = 1.0;

  /// dY = sqrt(tau) q per step.
  MeasurementRecord record() const;
};

OracleTrajectory oracle_trajectory(const CollisionKernel& kernel, const CMatrix& rho0, std::size_t steps,
                                   RngStream& rng);
OracleTrajectory oracle_trajectory(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& rho0,
                                   std::size_t steps, RngStream& rng);

// ---------------------------------------------------------------------------
// Validation campaigns

/// Oracle ensemble mean vs the master equation, plus the deterministic bias of
/// the exactly averaged collision channel at tau and tau/2.
struct UnconditionalReport {
  double tau = 0.0;
  std::size_t steps = 0;
  std::size_t ensemble = 0;
  double max_trace_distance_mc = 0.0;   // ensemble mean vs master, max over steps
  double bias_tau = 0.0;                // exact channel vs master at final time
  double bias_half_tau = 0.0;
  double bias_ratio = 0.0;              // bias_tau / bias_half_tau
  double max_leakage = 0.0;
  double max_probability_sum_defect = 0.0;
  double min_state_eigenvalue = 1.0;
};

UnconditionalReport unconditional_check(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& rho0,
                                        std::size_t steps, std::size_t ensemble, const RngStream& rng);

struct OutputRelationWindow {
  std::size_t first_step = 0;
  std::size_t steps = 0;
  double observed = 0.0;  // ensemble mean of the summed dY over the window
  double expected = 0.0;  // tau * sum tr((L+L^dag) rho_bar)
  double std_error = 0.0;
  double allowance = 0.0;  // exact collision-channel readout minus master readout
  double z = 0.0;
  bool pass = false;
};

struct OutputRelationReport {
  double nbar = 0.0;
  double tau = 0.0;
  std::size_t steps = 0;
  std::size_t ensemble = 0;
  std::vector<OutputRelationWindow> windows;
  double max_abs_z = 0.0;           // over windows
  double max_abs_z_per_step = 0.0;  // unbinned, informational
  bool pass = false;
};

OutputRelationReport output_relation_check(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& rho0,
                                           std::size_t steps, std::size_t ensemble, const RngStream& rng,
                                           std::size_t windows = 10);

/// <V^dag X V> vs <U^dag X U> after `steps` collisions, where V is the Euler
/// step of the reference propagator built from the ancilla quadratures
/// Z = sqrt(tau)(b + b^dag) and Z' = sqrt(tau)(b' + b'^dag).
struct ReferenceProcessReport {
  double tau = 0.0;
  std::size_t steps = 0;
  double u_expectation = 0.0;
  double v_expectation = 0.0;
  double difference = 0.0;  // |v - u|
  double v_norm = 0.0;      // <V^dag V>
};

ReferenceProcessReport reference_process_check(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& X,
                                               const CMatrix& rho0, std::size_t steps);

struct ReferenceProcessStudy {
  double T = 0.0;
  std::vector<ReferenceProcessReport> runs;  // tau, tau/2, tau/4, ...
  std::vector<double> observed_orders;       // log2 of successive difference ratios
};

ReferenceProcessStudy reference_process_study(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& X,
                                              const CMatrix& rho0, double T, std::size_t levels = 3);

/// Per-variant, per-tau tracking of the oracle conditional state by the
/// normalized filter fed with the oracle record.
struct VariantTracking {
  FilterVariant variant = FilterVariant::CorrelationCorrected;
  double tau = 0.0;
  std::vector<double> checkpoint_times;
  std::vector<double> mean_trace_distance;  // at checkpoints, across trajectories
  std::vector<double> std_error;
  double tracking_error = 0.0;  // time-averaged mean trace distance
  double tracking_stderr = 0.0;
  double innovations_mean = 0.0;
  double innovations_mean_stderr = 0.0;
  double innovations_var = 0.0;
  double innovations_var_expected = 0.0;  // (2n+1) tau
  std::size_t clamped_steps = 0;
};

struct AdjudicationReport {
  double nbar = 0.0;
  double T = 0.0;
  std::size_t ensemble = 0;
  std::vector<double> taus;
  std::vector<VariantTracking> paper;      // one per tau
  std::vector<VariantTracking> corrected;  // one per tau
  bool paper_converges = false;
  bool corrected_converges = false;
  /// "paper", "corrected", "both" (variants coincide) or "none".
  std::string winner;
  double loser_floor = 0.0;  // tracking error of the non-converging variant at the smallest tau
  /// Innovations of the winner at the smallest tau.
  double winner_innovations_z = 0.0;
  double winner_innovations_var_ratio = 0.0;
};

/// Convergence rates are judged as observed orders: an order is consistent
/// with its prediction when it lies within kOrderTolerance of it.
inline constexpr double kOrderTolerance = 0.25;

/// log(coarse / fine) / log(refinement); 0 when either error is not positive.
double observed_order(double coarse_error, double fine_error, double refinement);
bool order_consistent(double observed, double expected);

/// Strong order of the filters fed with a discrete record.
inline constexpr double kTrackingOrder = 0.5;

/// A variant converges when its tracking error strictly decreases along the
/// tau sequence and its observed order from the largest to the smallest tau
/// is at least kTrackingOrder - kOrderTolerance.

AdjudicationReport filter_adjudication(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& rho0,
                                       double T, std::size_t ensemble, const RngStream& rng,
                                       std::size_t levels = 3, std::size_t checkpoints = 10);

}  // namespace qfilt
