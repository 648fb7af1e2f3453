#include "qfilt/filter.hpp"

#include "qfilt/generators.hpp"

#include <cmath>

namespace qfilt {

namespace {

void require_record(const MeasurementRecord& r, const char* what) {
  if (!(r.dt > 0.0)) throw std::invalid_argument(std::string(what) + ": record dt must be > 0");
  if (r.has_prime() && r.dYp.size() != r.dY.size()) {
    throw std::invalid_argument(std::string(what) + ": dY and dYp lengths differ");
  }
}

// Lrho + rho L^dag and L^dag rho + rho L.
struct GainTerms {
  CMatrix forward;
  CMatrix backward;
};

GainTerms gain_terms(const CMatrix& L, const CMatrix& rho) {
  const CMatrix Lr = L * rho;
  const CMatrix rL = rho * L;
  return {Lr + Lr.adjoint(), rL + rL.adjoint()};
}

// Eigen evaluates real * complex componentwise, so at n = 0 both branches
// reduce to `forward` bit-for-bit.
CMatrix combine(FilterVariant v, double n, const CMatrix& forward, const CMatrix& backward) {
  if (v == FilterVariant::PaperLiteral) return (n + 1.0) * forward + n * backward;
  return ((n + 1.0) * forward - n * backward) * (1.0 / (2.0 * n + 1.0));
}

double readout(const CMatrix& L, const CMatrix& rho) {
  // tr((L + L^dag) rho) = 2 Re tr(L rho)
  return 2.0 * trace_product_re(L, rho);
}

}  // namespace

const char* to_string(FilterVariant v) {
  return v == FilterVariant::PaperLiteral ? "paper" : "corrected";
}

FilterVariant variant_from_string(const std::string& s) {
  if (s == "paper" || s == "PaperLiteral") return FilterVariant::PaperLiteral;
  if (s == "corrected" || s == "CorrelationCorrected") return FilterVariant::CorrelationCorrected;
  throw std::invalid_argument("unknown filter variant '" + s + "'");
}

MeasurementRecord MeasurementRecord::coarsened(std::size_t factor) const {
  if (factor == 0 || dY.size() % factor != 0) {
    throw std::invalid_argument("MeasurementRecord::coarsened: factor must divide the record length");
  }
  MeasurementRecord out;
  out.dt = dt * static_cast<double>(factor);
  const std::size_t n = dY.size() / factor;
  out.dY.assign(n, 0.0);
  if (has_prime()) out.dYp.assign(n, 0.0);
  for (std::size_t i = 0; i < dY.size(); ++i) {
    out.dY[i / factor] += dY[i];
    if (has_prime()) out.dYp[i / factor] += dYp[i];
  }
  return out;
}

CMatrix zakai_step(const SystemModel& m, FilterVariant v, const CMatrix& s, double dY, double dt) {
  const double tr = trace_re(s);
  if (!(tr > 0.0) || !std::isfinite(tr)) {
    throw FilterCollapse("zakai_step: unnormalized state has non-positive trace");
  }
  const GainTerms g = gain_terms(m.L, s);
  const CMatrix gain = combine(v, m.nbar, g.forward, g.backward);
  CMatrix out = hermitize(s + lindblad_schrodinger(m, s) * dt + gain * dY);
  const double tr_out = trace_re(out);
  if (!(tr_out > 0.0) || !std::isfinite(tr_out)) {
    throw FilterCollapse("zakai_step: trace became non-positive; reduce dt");
  }
  return out;
}

double innovations(const SystemModel& m, FilterVariant v, const CMatrix& rho, double dY, double dt) {
  const double n = m.nbar;
  const double factor = v == FilterVariant::PaperLiteral ? (2.0 * n + 1.0) * (2.0 * n + 1.0) : 1.0;
  return dY - factor * readout(m.L, rho) * dt;
}

CMatrix ks_step(const SystemModel& m, FilterVariant v, const CMatrix& rho, double dY, double dt,
                KsDiagnostics& diag) {
  const double h = readout(m.L, rho);
  const double dI = innovations(m, v, rho, dY, dt);
  GainTerms g = gain_terms(m.L, rho);
  g.forward -= h * rho;
  g.backward -= h * rho;
  const CMatrix gain = combine(v, m.nbar, g.forward, g.backward);

  CMatrix out = hermitize(rho + lindblad_schrodinger(m, rho) * dt + gain * dI);
  double tr = trace_re(out);
  if (!(tr > 1e-300) || !std::isfinite(tr)) throw FilterCollapse("ks_step: trace underflow");
  out /= tr;

  ++diag.steps;
  const double lo = min_eigenvalue(out);
  if (lo < diag.min_eigenvalue) diag.min_eigenvalue = lo;
  if (lo < -kClampThreshold) {
    ++diag.clamped;
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(out);
    Eigen::VectorXd ev = solver.eigenvalues().cwiseMax(0.0);
    out = solver.eigenvectors() * ev.cast<Complex>().asDiagonal() * solver.eigenvectors().adjoint();
    tr = trace_re(out);
    if (!(tr > 1e-300)) throw FilterCollapse("ks_step: state vanished after clamping");
    out = hermitize(out / tr);
  }
  return out;
}

CMatrix ks_step(const SystemModel& m, FilterVariant v, const CMatrix& rho, double dY, double dt) {
  KsDiagnostics scratch;
  return ks_step(m, v, rho, dY, dt, scratch);
}

std::vector<CMatrix> run_zakai(const SystemModel& m, FilterVariant v, const CMatrix& s0,
                               const MeasurementRecord& record, int stride) {
  require_valid(m);
  require_record(record, "run_zakai");
  if (stride < 1) throw std::invalid_argument("run_zakai: stride must be >= 1");
  std::vector<CMatrix> out{s0};
  CMatrix s = s0;
  const std::size_t n = record.steps();
  for (std::size_t k = 0; k < n; ++k) {
    s = zakai_step(m, v, s, record.dY[k], record.dt);
    if ((k + 1) % static_cast<std::size_t>(stride) == 0) out.push_back(s);
  }
  return out;
}

std::vector<CMatrix> run_ks(const SystemModel& m, FilterVariant v, const CMatrix& rho0,
                            const MeasurementRecord& record, int stride, KsDiagnostics* diag) {
  require_valid(m);
  require_state(rho0, m.dim(), "run_ks");
  require_record(record, "run_ks");
  if (stride < 1) throw std::invalid_argument("run_ks: stride must be >= 1");
  KsDiagnostics local;
  KsDiagnostics& d = diag ? *diag : local;
  std::vector<CMatrix> out{rho0};
  CMatrix rho = rho0;
  const std::size_t n = record.steps();
  for (std::size_t k = 0; k < n; ++k) {
    rho = ks_step(m, v, rho, record.dY[k], record.dt, d);
    if ((k + 1) % static_cast<std::size_t>(stride) == 0) out.push_back(rho);
  }
  return out;
}

GeneratedRecord generate_record(const SystemModel& m, const CMatrix& rho0, double T, double dt, RngStream& rng,
                                int truth_stride) {
  require_valid(m);
  require_state(rho0, m.dim(), "generate_record");
  if (!(dt > 0.0) || !(T >= 0.0)) throw std::invalid_argument("generate_record: need dt > 0 and T >= 0");
  if (truth_stride < 1) throw std::invalid_argument("generate_record: stride must be >= 1");

  const auto steps = static_cast<std::size_t>(std::llround(T / dt));
  const double noise_scale = std::sqrt((2.0 * m.nbar + 1.0) * dt);
  constexpr auto kTruth = FilterVariant::CorrelationCorrected;

  GeneratedRecord g;
  g.record.dt = dt;
  g.record.dY.reserve(steps);
  g.truth.push_back({rho0, true, kTruth});
  CMatrix rho = rho0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double dY = readout(m.L, rho) * dt + noise_scale * rng.normal();
    g.record.dY.push_back(dY);
    rho = ks_step(m, kTruth, rho, dY, dt, g.diagnostics);
    if ((k + 1) % static_cast<std::size_t>(truth_stride) == 0) g.truth.push_back({rho, true, kTruth});
  }
  return g;
}

CVector unravel_step(const SystemModel& m, const CVector& xi, double dY, double dYp, double dt) {
  const double n = m.nbar;
  const CMatrix Ld = m.L.adjoint();
  const CMatrix a = (n + 1.0) * m.L + n * Ld;
  const CMatrix b = std::sqrt(n * (n + 1.0)) * (m.L + Ld);
  CVector out = xi + (a * dY - b * dYp + drift_K(m) * dt) * xi;
  if (!out.allFinite() || out.norm() > 1e150) {
    throw std::overflow_error("unravel_step: vector norm overflow; reduce dt");
  }
  return out;
}

double conditional_Yprime(double dY, double nbar, double dt, RngStream& rng) {
  if (!(nbar >= 0.0)) throw std::invalid_argument("conditional_Yprime: nbar must be >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("conditional_Yprime: dt must be > 0");
  const double var = 2.0 * nbar + 1.0;
  const double mean = 2.0 * std::sqrt(nbar * (nbar + 1.0)) / var * dY;
  return mean + std::sqrt(dt / var) * rng.normal();
}

std::vector<CMatrix> coarse_grain_unravel(const SystemModel& m, const CVector& psi0,
                                          const MeasurementRecord& record, std::size_t samples,
                                          const RngStream& rng, int stride) {
  require_valid(m);
  require_record(record, "coarse_grain_unravel");
  if (record.has_prime()) {
    throw std::invalid_argument("coarse_grain_unravel: record already carries dY'; nothing to average");
  }
  if (samples < 1) throw std::invalid_argument("coarse_grain_unravel: samples must be >= 1");
  if (stride < 1) throw std::invalid_argument("coarse_grain_unravel: stride must be >= 1");
  if (psi0.size() != m.dim()) throw DimensionError("coarse_grain_unravel: psi0 dimension differs from model");

  const std::size_t steps = record.steps();
  const std::size_t outputs = 1 + steps / static_cast<std::size_t>(stride);
  std::vector<CMatrix> sum(outputs, CMatrix::Zero(m.dim(), m.dim()));

  const double n = m.nbar;
  const CMatrix Ld = m.L.adjoint();
  const CMatrix a = (n + 1.0) * m.L + n * Ld;
  const CMatrix b = std::sqrt(n * (n + 1.0)) * (m.L + Ld);
  const CMatrix Kdt = drift_K(m) * record.dt;

  for (std::size_t s = 0; s < samples; ++s) {
    RngStream r = rng.child(s);
    CVector xi = psi0;
    sum[0] += xi * xi.adjoint();
    for (std::size_t k = 0; k < steps; ++k) {
      const double dY = record.dY[k];
      const double dYp = conditional_Yprime(dY, n, record.dt, r);
      xi += (a * dY - b * dYp + Kdt) * xi;
      if ((k + 1) % static_cast<std::size_t>(stride) == 0) {
        if (!xi.allFinite() || xi.norm() > 1e150) {
          throw std::overflow_error("coarse_grain_unravel: vector norm overflow; reduce dt");
        }
        sum[(k + 1) / static_cast<std::size_t>(stride)] += xi * xi.adjoint();
      }
    }
  }
  for (auto& x : sum) x /= static_cast<double>(samples);
  return sum;
}

}  // namespace qfilt
