#include "qfilt/oracle.hpp"

#include "qfilt/ensemble.hpp"
#include "qfilt/generators.hpp"

#include <cmath>
#include <stdexcept>

namespace qfilt {

namespace {

Eigen::Index ancilla_dim(const AncillaConfig& cfg) { return static_cast<Eigen::Index>(cfg.trunc) * cfg.trunc; }

// Column operators <j| W |0,0> of a joint operator W, one per ancilla basis j.
std::vector<CMatrix> vacuum_columns(const CMatrix& W, Eigen::Index sys_dim, Eigen::Index anc_dim) {
  std::vector<CMatrix> ops(static_cast<std::size_t>(anc_dim), CMatrix::Zero(sys_dim, sys_dim));
  for (Eigen::Index j = 0; j < anc_dim; ++j) {
    CMatrix& op = ops[static_cast<std::size_t>(j)];
    for (Eigen::Index r = 0; r < sys_dim; ++r)
      for (Eigen::Index c = 0; c < sys_dim; ++c) op(r, c) = W(r * anc_dim + j, c * anc_dim);
  }
  return ops;
}

CMatrix apply_channel(const std::vector<CMatrix>& ops, const CMatrix& rho) {
  CMatrix out = CMatrix::Zero(rho.rows(), rho.cols());
  for (const auto& A : ops) out.noalias() += A * rho * A.adjoint();
  return out;
}

double readout(const CMatrix& L, const CMatrix& rho) { return 2.0 * trace_product_re(L, rho); }

}  // namespace

void require_valid(const AncillaConfig& cfg) {
  if (cfg.trunc < 3) throw std::invalid_argument("AncillaConfig: trunc must be >= 3");
  if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) throw std::invalid_argument("AncillaConfig: tau must be > 0");
}

CMatrix ladder(int trunc) {
  if (trunc < 2) throw std::invalid_argument("ladder: trunc must be >= 2");
  CMatrix a = CMatrix::Zero(trunc, trunc);
  for (int k = 1; k < trunc; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

namespace {

struct ModePair {
  CMatrix first;
  CMatrix second;
};

ModePair ancilla_modes(const AncillaConfig& cfg) {
  const CMatrix a = ladder(cfg.trunc);
  const CMatrix I = identity(cfg.trunc);
  return {kron(a, I), kron(I, a)};
}

}  // namespace

CMatrix coupling_b(const AncillaConfig& cfg, double nbar) {
  if (!(nbar >= 0.0)) throw std::invalid_argument("coupling_b: nbar must be >= 0");
  const auto [c, d] = ancilla_modes(cfg);
  if (cfg.basis == AncillaBasis::ArakiWoods) {
    return std::sqrt(nbar + 1.0) * c + std::sqrt(nbar) * d.adjoint();
  }
  // a1 = (sqrt(n+1) c - sqrt(n) d) / s, a2 = (sqrt(n) c + sqrt(n+1) d) / s, s = sqrt(2n+1)
  const double s = std::sqrt(2.0 * nbar + 1.0);
  const double r = std::sqrt(nbar * (nbar + 1.0));
  return ((nbar + 1.0) * c + nbar * c.adjoint() + r * (d.adjoint() - d)) / s;
}

CMatrix coupling_b_prime(const AncillaConfig& cfg, double nbar) {
  if (!(nbar >= 0.0)) throw std::invalid_argument("coupling_b_prime: nbar must be >= 0");
  const auto [c, d] = ancilla_modes(cfg);
  if (cfg.basis == AncillaBasis::ArakiWoods) {
    return std::sqrt(nbar) * c.adjoint() + std::sqrt(nbar + 1.0) * d;
  }
  const double s = std::sqrt(2.0 * nbar + 1.0);
  const double r = std::sqrt(nbar * (nbar + 1.0));
  return (r * (c + c.adjoint()) + (nbar + 1.0) * d - nbar * d.adjoint()) / s;
}

CMatrix ancilla_quadrature(const AncillaConfig& cfg, double nbar) {
  const CMatrix b = coupling_b(cfg, nbar);
  return b + b.adjoint();
}

CMatrix step_unitary(const SystemModel& m, const AncillaConfig& cfg) {
  require_valid(m);
  require_valid(cfg);
  const CMatrix b = coupling_b(cfg, m.nbar);
  const CMatrix Ia = identity(ancilla_dim(cfg));
  const CMatrix generator = std::sqrt(cfg.tau) * (kron(m.L, b.adjoint()) - kron(m.L.adjoint(), b)) -
                            kI * cfg.tau * kron(m.H, Ia);
  return expm(generator);
}

CollisionKernel::CollisionKernel(const SystemModel& m, const AncillaConfig& cfg)
    : model_(m), cfg_(cfg), unitary_(step_unitary(m, cfg)) {
  const Eigen::Index d = m.dim();
  const Eigen::Index na = ancilla_dim(cfg);
  column_ops_ = vacuum_columns(unitary_, d, na);

  const Eigh spectrum = eigh(ancilla_quadrature(cfg, m.nbar));
  std::size_t i = 0;
  while (i < spectrum.eigenvalues.size()) {
    std::size_t j = i + 1;
    while (j < spectrum.eigenvalues.size() &&
           spectrum.eigenvalues[j] - spectrum.eigenvalues[j - 1] <= kOutcomeClusterTol) {
      ++j;
    }
    OutcomeBranch br;
    br.effect = CMatrix::Zero(d, d);
    double qsum = 0.0;
    for (std::size_t k = i; k < j; ++k) {
      qsum += spectrum.eigenvalues[k];
      // <v_k| U |00> = sum_j conj(v_k[j]) <j|U|00>
      const auto v = spectrum.eigenvectors.col(static_cast<Eigen::Index>(k));
      CMatrix op = CMatrix::Zero(d, d);
      for (Eigen::Index a = 0; a < na; ++a) op += std::conj(v(a)) * column_ops_[static_cast<std::size_t>(a)];
      br.effect += op.adjoint() * op;
      br.kraus.push_back(std::move(op));
    }
    br.q = qsum / static_cast<double>(j - i);
    branches_.push_back(std::move(br));
    i = j;
  }

  CMatrix top = CMatrix::Zero(d, d);
  for (Eigen::Index a = 0; a < na; ++a) {
    const int n1 = static_cast<int>(a) / cfg.trunc;
    const int n2 = static_cast<int>(a) % cfg.trunc;
    if (n1 == cfg.trunc - 1 || n2 == cfg.trunc - 1) {
      const CMatrix& op = column_ops_[static_cast<std::size_t>(a)];
      top += op.adjoint() * op;
    }
  }
  const Eigh top_spec = eigh(hermitize(top));
  leakage_ = std::max(0.0, top_spec.eigenvalues.back());
}

CMatrix CollisionKernel::unconditional(const CMatrix& rho) const { return apply_channel(column_ops_, rho); }

double CollisionKernel::completeness_defect() const {
  CMatrix sum = CMatrix::Zero(model_.dim(), model_.dim());
  for (const auto& br : branches_) sum += br.effect;
  return max_abs(sum - identity(model_.dim()));
}

MeasurementRecord OracleTrajectory::record() const {
  MeasurementRecord r;
  r.dt = tau;
  r.dY.reserve(outcomes.size());
  const double s = std::sqrt(tau);
  for (double q : outcomes) r.dY.push_back(s * q);
  return r;
}

OracleTrajectory oracle_trajectory(const CollisionKernel& kernel, const CMatrix& rho0, std::size_t steps,
                                   RngStream& rng) {
  require_state(rho0, kernel.model().dim(), "oracle_trajectory");
  const auto& branches = kernel.branches();
  OracleTrajectory tr;
  tr.tau = kernel.config().tau;
  tr.outcomes.reserve(steps);
  tr.probabilities.reserve(steps);
  tr.states.reserve(steps + 1);
  tr.states.push_back(rho0);
  tr.min_state_eigenvalue = min_eigenvalue(rho0);

  std::vector<double> probs(branches.size());
  CMatrix rho = rho0;
  for (std::size_t s = 0; s < steps; ++s) {
    double total = 0.0;
    for (std::size_t k = 0; k < branches.size(); ++k) {
      probs[k] = std::max(0.0, trace_product_re(branches[k].effect, rho));
      total += probs[k];
    }
    tr.max_probability_sum_defect = std::max(tr.max_probability_sum_defect, std::abs(total - 1.0));

    // Born-rule draw; a branch whose probability rounds to zero is redrawn.
    std::size_t pick = branches.size();
    for (int attempt = 0; attempt < 64 && pick == branches.size(); ++attempt) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      std::size_t k = 0;
      for (; k + 1 < branches.size(); ++k) {
        acc += probs[k];
        if (u < acc) break;
      }
      if (probs[k] > 1e-300) pick = k;
    }
    if (pick == branches.size()) throw std::runtime_error("oracle_trajectory: could not draw an outcome");

    const double p = probs[pick];
    CMatrix next = CMatrix::Zero(rho.rows(), rho.cols());
    for (const auto& A : branches[pick].kraus) next.noalias() += A * rho * A.adjoint();
    rho = hermitize(next / p);
    tr.min_state_eigenvalue = std::min(tr.min_state_eigenvalue, min_eigenvalue(rho));
    tr.outcomes.push_back(branches[pick].q);
    tr.probabilities.push_back(p / total);
    tr.states.push_back(rho);
  }
  return tr;
}

OracleTrajectory oracle_trajectory(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& rho0,
                                   std::size_t steps, RngStream& rng) {
  return oracle_trajectory(CollisionKernel(m, cfg), rho0, steps, rng);
}

UnconditionalReport unconditional_check(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& rho0,
                                        std::size_t steps, std::size_t ensemble, const RngStream& rng) {
  require_valid(m);
  require_valid(cfg);
  if (ensemble < 1) throw std::invalid_argument("unconditional_check: ensemble must be >= 1");
  const CollisionKernel kernel(m, cfg);
  const double T = cfg.tau * static_cast<double>(steps);
  const auto master = evolve_master(m, rho0, T, cfg.tau);

  struct Slot {
    std::vector<CMatrix> states;
    double defect = 0.0;
    double min_eig = 1.0;
  };
  std::vector<Slot> slots(ensemble);
  parallel_for(ensemble, [&](std::size_t i) {
    RngStream r = rng.child(i);
    OracleTrajectory t = oracle_trajectory(kernel, rho0, steps, r);
    slots[i] = {std::move(t.states), t.max_probability_sum_defect, t.min_state_eigenvalue};
  });

  UnconditionalReport rep;
  rep.tau = cfg.tau;
  rep.steps = steps;
  rep.ensemble = ensemble;
  rep.max_leakage = kernel.leakage();
  for (std::size_t k = 0; k <= steps; ++k) {
    CMatrix mean = CMatrix::Zero(m.dim(), m.dim());
    for (const auto& s : slots) mean += s.states[k];
    mean /= static_cast<double>(ensemble);
    rep.max_trace_distance_mc = std::max(rep.max_trace_distance_mc, trace_distance(mean, master[k].rho));
  }
  for (const auto& s : slots) {
    rep.max_probability_sum_defect = std::max(rep.max_probability_sum_defect, s.defect);
    rep.min_state_eigenvalue = std::min(rep.min_state_eigenvalue, s.min_eig);
  }

  // Exact outcome average of the collision channel at tau and tau/2.
  auto channel_bias = [&](double tau, std::size_t n_steps) {
    AncillaConfig c = cfg;
    c.tau = tau;
    const CollisionKernel k(m, c);
    rep.max_leakage = std::max(rep.max_leakage, k.leakage());
    CMatrix rho = rho0;
    for (std::size_t s = 0; s < n_steps; ++s) rho = hermitize(k.unconditional(rho));
    return trace_distance(rho, master.back().rho);
  };
  rep.bias_tau = channel_bias(cfg.tau, steps);
  rep.bias_half_tau = channel_bias(0.5 * cfg.tau, 2 * steps);
  rep.bias_ratio = rep.bias_half_tau > 0.0 ? rep.bias_tau / rep.bias_half_tau : 0.0;
  return rep;
}

OutputRelationReport output_relation_check(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& rho0,
                                           std::size_t steps, std::size_t ensemble, const RngStream& rng,
                                           std::size_t windows) {
  require_valid(m);
  require_valid(cfg);
  if (ensemble < 2) throw std::invalid_argument("output_relation_check: ensemble must be >= 2");
  if (windows < 1 || windows > steps) throw std::invalid_argument("output_relation_check: bad window count");
  const CollisionKernel kernel(m, cfg);
  const double tau = cfg.tau;
  const auto master = evolve_master(m, rho0, tau * static_cast<double>(steps), tau);

  std::vector<std::vector<double>> dY(ensemble);
  parallel_for(ensemble, [&](std::size_t i) {
    RngStream r = rng.child(i);
    dY[i] = oracle_trajectory(kernel, rho0, steps, r).record().dY;
  });

  OutputRelationReport rep;
  rep.nbar = m.nbar;
  rep.tau = tau;
  rep.steps = steps;
  rep.ensemble = ensemble;

  for (std::size_t k = 0; k < steps; ++k) {
    Moments mk;
    for (const auto& traj : dY) mk.add(traj[k]);
    const double expected = tau * readout(m.L, master[k].rho);
    const double se = mk.std_error();
    if (se > 0.0) rep.max_abs_z_per_step = std::max(rep.max_abs_z_per_step, std::abs(mk.mean() - expected) / se);
  }

  // The O(tau) allowance is the exact gap between the outcome-averaged
  // collision channel's mean readout and the master-equation prediction.
  std::vector<double> exact(steps);
  {
    CMatrix rho = rho0;
    const double s = std::sqrt(tau);
    for (std::size_t k = 0; k < steps; ++k) {
      double e = 0.0;
      for (const auto& br : kernel.branches()) e += s * br.q * trace_product_re(br.effect, rho);
      exact[k] = e;
      rho = hermitize(kernel.unconditional(rho));
    }
  }

  rep.pass = true;
  const std::size_t base = steps / windows;
  std::size_t first = 0;
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t len = w + 1 == windows ? steps - first : base;
    OutputRelationWindow win;
    win.first_step = first;
    win.steps = len;
    Moments mw;
    for (const auto& traj : dY) {
      double s = 0.0;
      for (std::size_t k = first; k < first + len; ++k) s += traj[k];
      mw.add(s);
    }
    double exact_sum = 0.0;
    for (std::size_t k = first; k < first + len; ++k) {
      win.expected += tau * readout(m.L, master[k].rho);
      exact_sum += exact[k];
    }
    win.observed = mw.mean();
    win.std_error = mw.std_error();
    win.allowance = std::abs(exact_sum - win.expected);
    win.z = win.std_error > 0.0 ? (win.observed - win.expected) / win.std_error : 0.0;
    win.pass = std::abs(win.observed - win.expected) <= 3.0 * win.std_error + win.allowance;
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(win.z));
    rep.pass = rep.pass && win.pass;
    rep.windows.push_back(win);
    first += len;
  }
  return rep;
}

ReferenceProcessReport reference_process_check(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& X,
                                               const CMatrix& rho0, std::size_t steps) {
  require_valid(m);
  require_valid(cfg);
  require_state(rho0, m.dim(), "reference_process_check");
  if (!is_hermitian(X, 1e-10) || X.rows() != m.dim()) {
    throw std::invalid_argument("reference_process_check: X must be Hermitian of model dimension");
  }
  const double tau = cfg.tau;
  const double n = m.nbar;
  const Eigen::Index na = ancilla_dim(cfg);
  const CMatrix Ia = identity(na);
  const CMatrix Is = identity(m.dim());

  const CMatrix b = coupling_b(cfg, n);
  const CMatrix bp = coupling_b_prime(cfg, n);
  const CMatrix dZ = std::sqrt(tau) * (b + b.adjoint());
  const CMatrix dZp = std::sqrt(tau) * (bp + bp.adjoint());
  const CMatrix Ld = m.L.adjoint();
  const CMatrix gain = (n + 1.0) * m.L + n * Ld;
  const CMatrix cross = std::sqrt(n * (n + 1.0)) * (m.L + Ld);
  const CMatrix V = kron(Is, Ia) + kron(gain, dZ) - kron(cross, dZp) + tau * kron(drift_K(m), Ia);

  const auto u_ops = vacuum_columns(step_unitary(m, cfg), m.dim(), na);
  const auto v_ops = vacuum_columns(V, m.dim(), na);
  CMatrix rho_u = rho0;
  CMatrix rho_v = rho0;
  for (std::size_t s = 0; s < steps; ++s) {
    rho_u = hermitize(apply_channel(u_ops, rho_u));
    rho_v = hermitize(apply_channel(v_ops, rho_v));
  }
  ReferenceProcessReport rep;
  rep.tau = tau;
  rep.steps = steps;
  rep.u_expectation = trace_product_re(X, rho_u);
  rep.v_expectation = trace_product_re(X, rho_v);
  rep.difference = std::abs(rep.v_expectation - rep.u_expectation);
  rep.v_norm = trace_re(rho_v);
  return rep;
}

ReferenceProcessStudy reference_process_study(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& X,
                                              const CMatrix& rho0, double T, std::size_t levels) {
  if (levels < 2) throw std::invalid_argument("reference_process_study: need at least two levels");
  ReferenceProcessStudy study;
  study.T = T;
  AncillaConfig c = cfg;
  for (std::size_t l = 0; l < levels; ++l) {
    const auto steps = static_cast<std::size_t>(std::llround(T / c.tau));
    study.runs.push_back(reference_process_check(m, c, X, rho0, steps));
    c.tau *= 0.5;
  }
  for (std::size_t l = 1; l < levels; ++l) {
    const double prev = study.runs[l - 1].difference;
    const double cur = study.runs[l].difference;
    study.observed_orders.push_back(cur > 0.0 && prev > 0.0 ? std::log2(prev / cur) : 0.0);
  }
  return study;
}

double observed_order(double coarse_error, double fine_error, double refinement) {
  if (!(coarse_error > 0.0) || !(fine_error > 0.0) || !(refinement > 1.0)) return 0.0;
  return std::log(coarse_error / fine_error) / std::log(refinement);
}

bool order_consistent(double observed, double expected) {
  return std::abs(observed - expected) <= kOrderTolerance;
}

namespace {

bool converges(const std::vector<VariantTracking>& runs) {
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (!(runs[i].tracking_error < runs[i - 1].tracking_error)) return false;
  }
  const double order = observed_order(runs.front().tracking_error, runs.back().tracking_error,
                                      runs.front().tau / runs.back().tau);
  return order >= kTrackingOrder - kOrderTolerance;
}

}  // namespace

AdjudicationReport filter_adjudication(const SystemModel& m, const AncillaConfig& cfg, const CMatrix& rho0,
                                       double T, std::size_t ensemble, const RngStream& rng, std::size_t levels,
                                       std::size_t checkpoints) {
  require_valid(m);
  require_valid(cfg);
  require_state(rho0, m.dim(), "filter_adjudication");
  if (ensemble < 2 || levels < 2 || checkpoints < 1) {
    throw std::invalid_argument("filter_adjudication: need ensemble >= 2, levels >= 2, checkpoints >= 1");
  }
  const double n = m.nbar;
  AdjudicationReport rep;
  rep.nbar = n;
  rep.T = T;
  rep.ensemble = ensemble;

  const FilterVariant variants[2] = {FilterVariant::PaperLiteral, FilterVariant::CorrelationCorrected};
  AncillaConfig c = cfg;
  for (std::size_t level = 0; level < levels; ++level, c.tau *= 0.5) {
    rep.taus.push_back(c.tau);
    const auto steps = static_cast<std::size_t>(std::llround(T / c.tau));
    if (steps < checkpoints) throw std::invalid_argument("filter_adjudication: fewer steps than checkpoints");
    std::vector<std::size_t> check_steps;
    for (std::size_t j = 1; j <= checkpoints; ++j) check_steps.push_back(steps * j / checkpoints);

    struct Slot {
      double time_avg[2] = {0.0, 0.0};
      std::vector<double> at_checks[2];
      Moments innov[2];
      std::size_t clamped[2] = {0, 0};
    };
    const CollisionKernel kernel(m, c);
    const RngStream level_rng = rng.child(level);
    std::vector<Slot> slots(ensemble);
    parallel_for(ensemble, [&](std::size_t i) {
      RngStream r = level_rng.child(i);
      const OracleTrajectory truth = oracle_trajectory(kernel, rho0, steps, r);
      const MeasurementRecord rec = truth.record();
      Slot& slot = slots[i];
      for (int v = 0; v < 2; ++v) {
        KsDiagnostics diag;
        CMatrix rho = rho0;
        double acc = 0.0;
        std::size_t next_check = 0;
        for (std::size_t k = 0; k < steps; ++k) {
          slot.innov[v].add(innovations(m, variants[v], rho, rec.dY[k], rec.dt));
          rho = ks_step(m, variants[v], rho, rec.dY[k], rec.dt, diag);
          const double td = trace_distance(rho, truth.states[k + 1]);
          acc += td;
          if (next_check < check_steps.size() && k + 1 == check_steps[next_check]) {
            slot.at_checks[v].push_back(td);
            ++next_check;
          }
        }
        slot.time_avg[v] = acc / static_cast<double>(steps);
        slot.clamped[v] = diag.clamped;
      }
    });

    for (int v = 0; v < 2; ++v) {
      VariantTracking vt;
      vt.variant = variants[v];
      vt.tau = c.tau;
      for (std::size_t s : check_steps) vt.checkpoint_times.push_back(c.tau * static_cast<double>(s));
      Moments tracking;
      Moments innov;
      std::vector<Moments> per_check(checkpoints);
      for (const auto& slot : slots) {
        tracking.add(slot.time_avg[v]);
        innov.count += slot.innov[v].count;
        innov.sum += slot.innov[v].sum;
        innov.sum_sq += slot.innov[v].sum_sq;
        for (std::size_t j = 0; j < checkpoints; ++j) per_check[j].add(slot.at_checks[v][j]);
        vt.clamped_steps += slot.clamped[v];
      }
      for (const auto& pc : per_check) {
        vt.mean_trace_distance.push_back(pc.mean());
        vt.std_error.push_back(pc.std_error());
      }
      vt.tracking_error = tracking.mean();
      vt.tracking_stderr = tracking.std_error();
      vt.innovations_mean = innov.mean();
      vt.innovations_mean_stderr = innov.std_error();
      vt.innovations_var = innov.variance();
      vt.innovations_var_expected = (2.0 * n + 1.0) * c.tau;
      (v == 0 ? rep.paper : rep.corrected).push_back(std::move(vt));
    }
  }

  rep.paper_converges = converges(rep.paper);
  rep.corrected_converges = converges(rep.corrected);
  const VariantTracking* winner = nullptr;
  if (rep.paper_converges && rep.corrected_converges) {
    rep.winner = "both";
    winner = &rep.corrected.back();
  } else if (rep.paper_converges) {
    rep.winner = "paper";
    winner = &rep.paper.back();
    rep.loser_floor = rep.corrected.back().tracking_error;
  } else if (rep.corrected_converges) {
    rep.winner = "corrected";
    winner = &rep.corrected.back();
    rep.loser_floor = rep.paper.back().tracking_error;
  } else {
    rep.winner = "none";
  }
  if (winner) {
    rep.winner_innovations_z =
        winner->innovations_mean_stderr > 0.0 ? winner->innovations_mean / winner->innovations_mean_stderr : 0.0;
    rep.winner_innovations_var_ratio = winner->innovations_var / winner->innovations_var_expected;
  }
  return rep;
}

}  // namespace qfilt
