#include "qfilt/commands.hpp"

#include "qfilt/ensemble.hpp"
#include "qfilt/generators.hpp"
#include "qfilt/record_io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#ifndef QFILT_VERSION
#define QFILT_VERSION "unknown"
#endif

namespace qfilt {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json numbers(const std::vector<double>& xs) {
  json a = json::array();
  for (double x : xs) a.push_back(number(x));
  return a;
}

json matrix_json(const CMatrix& m) {
  json re = json::array();
  json im = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json rr = json::array();
    json ri = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      rr.push_back(number(m(i, k).real()));
      ri.push_back(number(m(i, k).imag()));
    }
    re.push_back(rr);
    im.push_back(ri);
  }
  return {{"re", re}, {"im", im}};
}

class Outputs {
 public:
  Outputs(const ExperimentConfig& cfg, RunManifest& manifest) : dir_(cfg.out), manifest_(manifest) {
    fs::create_directories(dir_);
  }

  std::ofstream open(const std::string& name) {
    const fs::path p = dir_ / name;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    manifest_.outputs.push_back(name);
    return os;
  }

  void write_json(const std::string& name, const json& j) {
    auto os = open(name);
    os << j.dump(2) << '\n';
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  RunManifest& manifest_;
};

RunManifest start(const char* command, const ExperimentConfig& cfg) {
  RunManifest m;
  m.command = command;
  m.config_hash = cfg.hash();
  m.code_version = code_version();
  m.seed = cfg.seed;
  return m;
}

void criterion_le(RunManifest& m, const std::string& name, double value, double threshold) {
  m.criteria.push_back({name, std::isfinite(value) && value <= threshold, value, threshold});
}

void criterion_ge(RunManifest& m, const std::string& name, double value, double threshold) {
  m.criteria.push_back({name, std::isfinite(value) && value >= threshold, value, threshold});
}

void criterion_flag(RunManifest& m, const std::string& name, bool pass) {
  m.criteria.push_back({name, pass, pass ? 1.0 : 0.0, 1.0});
}

// Population of the highest basis level (|e> for the detector).
double top_population(const CMatrix& rho) { return rho(rho.rows() - 1, rho.cols() - 1).real(); }

std::vector<double> output_times(std::size_t steps, std::size_t stride, double dt) {
  std::vector<double> t;
  for (std::size_t k = 0; k <= steps; k += stride) t.push_back(static_cast<double>(k) * dt);
  if (steps % stride != 0) t.push_back(static_cast<double>(steps) * dt);
  return t;
}

int stride_of(const ExperimentConfig& cfg) {
  return static_cast<int>(std::min<std::size_t>(cfg.output_stride, cfg.steps()));
}

}  // namespace

const char* code_version() { return QFILT_VERSION; }

bool RunManifest::all_pass() const {
  for (const auto& c : criteria) {
    if (!c.pass) return false;
  }
  return true;
}

json RunManifest::to_json() const {
  json crit = json::array();
  for (const auto& c : criteria) {
    crit.push_back({{"name", c.name}, {"pass", c.pass}, {"value", number(c.value)}, {"threshold", number(c.threshold)}});
  }
  return {{"command", command},
          {"config_hash", config_hash},
          {"code_version", code_version},
          {"seed", seed},
          {"wall_clock_seconds", wall_clock_seconds},
          {"criteria", crit},
          {"all_pass", all_pass()},
          {"outputs", outputs}};
}

RunManifest cmd_master(const ExperimentConfig& cfg) {
  RunManifest man = start("master", cfg);
  Outputs out(cfg, man);
  const SystemModel m = cfg.system();
  const CMatrix rho0 = cfg.initial_state();
  const auto series = evolve_master(m, rho0, cfg.T, cfg.dt, stride_of(cfg));

  double trace_drift = 0.0;
  double min_eig = 1.0;
  {
    auto os = out.open("master.csv");
    std::vector<std::string> cols{"t"};
    for (auto& c : state_columns(m.dim())) cols.push_back(c);
    cols.push_back("p_e");
    write_csv_header(os, cols);
    for (const auto& s : series) {
      std::vector<double> row{s.t};
      for (double v : state_values(s.rho)) row.push_back(v);
      row.push_back(top_population(s.rho));
      write_csv_row(os, row);
      trace_drift = std::max(trace_drift, std::abs(trace_re(s.rho) - 1.0));
      min_eig = std::min(min_eig, min_eigenvalue(s.rho));
    }
  }
  const CMatrix& last = series.back().rho;
  out.write_json("master_summary.json", {{"nbar", m.nbar},
                                         {"T", series.back().t},
                                         {"dt", cfg.dt},
                                         {"final_state", matrix_json(last)},
                                         {"final_p_e", top_population(last)},
                                         {"trace_drift", trace_drift},
                                         {"min_eigenvalue", min_eig}});
  criterion_le(man, "trace_drift", trace_drift, 1e-9);
  criterion_ge(man, "min_eigenvalue", min_eig, -1e-8);
  return man;
}

RunManifest cmd_trajectories(const ExperimentConfig& cfg) {
  RunManifest man = start("trajectories", cfg);
  Outputs out(cfg, man);
  const SystemModel m = cfg.system();
  const CMatrix rho0 = cfg.initial_state();
  const std::size_t steps = cfg.steps();
  const int stride = stride_of(cfg);
  const double T = static_cast<double>(steps) * cfg.dt;
  const auto master = evolve_master(m, rho0, T, cfg.dt, stride);
  const auto times = output_times(steps, static_cast<std::size_t>(stride), cfg.dt);
  const std::size_t n_out = times.size();
  const std::size_t nv = cfg.variants.size();

  struct Slot {
    MeasurementRecord record;
    std::vector<std::vector<CMatrix>> states;  // per variant
    std::vector<KsDiagnostics> diag;
    std::vector<bool> collapsed;
  };
  std::vector<Slot> slots(cfg.ensemble);
  const RngStream root(cfg.seed, 1);
  parallel_for(
      cfg.ensemble,
      [&](std::size_t i) {
        RngStream r = root.child(i);
        Slot& s = slots[i];
        GeneratedRecord g = generate_record(m, rho0, T, cfg.dt, r, stride);
        s.states.resize(nv);
        s.diag.resize(nv);
        s.collapsed.assign(nv, false);
        for (std::size_t v = 0; v < nv; ++v) {
          try {
            s.states[v] = run_ks(m, cfg.variants[v], rho0, g.record, stride, &s.diag[v]);
          } catch (const std::runtime_error&) {
            s.collapsed[v] = true;
          }
        }
        if (cfg.save_trajectories) s.record = std::move(g.record);
      },
      cfg.threads);

  if (cfg.save_trajectories) {
    for (std::size_t i = 0; i < cfg.ensemble; ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "records/traj_%05zu.csv", i);
      auto os = out.open(name);
      write_record_csv(os, slots[i].record);
    }
  }

  const auto dim = m.dim();
  for (std::size_t v = 0; v < nv; ++v) {
    const std::string tag = to_string(cfg.variants[v]);
    std::size_t collapsed = 0;
    std::size_t clamped = 0;
    for (const auto& s : slots) {
      collapsed += s.collapsed[v] ? 1 : 0;
      clamped += s.diag[v].clamped;
    }

    std::vector<std::vector<Moments>> comp(n_out, std::vector<Moments>(static_cast<std::size_t>(2 * dim * dim)));
    std::vector<Moments> pe(n_out);
    for (const auto& s : slots) {
      if (s.collapsed[v]) continue;
      for (std::size_t k = 0; k < n_out; ++k) {
        const auto vals = state_values(s.states[v][k]);
        for (std::size_t c = 0; c < vals.size(); ++c) comp[k][c].add(vals[c]);
        pe[k].add(top_population(s.states[v][k]));
      }
    }

    std::vector<double> sigma(n_out, 0.0);
    double max_sigma = 0.0;
    {
      auto os = out.open("trajectories_" + tag + "_mean.csv");
      std::vector<std::string> cols{"t"};
      for (auto& c : state_columns(dim)) cols.push_back(c);
      for (auto& c : state_columns(dim)) cols.push_back(c + "_stderr");
      for (const char* c : {"p_e", "p_e_stderr", "p_e_master", "p_e_sigma"}) cols.push_back(c);
      write_csv_header(os, cols);
      for (std::size_t k = 0; k < n_out; ++k) {
        std::vector<double> row{times[k]};
        for (auto& c : comp[k]) row.push_back(c.mean());
        for (auto& c : comp[k]) row.push_back(c.std_error());
        const double ref = top_population(master[k].rho);
        const double se = pe[k].std_error();
        const double diff = std::abs(pe[k].mean() - ref);
        // An exactly reproduced deterministic value has zero spread.
        sigma[k] = se > 0.0 ? diff / se : (diff <= 1e-12 ? 0.0 : INFINITY);
        max_sigma = std::max(max_sigma, sigma[k]);
        row.insert(row.end(), {pe[k].mean(), se, ref, sigma[k]});
        write_csv_row(os, row);
      }
    }

    CMatrix mean_final = CMatrix::Zero(dim, dim);
    std::size_t used = 0;
    for (const auto& s : slots) {
      if (s.collapsed[v]) continue;
      mean_final += s.states[v].back();
      ++used;
    }
    if (used) mean_final /= static_cast<double>(used);
    out.write_json("trajectories_" + tag + "_summary.json",
                   {{"variant", tag},
                    {"nbar", m.nbar},
                    {"ensemble", cfg.ensemble},
                    {"collapsed", collapsed},
                    {"clamped_steps", clamped},
                    {"times", numbers(times)},
                    {"mean_final_state", matrix_json(mean_final)},
                    {"master_final_state", matrix_json(master.back().rho)},
                    {"master_deviation_sigma", number(max_sigma)},
                    {"master_deviation_sigma_per_time", numbers(sigma)}});

    if (cfg.save_trajectories) {
      for (std::size_t i = 0; i < cfg.ensemble; ++i) {
        if (slots[i].collapsed[v]) continue;
        char name[96];
        std::snprintf(name, sizeof name, "trajectories_%s/traj_%05zu.csv", tag.c_str(), i);
        auto os = out.open(name);
        std::vector<std::string> cols{"t"};
        for (auto& c : state_columns(dim)) cols.push_back(c);
        write_csv_header(os, cols);
        for (std::size_t k = 0; k < n_out; ++k) {
          std::vector<double> row{times[k]};
          for (double x : state_values(slots[i].states[v][k])) row.push_back(x);
          write_csv_row(os, row);
        }
      }
    }

    criterion_le(man, "trajectories_" + tag + "_master_deviation_sigma", max_sigma, 3.0);
    criterion_le(man, "trajectories_" + tag + "_collapsed", static_cast<double>(collapsed), 0.0);
  }

  if (nv == 2 && m.nbar == 0.0) {
    bool identical = true;
    for (const auto& s : slots) {
      if (s.collapsed[0] != s.collapsed[1]) identical = false;
      if (!identical || s.collapsed[0]) continue;
      for (std::size_t k = 0; k < n_out && identical; ++k) identical = s.states[0][k] == s.states[1][k];
    }
    criterion_flag(man, "variants_bit_identical", identical);
  }
  return man;
}

RunManifest cmd_check_identities(const ExperimentConfig& cfg) {
  RunManifest man = start("check-identities", cfg);
  Outputs out(cfg, man);
  const SystemModel m = cfg.system();
  RngStream rng(cfg.seed, 3);
  const GeneratorReport rep = m_collapse_report(m, cfg.identity_samples, rng);

  const auto d = m.dim();
  double duality = 0.0;
  double hermiticity = 0.0;
  double trace_pres = 0.0;
  for (std::size_t s = 0; s < cfg.identity_samples; ++s) {
    const CMatrix X = random_hermitian(d, rng);
    const CMatrix rho = random_density(d, rng);
    const CMatrix LX = lindblad_heisenberg(m, X);
    const CMatrix Lrho = lindblad_schrodinger(m, rho);
    duality = std::max(duality, std::abs(trace_product_re(rho, LX) - trace_product_re(Lrho, X)));
    hermiticity = std::max(hermiticity, hermiticity_defect(LX));
    trace_pres = std::max(trace_pres, std::abs(Lrho.trace()));
  }
  const double unitality = max_abs(lindblad_heisenberg(m, identity(d)));

  out.write_json("identities.json", {{"nbar", m.nbar},
                                     {"dim", d},
                                     {"n_samples", rep.n_samples},
                                     {"ito_deviation", rep.max_deviation},
                                     {"paper_literal_deviation", rep.paper_literal_max_deviation},
                                     {"deviations", numbers(rep.deviations)},
                                     {"paper_literal_deviations", numbers(rep.paper_literal_deviations)},
                                     {"duality_residual", duality},
                                     {"unitality_residual", unitality},
                                     {"hermiticity_residual", hermiticity},
                                     {"trace_preservation_residual", trace_pres}});
  criterion_le(man, "ito_deviation", rep.max_deviation, 1e-11);
  criterion_le(man, "duality_residual", duality, 1e-11);
  criterion_le(man, "unitality_residual", unitality, 1e-12);
  criterion_le(man, "hermiticity_residual", hermiticity, 1e-11);
  return man;
}

namespace {

json tracking_json(const VariantTracking& t) {
  return {{"variant", to_string(t.variant)},
          {"tau", t.tau},
          {"checkpoint_times", numbers(t.checkpoint_times)},
          {"mean_trace_distance", numbers(t.mean_trace_distance)},
          {"stderr", numbers(t.std_error)},
          {"tracking_error", t.tracking_error},
          {"tracking_stderr", t.tracking_stderr},
          {"innovations_mean", t.innovations_mean},
          {"innovations_mean_stderr", t.innovations_mean_stderr},
          {"innovations_var", t.innovations_var},
          {"innovations_var_expected", t.innovations_var_expected},
          {"clamped_steps", t.clamped_steps}};
}

constexpr double kExactAgreement = 1e-14;

std::vector<std::pair<std::string, CMatrix>> probe_observables(const SystemModel& m) {
  if (m.dim() == 2) return {{"sigma_z", sigma_z()}, {"sigma_x", sigma_x()}};
  CMatrix top = CMatrix::Zero(m.dim(), m.dim());
  top(m.dim() - 1, m.dim() - 1) = 1.0;
  return {{"L+L^dag", m.L + m.L.adjoint()}, {"top_projector", top}};
}

}  // namespace

RunManifest cmd_validate_oracle(const ExperimentConfig& cfg) {
  RunManifest man = start("validate-oracle", cfg);
  Outputs out(cfg, man);
  const SystemModel m = cfg.system();
  const CMatrix rho0 = cfg.initial_state();
  const AncillaConfig anc = cfg.ancilla();
  const std::size_t steps = cfg.oracle_steps();
  const RngStream root(cfg.seed, 2);

  const AdjudicationReport adj =
      filter_adjudication(m, anc, rho0, cfg.oracle_T, cfg.oracle_ensemble, root.child(0), cfg.tau_levels);
  const OutputRelationReport orel = output_relation_check(m, anc, rho0, steps, cfg.oracle_ensemble, root.child(1));
  const UnconditionalReport unc = unconditional_check(m, anc, rho0, steps, cfg.oracle_ensemble, root.child(2));

  json variants = json::array();
  for (const auto& t : adj.paper) variants.push_back(tracking_json(t));
  for (const auto& t : adj.corrected) variants.push_back(tracking_json(t));
  json paper_errors = json::array();
  json corrected_errors = json::array();
  for (std::size_t i = 0; i < adj.taus.size(); ++i) {
    paper_errors.push_back(adj.paper[i].tracking_error);
    corrected_errors.push_back(adj.corrected[i].tracking_error);
  }
  json adjudication = {{"nbar", adj.nbar},
                       {"T", adj.T},
                       {"ensemble", adj.ensemble},
                       {"taus", numbers(adj.taus)},
                       {"paper_tracking_error", paper_errors},
                       {"corrected_tracking_error", corrected_errors},
                       {"paper_converges", adj.paper_converges},
                       {"corrected_converges", adj.corrected_converges},
                       {"winner", adj.winner},
                       {"loser_floor", adj.loser_floor},
                       {"winner_innovations_z", adj.winner_innovations_z},
                       {"winner_innovations_var_ratio", adj.winner_innovations_var_ratio},
                       {"variants", variants}};

  json windows = json::array();
  for (const auto& w : orel.windows) {
    windows.push_back({{"first_step", w.first_step},
                       {"steps", w.steps},
                       {"observed", w.observed},
                       {"expected", w.expected},
                       {"stderr", w.std_error},
                       {"allowance", w.allowance},
                       {"z", w.z},
                       {"pass", w.pass}});
  }
  json output_relation = {{"nbar", orel.nbar},
                          {"tau", orel.tau},
                          {"steps", orel.steps},
                          {"ensemble", orel.ensemble},
                          {"max_abs_z", orel.max_abs_z},
                          {"max_abs_z_per_step", orel.max_abs_z_per_step},
                          {"pass", orel.pass},
                          {"windows", windows}};

  json reference = json::array();
  for (const auto& [name, X] : probe_observables(m)) {
    const ReferenceProcessStudy study = reference_process_study(m, anc, X, rho0, cfg.oracle_T, cfg.tau_levels);
    json runs = json::array();
    for (const auto& r : study.runs) {
      runs.push_back({{"tau", r.tau},
                      {"steps", r.steps},
                      {"u_expectation", r.u_expectation},
                      {"v_expectation", r.v_expectation},
                      {"difference", r.difference},
                      {"v_norm", r.v_norm}});
    }
    // Both propagators agree to rounding at every tau, so there is no error to decay.
    bool exact = true;
    for (const auto& r : study.runs) exact = exact && r.difference <= kExactAgreement;
    reference.push_back({{"observable", name}, {"T", study.T}, {"runs", runs},
                         {"observed_orders", numbers(study.observed_orders)}, {"exact", exact}});
    for (std::size_t i = 0; i < study.observed_orders.size(); ++i) {
      const double o = study.observed_orders[i];
      man.criteria.push_back({"reference_process_order_" + name + "_" + std::to_string(i),
                              exact || order_consistent(o, 1.0), o, 1.0});
    }
  }

  const double bias_order = unc.bias_ratio > 0.0 ? std::log2(unc.bias_ratio) : 0.0;
  json unconditional = {{"tau", unc.tau},
                        {"steps", unc.steps},
                        {"ensemble", unc.ensemble},
                        {"max_trace_distance_mc", unc.max_trace_distance_mc},
                        {"bias_tau", unc.bias_tau},
                        {"bias_half_tau", unc.bias_half_tau},
                        {"bias_ratio", unc.bias_ratio},
                        {"bias_order", bias_order},
                        {"max_leakage", unc.max_leakage},
                        {"max_probability_sum_defect", unc.max_probability_sum_defect},
                        {"min_state_eigenvalue", unc.min_state_eigenvalue}};

  out.write_json("oracle.json", {{"oracle_basis", to_string(anc.basis)},
                                 {"trunc", anc.trunc},
                                 {"adjudication", adjudication},
                                 {"output_relation", output_relation},
                                 {"reference_process", reference},
                                 {"unconditional", unconditional}});

  const bool decisive = m.nbar == 0.0 ? adj.winner == "both" : (adj.winner == "paper" || adj.winner == "corrected");
  criterion_flag(man, "adjudication_decisive", decisive);
  criterion_le(man, "winner_innovations_abs_z", std::abs(adj.winner_innovations_z), 4.0);
  criterion_le(man, "winner_innovations_var_rel_error", std::abs(adj.winner_innovations_var_ratio - 1.0), 0.05);
  criterion_flag(man, "output_relation", orel.pass);
  criterion_le(man, "unconditional_trace_distance", unc.max_trace_distance_mc, 0.02);
  man.criteria.push_back({"unconditional_bias_order", order_consistent(bias_order, 1.0), bias_order, 1.0});
  criterion_le(man, "born_rule_defect", unc.max_probability_sum_defect, 1e-10);
  criterion_ge(man, "conditional_min_eigenvalue", unc.min_state_eigenvalue, -1e-10);
  criterion_le(man, "leakage", unc.max_leakage, 1e-4);
  return man;
}

RunManifest cmd_unravel(const ExperimentConfig& cfg) {
  RunManifest man = start("unravel", cfg);
  const SystemModel m = cfg.system();
  const CMatrix rho0 = cfg.initial_state();
  const Eigh e = eigh(rho0);
  if (std::abs(e.eigenvalues.back() - 1.0) > 1e-10) {
    throw ConfigError("config: unravel needs a pure rho0");
  }
  const CVector psi0 = e.eigenvectors.col(e.eigenvectors.cols() - 1);
  Outputs out(cfg, man);
  const std::size_t steps = cfg.steps();
  const int stride = stride_of(cfg);
  const double T = static_cast<double>(steps) * cfg.dt;

  RngStream rec_rng(cfg.seed, 4);
  const GeneratedRecord g = generate_record(m, rho0, T, cfg.dt, rec_rng, stride);
  save_record_csv(out.dir() / "unravel_record.csv", g.record);
  man.outputs.push_back("unravel_record.csv");
  const auto avg = coarse_grain_unravel(m, psi0, g.record, cfg.msamples, RngStream(cfg.seed, 5), stride);
  const auto times = output_times(steps, static_cast<std::size_t>(stride), cfg.dt);
  const bool coupled = max_abs(m.L) > 0.0;

  for (const FilterVariant v : cfg.variants) {
    const std::string tag = to_string(v);
    bool collapsed = false;
    std::vector<CMatrix> zak;
    try {
      zak = run_zakai(m, v, rho0, g.record, stride);
    } catch (const FilterCollapse&) {
      collapsed = true;
    }
    std::vector<double> dist;
    {
      auto os = out.open("unravel_" + tag + ".csv");
      std::vector<std::string> cols{"t", "trace_distance"};
      for (auto& c : state_columns(m.dim(), "unravel")) cols.push_back(c);
      for (auto& c : state_columns(m.dim(), "zakai")) cols.push_back(c);
      write_csv_header(os, cols);
      for (std::size_t k = 0; k < times.size() && !collapsed; ++k) {
        const CMatrix a = avg[k] / trace_re(avg[k]);
        const CMatrix z = zak[k] / trace_re(zak[k]);
        dist.push_back(trace_distance(a, z));
        std::vector<double> row{times[k], dist.back()};
        for (double x : state_values(a)) row.push_back(x);
        for (double x : state_values(z)) row.push_back(x);
        write_csv_row(os, row);
      }
    }
    double max_d = 0.0;
    double mean_d = 0.0;
    for (double d : dist) {
      max_d = std::max(max_d, d);
      mean_d += d;
    }
    if (!dist.empty()) mean_d /= static_cast<double>(dist.size());
    out.write_json("unravel_" + tag + "_summary.json", {{"variant", tag},
                                                        {"nbar", m.nbar},
                                                        {"msamples", cfg.msamples},
                                                        {"dt", cfg.dt},
                                                        {"collapsed", collapsed},
                                                        {"max_trace_distance", number(max_d)},
                                                        {"mean_trace_distance", number(mean_d)},
                                                        {"final_trace_distance", dist.empty() ? json(nullptr)
                                                                                              : number(dist.back())}});
    criterion_flag(man, "unravel_" + tag + "_completed", !collapsed);
    if (!coupled) criterion_le(man, "unravel_" + tag + "_uncoupled_distance", max_d, 1e-10);
  }
  return man;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite-temperature homodyne filtering experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string variant;
  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--variant", variant, "filter variant")->check(CLI::IsMember({"paper", "corrected", "both"}));
  };
  using Command = RunManifest (*)(const ExperimentConfig&);
  const std::vector<std::tuple<const char*, const char*, Command>> table{
      {"master", "integrate the master equation", cmd_master},
      {"trajectories", "filter ensembles against the master equation", cmd_trajectories},
      {"check-identities", "generator identities", cmd_check_identities},
      {"validate-oracle", "collision-model campaigns", cmd_validate_oracle},
      {"unravel", "coarse-grained unraveling vs the Zakai filter", cmd_unravel}};
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& [name, help, fn] : table) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_flags(sub);
    subs.emplace_back(sub, fn);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitPass;
    }
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  Command fn = nullptr;
  for (const auto& [sub, f] : subs) {
    if (sub->parsed()) fn = f;
  }

  ExperimentConfig cfg;
  try {
    cfg = config_path.empty() ? parse_config(nlohmann::json::object()) : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (!variant.empty()) cfg.variants = variants_from_string(variant);
    validate(cfg);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  for (const auto& w : warnings(cfg)) err << "warning: " << w << '\n';

  const auto t0 = std::chrono::steady_clock::now();
  RunManifest man;
  try {
    man = fn(cfg);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: run failed: " << e.what() << '\n';
    return kExitAcceptanceFailure;
  }
  man.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    std::ofstream os(cfg.out / "manifest.json");
    if (!os) {
      err << "error: cannot write manifest in " << cfg.out.string() << '\n';
      return kExitAcceptanceFailure;
    }
    os << man.to_json().dump(2) << '\n';
  }
  for (const auto& c : man.criteria) {
    out << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " threshold=" << c.threshold << '\n';
  }
  out << man.command << ": " << (man.all_pass() ? "all criteria passed" : "criteria failed") << " (" << cfg.out.string()
      << ")\n";
  return man.all_pass() ? kExitPass : kExitAcceptanceFailure;
}

}  // namespace qfilt
