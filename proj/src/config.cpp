#include "qfilt/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace qfilt {

using nlohmann::json;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "model", "kappa", "omega", "nbar", "beta", "thermal_omega", "L", "H", "rho0",
      "dt", "T", "ensemble", "seed", "variant",
      "trunc", "tau", "oracle_basis", "oracle_T", "oracle_ensemble", "tau_levels",
      "msamples", "output_stride", "save_trajectories", "identity_samples", "threads", "out"};
  return keys;
}

double get_real(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(std::string("config: '") + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(std::string("config: '") + key + "' must be finite");
  return x;
}

std::uint64_t get_count(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(std::string("config: '") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string get_string(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(std::string("config: '") + key + "' must be a string");
  return v.get<std::string>();
}

Complex parse_entry(const json& v, const char* key) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  throw ConfigError(std::string("config: entries of '") + key + "' must be numbers or [re, im] pairs");
}

CMatrix parse_matrix(const json& v, const char* key) {
  if (!v.is_array() || v.empty()) throw ConfigError(std::string("config: '") + key + "' must be a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(v.size());
  CMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw ConfigError(std::string("config: '") + key + "' must be square");
    }
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = parse_entry(row[static_cast<std::size_t>(k)], key);
  }
  if (!all_finite(m)) throw ConfigError(std::string("config: '") + key + "' has non-finite entries");
  return m;
}

json matrix_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back({m(i, k).real(), m(i, k).imag()});
    rows.push_back(row);
  }
  return rows;
}

std::string variants_to_string(const std::vector<FilterVariant>& v) {
  if (v.size() == 2) return "both";
  return to_string(v.front());
}

}  // namespace

std::string to_string(AncillaBasis b) {
  return b == AncillaBasis::ArakiWoods ? "araki-woods" : "adapted";
}

AncillaBasis basis_from_string(const std::string& s) {
  if (s == "adapted") return AncillaBasis::MeasurementAdapted;
  if (s == "araki-woods") return AncillaBasis::ArakiWoods;
  throw ConfigError("config: oracle_basis must be 'adapted' or 'araki-woods', got '" + s + "'");
}

std::vector<FilterVariant> variants_from_string(const std::string& s) {
  if (s == "both") return {FilterVariant::PaperLiteral, FilterVariant::CorrelationCorrected};
  if (s == "paper") return {FilterVariant::PaperLiteral};
  if (s == "corrected") return {FilterVariant::CorrelationCorrected};
  throw ConfigError("variant must be 'paper', 'corrected' or 'both', got '" + s + "'");
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known_keys().count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  ExperimentConfig c;
  if (j.contains("model")) c.model = get_string(j, "model");
  if (j.contains("kappa")) c.kappa = get_real(j, "kappa");
  if (j.contains("omega")) c.omega = get_real(j, "omega");
  if (j.contains("nbar")) c.nbar = get_real(j, "nbar");
  if (j.contains("beta")) c.beta = get_real(j, "beta");
  if (j.contains("thermal_omega")) c.thermal_omega = get_real(j, "thermal_omega");
  if (j.contains("L")) c.L = parse_matrix(j.at("L"), "L");
  if (j.contains("H")) c.H = parse_matrix(j.at("H"), "H");
  if (j.contains("rho0")) {
    const json& r = j.at("rho0");
    if (r.is_string()) {
      c.rho0_name = r.get<std::string>();
    } else {
      c.rho0_name.clear();
      c.rho0_matrix = parse_matrix(r, "rho0");
    }
  }
  if (j.contains("dt")) c.dt = get_real(j, "dt");
  if (j.contains("T")) c.T = get_real(j, "T");
  if (j.contains("ensemble")) c.ensemble = get_count(j, "ensemble");
  if (j.contains("seed")) c.seed = get_count(j, "seed");
  if (j.contains("variant")) c.variants = variants_from_string(get_string(j, "variant"));
  if (j.contains("trunc")) c.trunc = static_cast<int>(get_count(j, "trunc"));
  if (j.contains("tau")) c.tau = get_real(j, "tau");
  if (j.contains("oracle_basis")) c.oracle_basis = basis_from_string(get_string(j, "oracle_basis"));
  if (j.contains("oracle_T")) c.oracle_T = get_real(j, "oracle_T");
  if (j.contains("oracle_ensemble")) c.oracle_ensemble = get_count(j, "oracle_ensemble");
  if (j.contains("tau_levels")) c.tau_levels = get_count(j, "tau_levels");
  if (j.contains("msamples")) c.msamples = get_count(j, "msamples");
  if (j.contains("output_stride")) c.output_stride = get_count(j, "output_stride");
  if (j.contains("save_trajectories")) {
    if (!j.at("save_trajectories").is_boolean()) throw ConfigError("config: 'save_trajectories' must be a boolean");
    c.save_trajectories = j.at("save_trajectories").get<bool>();
  }
  if (j.contains("identity_samples")) c.identity_samples = get_count(j, "identity_samples");
  if (j.contains("threads")) c.threads = static_cast<unsigned>(get_count(j, "threads"));
  if (j.contains("out")) c.out = get_string(j, "out");
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (c.model != "detector" && c.model != "explicit") fail("model must be 'detector' or 'explicit'");
  const bool thermal = c.beta || c.thermal_omega;
  if (thermal && !(c.beta && c.thermal_omega)) fail("beta and thermal_omega must be given together");
  if (thermal && c.nbar) fail("give either nbar or beta/thermal_omega, not both");
  if (c.nbar && !(*c.nbar >= 0.0)) fail("nbar must be >= 0");
  if (thermal && !(*c.beta * *c.thermal_omega > 0.0)) fail("beta * thermal_omega must be > 0");
  if (c.model == "detector") {
    if (!(c.kappa > 0.0)) fail("kappa must be > 0");
    if (c.L.size() || c.H.size()) fail("L and H are only allowed with model 'explicit'");
  } else {
    if (c.L.size() == 0) fail("model 'explicit' needs L");
    if (c.H.size() && c.H.rows() != c.L.rows()) fail("H and L must have the same dimension");
  }
  if (!(c.dt > 0.0)) fail("dt must be > 0");
  if (!(c.T > 0.0)) fail("T must be > 0");
  if (c.T / c.dt > 1e9) fail("T / dt is too large");
  if (c.ensemble < 1) fail("ensemble must be >= 1");
  if (c.trunc < 3) fail("trunc must be >= 3");
  if (c.trunc > 12) fail("trunc must be <= 12");
  if (!(c.tau > 0.0)) fail("tau must be > 0");
  if (!(c.oracle_T > 0.0)) fail("oracle_T must be > 0");
  if (c.oracle_T / c.tau > 1e8) fail("oracle_T / tau is too large");
  if (c.oracle_ensemble < 2) fail("oracle_ensemble must be >= 2");
  if (c.tau_levels < 2) fail("tau_levels must be >= 2");
  if (c.msamples < 1) fail("msamples must be >= 1");
  if (c.output_stride < 1) fail("output_stride must be >= 1");
  if (c.dt > 0.0 && c.T > 0.0) {
    const auto steps = static_cast<std::size_t>(std::llround(c.T / c.dt));
    if (steps < 1) fail("T must be at least one dt");
    if (c.output_stride < steps && steps % c.output_stride != 0) fail("output_stride must divide T / dt");
  }
  if (c.identity_samples < 1) fail("identity_samples must be >= 1");
  if (c.out.empty()) fail("out must not be empty");
  try {
    const SystemModel m = c.system();
    require_valid(m);
    require_state(c.initial_state(), m.dim(), "rho0");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(e.what());
  }
}

std::vector<std::string> warnings(const ExperimentConfig& c) {
  std::vector<std::string> out;
  const double n = c.effective_nbar();
  if (n * c.tau > 0.1) {
    out.push_back("nbar * tau = " + std::to_string(n * c.tau) + " exceeds 0.1; the collision model may be inaccurate");
  }
  const double steps = c.T / c.dt;
  if (std::abs(steps - std::round(steps)) > 1e-9 * steps) {
    out.push_back("T is not a multiple of dt; the horizon is rounded to the nearest step");
  }
  return out;
}

double ExperimentConfig::effective_nbar() const {
  if (beta && thermal_omega) return nbar_from_thermal({*beta, *thermal_omega});
  return nbar.value_or(0.0);
}

SystemModel ExperimentConfig::system() const {
  if (model == "detector") {
    DetectorPreset p;
    p.kappa = kappa;
    p.omega = omega;
    p.nbar = nbar.value_or(0.0);
    if (beta && thermal_omega) p.thermal = ThermalParams{*beta, *thermal_omega};
    return build_detector(p);
  }
  SystemModel m;
  m.L = L;
  m.H = H.size() ? H : CMatrix::Zero(L.rows(), L.cols());
  m.nbar = effective_nbar();
  return m;
}

CMatrix ExperimentConfig::initial_state() const {
  if (rho0_name.empty()) return rho0_matrix;
  const Eigen::Index d = model == "detector" ? 2 : L.rows();
  if (d != 2) throw ConfigError("config: named rho0 states need a two-level model; give rho0 as a matrix");
  if (rho0_name == "excited") return projector_excited();
  if (rho0_name == "ground") return projector_ground();
  if (rho0_name == "plus") return density_of(plus_state());
  throw ConfigError("config: rho0 must be 'excited', 'ground', 'plus' or a matrix");
}

AncillaConfig ExperimentConfig::ancilla() const {
  AncillaConfig a;
  a.trunc = trunc;
  a.tau = tau;
  a.basis = oracle_basis;
  return a;
}

std::size_t ExperimentConfig::steps() const {
  return static_cast<std::size_t>(std::llround(T / dt));
}

std::size_t ExperimentConfig::oracle_steps() const {
  return static_cast<std::size_t>(std::llround(oracle_T / tau));
}

json ExperimentConfig::canonical() const {
  json j;
  j["model"] = model;
  if (model == "detector") {
    j["kappa"] = kappa;
    j["omega"] = omega;
  } else {
    j["L"] = matrix_json(L);
    j["H"] = matrix_json(H.size() ? H : CMatrix::Zero(L.rows(), L.cols()));
  }
  if (beta && thermal_omega) {
    j["beta"] = *beta;
    j["thermal_omega"] = *thermal_omega;
  } else {
    j["nbar"] = nbar.value_or(0.0);
  }
  if (rho0_name.empty()) {
    j["rho0"] = matrix_json(rho0_matrix);
  } else {
    j["rho0"] = rho0_name;
  }
  j["dt"] = dt;
  j["T"] = T;
  j["ensemble"] = ensemble;
  j["variant"] = variants_to_string(variants);
  j["trunc"] = trunc;
  j["tau"] = tau;
  j["oracle_basis"] = to_string(oracle_basis);
  j["oracle_T"] = oracle_T;
  j["oracle_ensemble"] = oracle_ensemble;
  j["tau_levels"] = tau_levels;
  j["msamples"] = msamples;
  j["output_stride"] = output_stride;
  j["save_trajectories"] = save_trajectories;
  j["identity_samples"] = identity_samples;
  return j;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : canonical().dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qfilt
