#pragma once

// Experiment configuration read from a flat JSON object. Every key is
// optional; unknown keys, wrong types and out-of-range values are rejected
// with ConfigError before anything runs.
//
//   model            "detector" | "explicit"
//   kappa, omega     detector decay rate and level splitting
//   nbar             thermal occupation (exclusive with beta/thermal_omega)
//   beta, thermal_omega
//                    occupation from 1 / (exp(beta * thermal_omega) - 1)
//   L, H             explicit model: square matrices, rows of entries that are
//                    numbers or [re, im] pairs
//   rho0             "excited" | "ground" | "plus" | matrix
//   dt, T            filter / master step and horizon
//   ensemble         trajectories per ensemble
//   seed             master seed (the --seed flag overrides it)
//   variant          "paper" | "corrected" | "both"
//   trunc, tau       collision-model truncation and step
//   oracle_basis     "adapted" | "araki-woods"
//   oracle_T, oracle_ensemble, tau_levels
//                    oracle campaigns: horizon, trajectories, tau refinements
//   msamples         unraveling samples per record
//   output_stride    steps between CSV rows
//   save_trajectories
//                    also write one CSV per trajectory
//   identity_samples random operators for check-identities
//   threads          worker threads, 0 = hardware concurrency
//   out              output directory (the --out flag overrides it)

#include "qfilt/filter.hpp"
#include "qfilt/model.hpp"
#include "qfilt/oracle.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace qfilt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string model = "detector";
  double kappa = 1.0;
  double omega = 0.0;
  std::optional<double> nbar;
  std::optional<double> beta;
  std::optional<double> thermal_omega;
  CMatrix L;
  CMatrix H;
  std::string rho0_name = "excited";  // empty when rho0_matrix is used
  CMatrix rho0_matrix;
  double dt = 1e-3;
  double T = 4.0;
  std::size_t ensemble = 2000;
  std::uint64_t seed = 0;
  std::vector<FilterVariant> variants{FilterVariant::PaperLiteral, FilterVariant::CorrelationCorrected};
  int trunc = 4;
  double tau = 0.01;
  AncillaBasis oracle_basis = AncillaBasis::MeasurementAdapted;
  double oracle_T = 1.0;
  std::size_t oracle_ensemble = 500;
  std::size_t tau_levels = 3;
  std::size_t msamples = 500;
  std::size_t output_stride = 100;
  bool save_trajectories = false;
  std::size_t identity_samples = 100;
  unsigned threads = 0;
  std::filesystem::path out = "out";

  SystemModel system() const;
  CMatrix initial_state() const;
  AncillaConfig ancilla() const;
  double effective_nbar() const;
  std::size_t steps() const;         // T / dt
  std::size_t oracle_steps() const;  // oracle_T / tau

  /// Canonical JSON of every setting except seed, threads and out.
  nlohmann::json canonical() const;
  /// FNV-1a 64 of canonical().dump(), as 16 hex digits.
  std::string hash() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Range and consistency checks; throws ConfigError.
void validate(const ExperimentConfig& c);
/// Non-fatal advisories (for example n * tau > 0.1).
std::vector<std::string> warnings(const ExperimentConfig& c);

std::string to_string(AncillaBasis b);
AncillaBasis basis_from_string(const std::string& s);
std::vector<FilterVariant> variants_from_string(const std::string& s);

}  // namespace qfilt
