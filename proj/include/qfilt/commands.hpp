#pragma once

// Subcommands of the experiment driver. Each writes its CSV/JSON outputs into
// cfg.out and returns a manifest holding its pass/fail criteria; run_cli adds
// the wall-clock time and writes manifest.json.

#include "qfilt/config.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace qfilt {

inline constexpr int kExitPass = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitAcceptanceFailure = 2;

struct CriterionResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string code_version;
  std::uint64_t seed = 0;
  double wall_clock_seconds = 0.0;
  std::vector<CriterionResult> criteria;
  std::vector<std::string> outputs;  // file names relative to the output directory

  bool all_pass() const;
  nlohmann::json to_json() const;
};

const char* code_version();

RunManifest cmd_master(const ExperimentConfig& cfg);
RunManifest cmd_trajectories(const ExperimentConfig& cfg);
RunManifest cmd_check_identities(const ExperimentConfig& cfg);
RunManifest cmd_validate_oracle(const ExperimentConfig& cfg);
RunManifest cmd_unravel(const ExperimentConfig& cfg);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns one of the kExit codes.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qfilt
