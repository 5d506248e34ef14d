#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmsc/env.hpp"
#include "mmsc/eval.hpp"
#include "mmsc/ppo.hpp"

namespace mmsc {

/// Full application configuration. Defaults reproduce the standard experiment
/// setup for the selected PDE; a config file and CLI flags override them.
struct AppConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";
  bool deterministic = false;

  EpisodeConfig episode = EpisodeConfig::defaults(PdeType::burgers_1d);
  PpoConfig rl;
  int eval_samples = 30;
  std::vector<double> snapshot_times = {0.0, 0.25, 0.5, 0.75, 1.0};

  static AppConfig defaults(PdeType pde);
  void validate() const;
};

/// Parses the INI-style config text: [section] headers, key = value lines,
/// '#' comments. Unknown sections or keys are rejected with their line
/// number. The [pde] kind key is applied first so kind-specific defaults back
/// the remaining keys.
AppConfig parse_config_text(const std::string& text);
AppConfig parse_config_file(const std::string& path);

/// Serializes the effective configuration back to config-file syntax.
std::string config_to_text(const AppConfig& config);

/// Writes run.json (config copy, seed, format version, subcommand) into dir.
void write_manifest(const AppConfig& config, const std::string& subcommand, const std::string& dir);

}  // namespace mmsc
