#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "matd3/marl/agent.hpp"

namespace matd3::harness {

struct ProbeParams {
  int pairs_per_eval = 100;
  int n_rollouts = 200;
  int rollout_len = 100;
};

/// One experiment: a scenario/algorithm pair, hyperparameters and the seeds
/// to repeat it over. Parsed from a sectioned key-value file; unknown keys
/// are errors.
struct ExperimentConfig {
  std::string scenario = "cooperative_navigation";
  std::string algorithm = "matd3";
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "runs/experiment";
  long eval_cadence = 1000;
  bool probe_enabled = false;
  marl::HyperParams hp;
  ProbeParams probe;

  void validate() const;
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig parse_config_file(const std::string& path);

/// Canonical text form; parse(serialize(c)) == c and the serialization is
/// the hashing domain.
std::string serialize_config(const ExperimentConfig& config);

std::uint64_t config_hash(const ExperimentConfig& config);

/// Header comment stamped into every output file.
std::string output_header(const ExperimentConfig& config);

/// Sets one hyperparameter by config key; throws ConfigError for unknown
/// names (shared by the config parser and grid-search axis validation).
void apply_hyperparam(marl::HyperParams& hp, const std::string& key, const std::string& value);

/// Known hyperparameter keys, in canonical serialization order.
const std::vector<std::string>& hyperparam_keys();

}  // namespace matd3::harness
