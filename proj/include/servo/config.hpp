#pragma once

#include <cstdint>
#include <string>

#include "servo/dynamics.hpp"
#include "servo/fqi.hpp"
#include "servo/sim.hpp"

namespace servo {

/* Everything an experiment needs, resolvable from one JSON file plus command
 * line overrides. Parsing is strict: a schema-version field is required and
 * unrecognized keys anywhere in the document are an error, so a typo cannot
 * silently fall back to a default. */
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string featurizer = "chroma";
  int pyramid_levels = 2;
  DynamicsVariant variant = DynamicsVariant::LocallyConnected;
  int filter_size = 3;
  DynamicsTrainConfig dynamics;
  FqiConfig fqi;
  SimParams env;
  int data_trajectories = 100;
  int data_horizon = 100;
  double data_noise_sigma = 0.2;
  int cem_iterations = 10;
  int eval_trajectories = 100;
};

std::string to_string(TargetSplit split);
TargetSplit target_split_from_string(const std::string& s);

// Throws std::runtime_error on missing file, malformed JSON, wrong
// schema-version, missing seed, or any unknown key.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

}  // namespace servo
