#include "servo/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace servo {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw std::runtime_error("config: " + where + " must be a JSON object");
}

void reject_unknown_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!ok.count(item.key())) throw std::runtime_error("config: unknown key \"" + item.key() + "\" in " + where);
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_dynamics(const json& j, DynamicsTrainConfig& c) {
  require_object(j, "dynamics");
  reject_unknown_keys(j, "dynamics",
                      {"iterations", "batch-size", "learning-rate", "weight-decay", "init-stddev"});
  read_field(j, "iterations", c.iterations);
  read_field(j, "batch-size", c.batch_size);
  read_field(j, "learning-rate", c.learning_rate);
  read_field(j, "weight-decay", c.weight_decay);
  read_field(j, "init-stddev", c.init_stddev);
}

void parse_fqi(const json& j, FqiConfig& c) {
  require_object(j, "fqi");
  reject_unknown_keys(j, "fqi",
                      {"sampling-iterations", "fqi-iterations", "trajectories-per-iteration", "gamma",
                       "exploration-sigma", "nu", "validation-trajectories"});
  read_field(j, "sampling-iterations", c.sampling_iterations);
  read_field(j, "fqi-iterations", c.fqi_iterations);
  read_field(j, "trajectories-per-iteration", c.trajectories_per_iteration);
  read_field(j, "gamma", c.gamma);
  read_field(j, "exploration-sigma", c.exploration_sigma);
  read_field(j, "nu", c.nu);
  read_field(j, "validation-trajectories", c.validation_trajectories);
}

void parse_env(const json& j, SimParams& p) {
  require_object(j, "env");
  reject_unknown_keys(j, "env", {"resolution", "horizon", "tau", "target-speed", "supersample", "split"});
  read_field(j, "resolution", p.resolution);
  read_field(j, "horizon", p.horizon);
  read_field(j, "tau", p.tau);
  read_field(j, "target-speed", p.target_speed);
  read_field(j, "supersample", p.supersample);
  if (j.contains("split")) p.split = target_split_from_string(j.at("split").get<std::string>());
}

}  // namespace

std::string to_string(TargetSplit split) { return split == TargetSplit::Train ? "train" : "novel"; }

TargetSplit target_split_from_string(const std::string& s) {
  if (s == "train") return TargetSplit::Train;
  if (s == "novel") return TargetSplit::Novel;
  throw std::runtime_error("config: unknown target split \"" + s + "\" (expected train or novel)");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config: malformed JSON: ") + e.what());
  }
  require_object(j, "top level");
  reject_unknown_keys(j, "top level",
                      {"schema-version", "seed", "featurizer", "pyramid-levels", "dynamics-variant",
                       "filter-size", "dynamics", "fqi", "env", "data", "cem", "evaluation"});
  if (!j.contains("schema-version")) throw std::runtime_error("config: missing schema-version");
  if (j.at("schema-version").get<int>() != 1) throw std::runtime_error("config: unsupported schema-version");
  if (!j.contains("seed")) throw std::runtime_error("config: missing seed");

  ExperimentConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  read_field(j, "featurizer", c.featurizer);
  read_field(j, "pyramid-levels", c.pyramid_levels);
  if (j.contains("dynamics-variant"))
    c.variant = dynamics_variant_from_string(j.at("dynamics-variant").get<std::string>());
  read_field(j, "filter-size", c.filter_size);
  if (j.contains("dynamics")) parse_dynamics(j.at("dynamics"), c.dynamics);
  if (j.contains("fqi")) parse_fqi(j.at("fqi"), c.fqi);
  if (j.contains("env")) parse_env(j.at("env"), c.env);
  if (j.contains("data")) {
    const json& d = j.at("data");
    require_object(d, "data");
    reject_unknown_keys(d, "data", {"trajectories", "horizon", "noise-sigma"});
    read_field(d, "trajectories", c.data_trajectories);
    read_field(d, "horizon", c.data_horizon);
    read_field(d, "noise-sigma", c.data_noise_sigma);
  }
  if (j.contains("cem")) {
    const json& d = j.at("cem");
    require_object(d, "cem");
    reject_unknown_keys(d, "cem", {"iterations"});
    read_field(d, "iterations", c.cem_iterations);
  }
  if (j.contains("evaluation")) {
    const json& d = j.at("evaluation");
    require_object(d, "evaluation");
    reject_unknown_keys(d, "evaluation", {"trajectories"});
    read_field(d, "trajectories", c.eval_trajectories);
  }

  if (c.pyramid_levels < 0) throw std::runtime_error("config: pyramid-levels must be non-negative");
  if (c.filter_size < 1 || c.filter_size % 2 == 0)
    throw std::runtime_error("config: filter-size must be a positive odd number");
  if (c.data_trajectories < 1 || c.data_horizon < 1)
    throw std::runtime_error("config: data trajectories and horizon must be positive");
  if (c.eval_trajectories < 1) throw std::runtime_error("config: evaluation trajectories must be positive");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace servo
