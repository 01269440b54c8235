#pragma once

#include <optional>
#include <string>

#include "servo/config.hpp"

namespace servo {

// Canonical artifact names inside one output directory, so chained commands
// find each other's files without extra flags.
struct OutputPaths {
  std::string dir = ".";

  std::string dataset() const { return dir + "/dataset.svt"; }
  std::string model() const { return dir + "/model.svt"; }
  std::string dynamics_loss_log() const { return dir + "/dynamics-loss.jsonl"; }
  std::string weights() const { return dir + "/weights.json"; }
  std::string fqi_log() const { return dir + "/fqi-log.jsonl"; }
  std::string unweighted_weights() const { return dir + "/unweighted-weights.json"; }
  std::string gains() const { return dir + "/gains.json"; }
  std::string results_csv() const { return dir + "/results.csv"; }
  std::string results_json() const { return dir + "/results.json"; }
  std::string evaluate_csv(const std::string& method, const std::string& split) const {
    return dir + "/results-" + method + "-" + split + ".csv";
  }
  std::string evaluate_json(const std::string& method, const std::string& split) const {
    return dir + "/results-" + method + "-" + split + ".json";
  }
};

struct EvaluateSpec {
  std::string method;           // fqi | unweighted | ibvs | ibvs-next | pbvs | pbvs-next
  std::string model_file;       // model-based methods
  std::string weights_file;     // model-based methods
  std::optional<double> gain;   // classical methods
  TargetSplit split = TargetSplit::Train;
};

/* Each command is a pure function of (config, input files): identical inputs
 * give byte-identical outputs. They return a process exit code (0 success,
 * 2 embedded acceptance-check failure) and throw on runtime errors. */
int cmd_generate_data(const ExperimentConfig& config, const OutputPaths& out);
int cmd_train_dynamics(const ExperimentConfig& config, const std::string& dataset_file, const OutputPaths& out);
int cmd_train_fqi(const ExperimentConfig& config, const std::string& model_file, const OutputPaths& out);
int cmd_evaluate(const ExperimentConfig& config, const EvaluateSpec& spec, const OutputPaths& out);
int cmd_compare(const ExperimentConfig& config, const OutputPaths& out);

}  // namespace servo
