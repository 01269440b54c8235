#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "servo/featurize.hpp"
#include "servo/rng.hpp"

namespace servo {

using Action = Eigen::VectorXd;

enum class ResetMode { Evaluation, DataCollection };
enum class TargetSplit { Train, Novel };

enum class Termination {
  None,      // episode continues
  TooClose,  // target closer than the safety distance
  OutOfView, // target left the field of view
  Horizon,   // step budget exhausted
};

struct StepOutcome {
  double cost = 0.0;
  Termination reason = Termination::None;

  bool episode_over() const { return reason != Termination::None; }
  // absorbing failures capitalize the remaining horizon into their cost
  bool absorbing() const { return reason == Termination::TooClose || reason == Termination::OutOfView; }
};

/* Canonical scenario-seed streams. Every method in a run shares the same
 * validation and evaluation episodes, so comparisons are paired. */
inline std::uint64_t validation_seed(std::uint64_t master, int index) {
  return sub_seed(master, "validation", static_cast<std::uint64_t>(index));
}
inline std::uint64_t evaluation_seed(std::uint64_t master, int index) {
  return sub_seed(master, "evaluation", static_cast<std::uint64_t>(index));
}

// Minimal episodic interface consumed by policy optimization.
class Env {
 public:
  virtual ~Env() = default;
  virtual int action_dim() const = 0;
  virtual int horizon() const = 0;
  virtual void reset(std::uint64_t scenario_seed, ResetMode mode) = 0;
  virtual StepOutcome step(const Action& u) = 0;
  virtual const Observation& observation() const = 0;
  virtual const Observation& goal_observation() const = 0;
  virtual bool done() const = 0;
  virtual int time() const = 0;
};

}  // namespace servo
