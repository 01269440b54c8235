#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "servo/dynamics.hpp"
#include "servo/featurize.hpp"

namespace servo {

// control vector, each coordinate in [-1, 1]
using Action = Eigen::VectorXd;

// Current and goal observations with their feature pyramids.
struct ServoState {
  Observation obs;
  Observation goal_obs;
  Pyramid features;
  Pyramid goal_features;
};

ServoState make_servo_state(const Observation& obs, const Observation& goal_obs, const Featurizer& featurizer,
                            const Standardizer& standardizer, int pyramid_levels);

/* Non-negative feature weights (one per level-channel pair, levels outer,
 * channels inner) plus per-control quadratic penalties and a value offset. */
struct PolicyWeights {
  Eigen::VectorXd w;       // size channels * (levels + 1)
  Eigen::VectorXd lambda;  // size control_dim
  double bias = 0.0;
  int levels = 0;
  int channels = 0;

  int w_index(int level, int channel) const { return level * channels + channel; }
  Eigen::VectorXd theta() const;  // [w; lambda]

  static PolicyWeights uniform(int levels, int channels, int control_dim);
  static PolicyWeights from_theta(const Eigen::VectorXd& theta, double bias, int levels, int channels,
                                  int control_dim);
};

// value(u) = u^T A u + g^T u + k
struct QuadraticForm {
  Eigen::MatrixXd A;
  Eigen::VectorXd g;
  double k = 0.0;
};

/* Quadratic expansion of one level-channel error term:
 * |goal - f(y, u)|^2 / cells = u^T P u + q^T u + r, exact because the
 * predictor is affine in u. */
struct FeatureQuad {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  double r = 0.0;
};

// One quad per (level, channel) in PolicyWeights order.
std::vector<FeatureQuad> expand_state(const ServoState& state, const BilinearModel& model);

/* Q feature vector: per level-channel normalized squared goal errors under
 * the one-step prediction at u, followed by squared control coordinates. */
Eigen::VectorXd phi(const ServoState& state, const Action& u, const BilinearModel& model);
Eigen::VectorXd phi_from_quads(const std::vector<FeatureQuad>& quads, const Action& u, int control_dim);

double q_value(const PolicyWeights& weights, const ServoState& state, const Action& u, const BilinearModel& model);

QuadraticForm objective_quadratic(const ServoState& state, const BilinearModel& model, const PolicyWeights& weights);
QuadraticForm assemble_quadratic(const std::vector<FeatureQuad>& quads, const PolicyWeights& weights);

// Unconstrained minimizer of the quadratic objective, then clipped to the box.
Action act(const ServoState& state, const BilinearModel& model, const PolicyWeights& weights);
Action act_from_quads(const std::vector<FeatureQuad>& quads, const PolicyWeights& weights);

// (argmin action, Q at that action)
std::pair<Action, double> min_q(const PolicyWeights& weights, const ServoState& state, const BilinearModel& model);
std::pair<Action, double> min_q_from_quads(const std::vector<FeatureQuad>& quads, const PolicyWeights& weights);

Action clip_action(Action u);

}  // namespace servo
