#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "servo/policy.hpp"
#include "servo/sim.hpp"

namespace servo {

/* Point-feature Jacobian for the 4 available degrees of freedom
 * (v_x, v_y, v_z, yaw rate), camera frame with z forward. Two rows per
 * point, x-row then y-row, points in FeaturePointSet order. */
Eigen::Matrix<double, 8, 4> interaction_matrix(const FeaturePointSet& points);

struct TwistCommand {
  Eigen::Vector3d v_cam = Eigen::Vector3d::Zero();  // camera-frame linear velocity
  double yaw_rate = 0.0;
  bool degenerate = false;  // controller had no usable feature geometry
};

/* Classical image-based servo law. gain is the fraction of the feature error
 * corrected per step, so the commanded velocity carries a 1/dt factor.
 * image_velocity_bias, when given, subtracts known target feature motion
 * (stacked like the error vector, times dt) before inverting. */
TwistCommand ibvs_twist(const FeaturePointSet& current, const FeaturePointSet& goal, double gain, double dt,
                        const std::optional<Eigen::Matrix<double, 8, 1>>& image_velocity_bias = std::nullopt);

/* Pose-error servo law on the target position in the camera frame plus a
 * relative-yaw term. ignore_rotation zeroes the yaw command entirely. */
TwistCommand pbvs_twist(const Eigen::Vector3d& p, const Eigen::Vector3d& p_star, double relative_yaw_error,
                        double gain, double dt, bool ignore_rotation);

// map a camera-frame command onto normalized actuator coordinates
Action twist_command_to_action(const TwistCommand& cmd, const CameraPose& pose, const SimParams& params);

Controller make_ibvs_controller(double gain, bool use_target_motion);
Controller make_pbvs_controller(double gain, bool use_next_pose, bool ignore_rotation = true);

struct CemConfig {
  int iterations = 10;
  int rollouts_per_eval = 10;  // informational; the objective owns its rollouts
  double elite_fraction = 0.2;
  double init_std = 0.5;
  std::uint64_t seed = 0;
};

struct CemResult {
  Eigen::VectorXd mean;  // final-iteration distribution mean
  std::vector<Eigen::VectorXd> mean_history;
  std::vector<std::vector<double>> population_costs;       // per iteration, member order
  std::vector<std::vector<Eigen::VectorXd>> populations;   // raw samples, same order
};

/* Gaussian cross-entropy search, population 3*dim, refit to the top
 * elite_fraction each iteration. Parameters are projected onto the
 * non-negative orthant only for evaluation. */
CemResult cem_optimize(const std::function<double(const Eigen::VectorXd&)>& objective, int dim,
                       const CemConfig& config, const Eigen::VectorXd& init_mean = Eigen::VectorXd());

/* Baseline weight search: w fixed at one, control penalties tuned by CEM
 * against mean rollout cost on the shared validation seeds. */
PolicyWeights tune_unweighted_policy(DeskEnv& env, const BilinearModel& model, const Featurizer& featurizer,
                                     const Standardizer& standardizer, int cem_iterations,
                                     std::uint64_t master_seed);

struct GainChoice {
  double gain = 0.05;
  double mean_cost = 0.0;
};

/* Evaluates gains 0.05, 0.10, ..., 2.00 and returns the argmin of the
 * supplied validation cost, ties broken toward the smaller gain. */
GainChoice gain_sweep(const std::function<double(double)>& mean_cost);

/* Shared rollout-cost helpers (validation and test evaluation). */
double mean_rollout_cost(DeskEnv& env, const Controller& controller, const std::vector<std::uint64_t>& seeds,
                         ResetMode mode = ResetMode::Evaluation);

Controller make_policy_controller(const BilinearModel& model, const Featurizer& featurizer,
                                  const Standardizer& standardizer, const PolicyWeights& weights);

}  // namespace servo
