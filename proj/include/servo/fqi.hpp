#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "servo/env.hpp"
#include "servo/policy.hpp"

namespace servo {

struct FqiConfig {
  int sampling_iterations = 2;
  int fqi_iterations = 10;
  int trajectories_per_iteration = 10;
  double gamma = 0.9;
  double exploration_sigma = 0.2;
  double nu = 0.1;
  int validation_trajectories = 10;
};

/* One recorded transition, reduced to what the Bellman fits consume: the
 * Q-feature vector of the taken action and the quadratic expansion of the
 * next state (empty for absorbing failures, whose cost already capitalizes
 * the remaining horizon). */
struct BellmanSample {
  Eigen::VectorXd phi_t;
  std::vector<FeatureQuad> next_quads;
  double cost = 0.0;
  bool terminal = false;
};

struct BellmanBatch {
  std::vector<BellmanSample> samples;
  int control_dim = 0;

  int size() const { return static_cast<int>(samples.size()); }
};

/* Mean squared one-step inconsistency of Q under (weights, bias), with the
 * greedy next action recomputed for the given weights. */
double bellman_error(const BellmanBatch& batch, const PolicyWeights& weights, double gamma);

/* Joint rescale of the previous parameters and bias against the one-step
 * targets, greedy next actions frozen under theta_prev (they are invariant
 * to positive rescaling). Closed-form two-variable least squares; alpha is
 * clamped at zero with the bias refit if the unconstrained solve goes
 * negative. */
struct AlphaBiasFit {
  double alpha = 1.0;
  double bias = 0.0;
  double objective = 0.0;            // regularized objective at the fit
  double reference_objective = 0.0;  // at alpha = 1, bias = previous bias
  bool alpha_clamped = false;
  bool alpha_undetermined = false;   // all regressors zero with nu = 0
};
AlphaBiasFit fit_alpha_bias(const BellmanBatch& batch, const PolicyWeights& theta_prev, double gamma, double nu);

/* Non-negative ridge regression of (theta, bias) onto bootstrapped targets
 * formed under the half-step parameters. Accelerated projected gradient with
 * an active-set polish; first-order optimality enforced to kkt_tolerance. */
struct ThetaBiasFit {
  PolicyWeights weights;             // fitted theta >= 0 and bias
  double objective = 0.0;
  double reference_objective = 0.0;  // at (theta_half, bias_half)
  double kkt_residual = 0.0;
  int iterations = 0;
};
ThetaBiasFit fit_theta_bias(const BellmanBatch& batch, const PolicyWeights& theta_half, double gamma, double nu);

constexpr double kKktTolerance = 1e-8;
constexpr int kNnlsIterationCap = 10000;

struct FqiIterationRecord {
  int sampling_iteration = 0;
  int fqi_iteration = 0;
  double alpha = 1.0;
  double bias = 0.0;
  double bellman = 0.0;             // after the full iteration
  double scale_objective = 0.0;     // two-variable fit, at the optimum
  double scale_reference = 0.0;     // two-variable fit, at the feasible point
  double fit_objective = 0.0;       // non-negative fit, at the optimum
  double fit_reference = 0.0;       // non-negative fit, at the feasible point
  double kkt_residual = 0.0;
  double theta_min = 0.0;
};

struct FqiResult {
  PolicyWeights best;                        // best validation performer
  std::vector<PolicyWeights> per_sampling;   // iterate after each sampling round
  std::vector<double> validation_costs;      // one entry per sampling round
  std::vector<FqiIterationRecord> records;   // S x K entries
  int total_training_trajectories = 0;
};

/* Batch policy search: alternate gathering noisy on-policy transitions and
 * refitting the Q-function, keeping whichever iterate scores best on the
 * fixed validation episodes. */
FqiResult fqi_run(Env& env, const BilinearModel& model, const Featurizer& featurizer,
                  const Standardizer& standardizer, const PolicyWeights& theta0, const FqiConfig& config,
                  std::uint64_t master_seed);

// Greedy rollout of the weighted policy; shared by validation and testing.
double greedy_rollout_cost(Env& env, const BilinearModel& model, const Featurizer& featurizer,
                           const Standardizer& standardizer, const PolicyWeights& weights, std::uint64_t seed,
                           ResetMode mode = ResetMode::Evaluation);

}  // namespace servo
