#include "servo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include <Eigen/SVD>

#include "servo/rng.hpp"

namespace servo {

Eigen::Matrix<double, 8, 4> interaction_matrix(const FeaturePointSet& points) {
  Eigen::Matrix<double, 8, 4> L;
  for (int i = 0; i < 4; ++i) {
    const double Z = points.depths[i];
    if (!(Z > 0.0)) throw std::invalid_argument("interaction_matrix: non-positive depth");
    const double x = points.points(i, 0);
    const double y = points.points(i, 1);
    L.row(2 * i) << -1.0 / Z, 0.0, x / Z, y;
    L.row(2 * i + 1) << 0.0, -1.0 / Z, y / Z, -x;
  }
  return L;
}

TwistCommand ibvs_twist(const FeaturePointSet& current, const FeaturePointSet& goal, double gain, double dt,
                        const std::optional<Eigen::Matrix<double, 8, 1>>& image_velocity_bias) {
  if (!(gain > 0.0) || !(dt > 0.0)) throw std::invalid_argument("ibvs_twist: gain and dt must be positive");
  TwistCommand cmd;
  if (!current.valid || !goal.valid) {
    cmd.degenerate = true;
    return cmd;
  }
  Eigen::Matrix<double, 8, 1> error;
  for (int i = 0; i < 4; ++i) {
    error[2 * i] = current.points(i, 0) - goal.points(i, 0);
    error[2 * i + 1] = current.points(i, 1) - goal.points(i, 1);
  }
  if (image_velocity_bias) error -= dt * (*image_velocity_bias);
  const Eigen::Matrix<double, 8, 4> L = interaction_matrix(current);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(L, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  if (svd.rank() < 4) {
    cmd.degenerate = true;
    return cmd;
  }
  const Eigen::Vector4d twist = -(gain / dt) * svd.solve(error);
  cmd.v_cam = twist.head<3>();
  cmd.yaw_rate = twist[3];
  return cmd;
}

TwistCommand pbvs_twist(const Eigen::Vector3d& p, const Eigen::Vector3d& p_star, double relative_yaw_error,
                        double gain, double dt, bool ignore_rotation) {
  if (!(gain > 0.0) || !(dt > 0.0)) throw std::invalid_argument("pbvs_twist: gain and dt must be positive");
  TwistCommand cmd;
  cmd.v_cam = (gain / dt) * (p - p_star);
  cmd.yaw_rate = ignore_rotation ? 0.0 : (gain / dt) * wrap_angle(relative_yaw_error);
  return cmd;
}

Action twist_command_to_action(const TwistCommand& cmd, const CameraPose& pose, const SimParams& params) {
  if (cmd.degenerate) return Action::Zero(4);
  const Eigen::Vector3d v_world = camera_rotation(pose, params.camera_pitch) * cmd.v_cam;
  return twist_to_action(v_world, cmd.yaw_rate, pose.yaw, params);
}

Controller make_ibvs_controller(double gain, bool use_target_motion) {
  return [gain, use_target_motion](DeskEnv& env) -> Action {
    const FeaturePointSet current = env.current_bbox();
    const FeaturePointSet& goal = env.goal_info().features;
    std::optional<Eigen::Matrix<double, 8, 1>> bias;
    if (use_target_motion && current.valid) {
      const FeaturePointSet next = env.next_bbox_static_camera();
      if (next.valid) {
        Eigen::Matrix<double, 8, 1> b;
        for (int i = 0; i < 4; ++i) {
          b[2 * i] = (next.points(i, 0) - current.points(i, 0)) / env.params().dt;
          b[2 * i + 1] = (next.points(i, 1) - current.points(i, 1)) / env.params().dt;
        }
        bias = b;
      }
    }
    const TwistCommand cmd = ibvs_twist(current, goal, gain, env.params().dt, bias);
    return twist_command_to_action(cmd, env.world().camera, env.params());
  };
}

Controller make_pbvs_controller(double gain, bool use_next_pose, bool ignore_rotation) {
  return [gain, use_next_pose, ignore_rotation](DeskEnv& env) -> Action {
    Eigen::Vector3d p;
    if (use_next_pose) {
      WorldState w = env.world();
      w.target = env.peek_target_next();
      p = world_to_camera(w.camera, env.params().camera_pitch, target_center(env.scene(), w.target));
    } else {
      p = env.target_in_camera();
    }
    const double yaw_err = wrap_angle(env.heading_error() - env.goal_info().relative_yaw);
    const TwistCommand cmd = pbvs_twist(p, env.goal_info().p_star, yaw_err, gain, env.params().dt, ignore_rotation);
    return twist_command_to_action(cmd, env.world().camera, env.params());
  };
}

CemResult cem_optimize(const std::function<double(const Eigen::VectorXd&)>& objective, int dim,
                       const CemConfig& config, const Eigen::VectorXd& init_mean) {
  if (dim < 1) throw std::invalid_argument("cem_optimize: dimension must be at least 1");
  if (config.iterations < 1) throw std::invalid_argument("cem_optimize: need at least one iteration");
  const int population = 3 * dim;
  const int elites = std::max(1, static_cast<int>(std::floor(config.elite_fraction * population + 0.5)));

  Eigen::VectorXd mean = init_mean.size() == dim ? init_mean : Eigen::VectorXd::Ones(dim);
  Eigen::VectorXd stddev = Eigen::VectorXd::Constant(dim, config.init_std);
  Rng rng(config.seed);

  CemResult result;
  std::vector<Eigen::VectorXd> members(static_cast<size_t>(population));
  std::vector<double> costs(static_cast<size_t>(population));
  std::vector<int> order(static_cast<size_t>(population));
  for (int it = 0; it < config.iterations; ++it) {
    for (int m = 0; m < population; ++m) {
      Eigen::VectorXd params(dim);
      for (int k = 0; k < dim; ++k) params[k] = mean[k] + stddev[k] * rng.normal();
      members[static_cast<size_t>(m)] = params;
      costs[static_cast<size_t>(m)] = objective(params.cwiseMax(0.0));
    }
    result.population_costs.push_back(costs);
    result.populations.push_back(members);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return costs[static_cast<size_t>(a)] < costs[static_cast<size_t>(b)]; });
    Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(dim);
    for (int e = 0; e < elites; ++e) new_mean += members[static_cast<size_t>(order[static_cast<size_t>(e)])];
    new_mean /= static_cast<double>(elites);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
    for (int e = 0; e < elites; ++e) {
      const Eigen::VectorXd d = members[static_cast<size_t>(order[static_cast<size_t>(e)])] - new_mean;
      var += d.cwiseProduct(d);
    }
    var /= static_cast<double>(elites);
    mean = new_mean;
    stddev = var.cwiseSqrt().cwiseMax(1e-6);
    result.mean_history.push_back(mean);
  }
  result.mean = mean;
  return result;
}

double mean_rollout_cost(DeskEnv& env, const Controller& controller, const std::vector<std::uint64_t>& seeds,
                         ResetMode mode) {
  if (seeds.empty()) throw std::invalid_argument("mean_rollout_cost: no seeds");
  double total = 0.0;
  for (const std::uint64_t s : seeds) total += rollout(env, controller, s, mode).total_cost;
  return total / static_cast<double>(seeds.size());
}

Controller make_policy_controller(const BilinearModel& model, const Featurizer& featurizer,
                                  const Standardizer& standardizer, const PolicyWeights& weights) {
  struct GoalCache {
    Pyramid pyramid;
    bool ready = false;
  };
  auto cache = std::make_shared<GoalCache>();
  const BilinearModel* model_ptr = &model;
  const Featurizer* feat_ptr = &featurizer;
  return [cache, model_ptr, feat_ptr, standardizer, weights](DeskEnv& env) -> Action {
    if (env.time() == 0 || !cache->ready) {
      cache->pyramid = build_pyramid(featurize(env.goal_observation(), *feat_ptr, standardizer), model_ptr->levels);
      cache->ready = true;
    }
    ServoState state;
    state.features = build_pyramid(featurize(env.observation(), *feat_ptr, standardizer), model_ptr->levels);
    state.goal_features = cache->pyramid;
    return act_from_quads(expand_state(state, *model_ptr), weights);
  };
}

PolicyWeights tune_unweighted_policy(DeskEnv& env, const BilinearModel& model, const Featurizer& featurizer,
                                     const Standardizer& standardizer, int cem_iterations,
                                     std::uint64_t master_seed) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(10);
  for (int i = 0; i < 10; ++i) seeds.push_back(validation_seed(master_seed, i));
  PolicyWeights weights = PolicyWeights::uniform(model.levels, model.channels, model.control_dim);
  auto objective = [&](const Eigen::VectorXd& lambda) {
    PolicyWeights candidate = weights;
    candidate.lambda = lambda;
    return mean_rollout_cost(env, make_policy_controller(model, featurizer, standardizer, candidate), seeds);
  };
  CemConfig config;
  config.iterations = cem_iterations;
  config.seed = sub_seed(master_seed, "cem");
  const CemResult result = cem_optimize(objective, model.control_dim, config);
  weights.lambda = result.mean.cwiseMax(0.0);
  return weights;
}

GainChoice gain_sweep(const std::function<double(double)>& mean_cost) {
  GainChoice best;
  bool first = true;
  for (int i = 1; i <= 40; ++i) {
    const double gain = 0.05 * i;
    const double cost = mean_cost(gain);
    if (first || cost < best.mean_cost) {
      best.gain = gain;
      best.mean_cost = cost;
      first = false;
    }
  }
  return best;
}

}  // namespace servo
