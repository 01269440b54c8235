#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "servo/dataset.hpp"
#include "servo/env.hpp"
#include "servo/featurize.hpp"

namespace servo {

struct SimParams {
  int resolution = 32;
  int horizon = 100;
  double dt = 0.1;
  double tau = 4.0;                    // minimum safe distance to the target, m
  double max_speed = 10.0;             // per translational coordinate, m/s
  double max_yaw_rate = M_PI / 2.0;    // rad/s
  double vertical_fov = M_PI / 3.0;
  double camera_pitch = -M_PI / 6.0;   // fixed downward tilt; roll is zero
  int supersample = 4;                 // subsamples per pixel edge
  double target_speed = 1.0;           // m/s along its path
  TargetSplit split = TargetSplit::Train;
};

// position plus heading about the world vertical; pitch and roll are fixed
struct CameraPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;
};

struct Twist {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();  // world frame, m/s
  double yaw_rate = 0.0;
};

double wrap_angle(double a);  // into (-pi, pi]

// camera frame: x right, y down, z along the optical axis
Eigen::Matrix3d camera_rotation(const CameraPose& pose, double pitch);
Eigen::Vector3d world_to_camera(const CameraPose& pose, double pitch, const Eigen::Vector3d& p_world);
Eigen::Vector3d camera_to_world(const CameraPose& pose, double pitch, const Eigen::Vector3d& p_cam);

// closed-boundary containment of a camera-frame point in the view frustum
bool point_in_fov(const Eigen::Vector3d& p_cam, double vertical_fov);

// body-frame action (forward, left, up, yaw rate) scaled by actuator limits
Twist action_to_twist(const Action& u, double yaw, const SimParams& params);
CameraPose apply_twist(const CameraPose& pose, const Twist& twist, double dt);
// inverse mapping: divide by actuator limits, then clip to the unit box
Action twist_to_action(const Eigen::Vector3d& v_world, double yaw_rate, double yaw, const SimParams& params);

// image-alignment cost of a camera-frame target position
double static_cost(const Eigen::Vector3d& p_cam, double pz_star);

struct CostOutcome {
  double cost = 0.0;
  Termination reason = Termination::None;
};

/* Transition cost evaluated at the post-step state. Failures (too close or
 * out of view) charge the previous cost once per remaining step and end the
 * episode; t is the 1-based index of the step just taken. */
CostOutcome step_cost(const Eigen::Vector3d& p_next_cam, double pz_star, double tau, int t, int horizon,
                      double prev_cost, double vertical_fov);

struct Polyline {
  std::vector<Eigen::Vector2d> pts;
  std::vector<double> cumulative;  // arc length at each vertex
  double total = 0.0;

  void rebuild();
  Eigen::Vector2d point_at(double s) const;
  Eigen::Vector2d direction_at(double s) const;
  double distance(const Eigen::Vector2d& p) const;
};

struct OrientedBox {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  Eigen::Vector3d half = Eigen::Vector3d::Ones();
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

// distractor shuttling between two points at constant speed
struct MovingDistractor {
  Eigen::Vector2d a = Eigen::Vector2d::Zero(), b = Eigen::Vector2d::Zero();
  double speed = 1.0;
  Eigen::Vector3d half = Eigen::Vector3d::Ones();
  Eigen::Vector3d color = Eigen::Vector3d::Zero();

  Eigen::Vector2d position(double s) const;  // s = traveled distance (ping-pong)
};

struct Scene {
  Polyline path;
  double road_half_width = 1.5;
  Eigen::Vector3d ground_color, road_color, sky_color;
  std::vector<OrientedBox> clutter;  // static distractors
  MovingDistractor mover;
  Eigen::Vector3d target_color = Eigen::Vector3d::Zero();
  Eigen::Vector3d target_half = Eigen::Vector3d(2.4, 1.2, 0.85);
};

struct TargetState {
  double path_s = 0.0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double heading = 0.0;
};

struct WorldState {
  CameraPose camera;
  TargetState target;
  double mover_s = 0.0;
  int t = 0;
};

const std::vector<Eigen::Vector3d>& target_palette(TargetSplit split);

Eigen::Vector3d target_center(const Scene& scene, const TargetState& target);
OrientedBox target_box(const Scene& scene, const TargetState& target);

Observation render(const Scene& scene, const WorldState& world, const SimParams& params);

// ground-truth bounding-box corner features for classical servoing
struct FeaturePointSet {
  Eigen::Matrix<double, 4, 2> points = Eigen::Matrix<double, 4, 2>::Zero();  // normalized image coords
  Eigen::Vector4d depths = Eigen::Vector4d::Zero();
  bool valid = false;
};
FeaturePointSet target_bbox_features(const Scene& scene, const WorldState& world, const SimParams& params);

struct GoalInfo {
  double pz_star = 0.0;
  Eigen::Vector3d p_star = Eigen::Vector3d::Zero();  // (0, 0, pz_star)
  double relative_yaw = 0.0;                         // target heading minus camera yaw at reset
  CameraPose camera;
  FeaturePointSet features;
};

class DeskEnv : public Env {
 public:
  explicit DeskEnv(SimParams params = SimParams{});

  int action_dim() const override { return 4; }
  int horizon() const override { return params_.horizon; }
  void reset(std::uint64_t scenario_seed, ResetMode mode) override;
  StepOutcome step(const Action& u) override;
  const Observation& observation() const override;
  const Observation& goal_observation() const override { return goal_obs_; }
  bool done() const override { return status_ != Termination::None; }
  int time() const override { return world_.t; }

  // kinematics only; skips cost bookkeeping and termination (data collection)
  void advance(const Action& u);

  const SimParams& params() const { return params_; }
  SimParams& mutable_params() { return params_; }
  const Scene& scene() const { return scene_; }
  const WorldState& world() const { return world_; }
  const GoalInfo& goal_info() const { return goal_; }
  double previous_cost() const { return prev_cost_; }
  Termination status() const { return status_; }

  Eigen::Vector3d target_in_camera() const;
  double heading_error() const;  // target heading minus camera yaw, wrapped
  TargetState peek_target_next() const;
  FeaturePointSet current_bbox() const { return target_bbox_features(scene_, world_, params_); }
  // target advanced one step with the camera held fixed
  FeaturePointSet next_bbox_static_camera() const;

 private:
  SimParams params_;
  Scene scene_;
  WorldState world_;
  GoalInfo goal_;
  Observation goal_obs_;
  mutable Observation obs_cache_;
  mutable bool obs_cached_ = false;
  double prev_cost_ = 0.0;
  Termination status_ = Termination::None;
  bool warned_clip_ = false;
  bool initialized_ = false;
};

struct RolloutResult {
  double total_cost = 0.0;
  int steps = 0;
  Termination end = Termination::None;
  std::vector<double> costs;
};

using Controller = std::function<Action(DeskEnv&)>;

RolloutResult rollout(DeskEnv& env, const Controller& controller, std::uint64_t scenario_seed,
                      ResetMode mode = ResetMode::Evaluation);

/* Scripted data collection: a proportional controller flies toward a sampled
 * viewpoint that tracks the moving target, with clipped Gaussian action
 * noise. Termination is disabled so every trajectory has full length. */
TrajectoryDataset generate_dataset(const SimParams& params, int n_traj, int horizon, std::uint64_t seed,
                                   const Featurizer& featurizer, double noise_sigma = 0.2,
                                   double proportional_gain = 1.0);

}  // namespace servo
