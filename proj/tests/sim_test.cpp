#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "servo/rng.hpp"
#include "servo/sim.hpp"

using namespace servo;

namespace {

SimParams tiny_params() {
  SimParams p;
  p.resolution = 16;
  p.supersample = 1;
  return p;
}

}  // namespace

TEST_CASE("zero action commands a zero twist") {
  const SimParams p;
  Action u = Eigen::VectorXd::Zero(4);
  const Twist t = action_to_twist(u, 0.7, p);
  CHECK(t.linear.norm() == 0.0);
  CHECK(t.yaw_rate == 0.0);
}

TEST_CASE("a saturated forward action moves one meter per step") {
  const SimParams p;
  Action u = Eigen::VectorXd::Zero(4);
  u[0] = 1.0;
  const Twist t = action_to_twist(u, 0.0, p);
  CHECK(t.linear.x() == doctest::Approx(10.0));
  CHECK(t.linear.y() == doctest::Approx(0.0));
  CHECK(t.linear.z() == doctest::Approx(0.0));
  const CameraPose next = apply_twist(CameraPose{}, t, p.dt);
  CHECK(next.position.x() == doctest::Approx(1.0));

  // the forward axis follows the heading
  const Twist ty = action_to_twist(u, M_PI / 2.0, p);
  CHECK(ty.linear.y() == doctest::Approx(10.0));
  CHECK(std::abs(ty.linear.x()) < 1e-12);
}

TEST_CASE("a saturated yaw action turns pi over twenty per step") {
  const SimParams p;
  Action u = Eigen::VectorXd::Zero(4);
  u[3] = 1.0;
  const Twist t = action_to_twist(u, 0.3, p);
  CHECK(t.yaw_rate == doctest::Approx(M_PI / 2.0));
  const CameraPose next = apply_twist(CameraPose{}, t, p.dt);
  CHECK(next.yaw == doctest::Approx(M_PI / 20.0));
}

TEST_CASE("twist and action conversions invert each other") {
  const SimParams p;
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Action u(4);
    for (int j = 0; j < 4; ++j) u[j] = rng.uniform(-1.0, 1.0);
    const double yaw = rng.uniform(-M_PI, M_PI);
    const Twist t = action_to_twist(u, yaw, p);
    const Action back = twist_to_action(t.linear, t.yaw_rate, yaw, p);
    CHECK((back - u).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("camera transform round trips and behaves under half-turns") {
  CameraPose pose;
  pose.position = {3.0, -2.0, 15.0};
  pose.yaw = 0.6;
  const double pitch = -M_PI / 6.0;
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d p(rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(0, 10));
    const Eigen::Vector3d cam = world_to_camera(pose, pitch, p);
    CHECK((camera_to_world(pose, pitch, cam) - p).cwiseAbs().maxCoeff() < 1e-12);
  }

  // with no pitch, turning the camera half a turn negates the in-plane axes
  CameraPose flipped = pose;
  flipped.yaw = wrap_angle(pose.yaw + M_PI);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d p(rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(0, 10));
    const Eigen::Vector3d a = world_to_camera(pose, 0.0, p);
    const Eigen::Vector3d b = world_to_camera(flipped, 0.0, p);
    CHECK(b.x() == doctest::Approx(-a.x()).epsilon(1e-9));
    CHECK(b.y() == doctest::Approx(a.y()).epsilon(1e-9));
    CHECK(b.z() == doctest::Approx(-a.z()).epsilon(1e-9));
  }
}

TEST_CASE("the view frustum boundary is closed") {
  const double vfov = M_PI / 3.0;
  const double s = std::tan(0.5 * vfov);
  CHECK(point_in_fov({0.0, 0.0, 5.0}, vfov));
  CHECK_FALSE(point_in_fov({0.0, 0.0, -1.0}, vfov));
  CHECK_FALSE(point_in_fov({1.0, 1.0, 0.0}, vfov));
  CHECK(point_in_fov({0.0, 5.0 * s, 5.0}, vfov));
  CHECK(point_in_fov({5.0 * s, 0.0, 5.0}, vfov));
  CHECK_FALSE(point_in_fov({0.0, 5.0 * s * (1.0 + 1e-9), 5.0}, vfov));
}

TEST_CASE("alignment cost is zero exactly at the goal ray") {
  CHECK(static_cost({0.0, 0.0, 28.3}, 28.3) == 0.0);
  CHECK(static_cost({1.0, 0.0, 10.0}, 10.0) == doctest::Approx(0.1));
  CHECK(static_cost({0.0, 0.0, 20.0}, 10.0) > 0.0);
  CHECK(static_cost({0.3, -0.2, 28.3}, 28.3) > 0.0);
}

TEST_CASE("failures charge the previous cost once per remaining step") {
  const double vfov = M_PI / 3.0;
  const CostOutcome close = step_cost({0.0, 0.0, 1.0}, 10.0, 4.0, 50, 100, 0.2, vfov);
  CHECK(close.reason == Termination::TooClose);
  CHECK(close.cost == doctest::Approx(10.2));

  const CostOutcome behind = step_cost({0.0, 0.0, -5.0}, 10.0, 4.0, 3, 100, 0.4, vfov);
  CHECK(behind.reason == Termination::OutOfView);
  CHECK(behind.cost == doctest::Approx(98.0 * 0.4));

  const CostOutcome ok = step_cost({0.5, 0.0, 10.0}, 10.0, 4.0, 99, 100, 0.4, vfov);
  CHECK(ok.reason == Termination::None);
  CHECK(ok.cost == doctest::Approx(0.05));

  const CostOutcome last = step_cost({0.5, 0.0, 10.0}, 10.0, 4.0, 100, 100, 0.4, vfov);
  CHECK(last.reason == Termination::Horizon);
  CHECK(last.cost == doctest::Approx(0.05));
}

TEST_CASE("rendering an empty stretch of ground is uniform") {
  Scene scene;
  scene.ground_color = {0.30, 0.55, 0.30};
  scene.road_color = {0.45, 0.45, 0.48};
  scene.sky_color = {0.60, 0.75, 0.92};
  scene.path.pts = {{0.0, 0.0}, {1.0, 0.0}};
  scene.path.rebuild();
  scene.mover.a = scene.mover.b = {5.0, 0.0};

  WorldState world;
  world.camera.position = {1000.0, 1000.0, 15.0};
  world.camera.yaw = 0.0;

  SimParams p;
  p.resolution = 32;
  p.supersample = 2;
  const Observation obs = render(scene, world, p);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      CHECK(obs.at(0, y, x) == doctest::Approx(0.30).epsilon(1e-12));
      CHECK(obs.at(1, y, x) == doctest::Approx(0.55).epsilon(1e-12));
      CHECK(obs.at(2, y, x) == doctest::Approx(0.30).epsilon(1e-12));
    }
}

TEST_CASE("the road and the sky render where geometry puts them") {
  Scene scene;
  scene.ground_color = {0.30, 0.55, 0.30};
  scene.road_color = {0.45, 0.45, 0.48};
  scene.sky_color = {0.60, 0.75, 0.92};
  scene.path.pts = {{0.0, 0.0}, {200.0, 0.0}};
  scene.path.rebuild();
  scene.mover.a = scene.mover.b = {-500.0, -500.0};
  WorldState world;
  world.camera.position = {50.0, 0.0, 15.0};
  world.camera.yaw = 0.0;
  world.target.position = {-500.0, -480.0};

  SimParams p;
  p.resolution = 32;
  p.supersample = 1;
  const Observation road_view = render(scene, world, p);
  // the center pixel looks down the road axis
  CHECK(road_view.at(0, 16, 16) == doctest::Approx(0.45).epsilon(1e-12));
  CHECK(road_view.at(2, 16, 16) == doctest::Approx(0.48).epsilon(1e-12));

  p.camera_pitch = 0.0;
  scene.path.pts = {{1000.0, 1000.0}, {1001.0, 1000.0}};
  scene.path.rebuild();
  const Observation level_view = render(scene, world, p);
  CHECK(level_view.at(2, 0, 8) == doctest::Approx(0.92).epsilon(1e-12));   // above the horizon
  CHECK(level_view.at(2, 31, 8) == doctest::Approx(0.30).epsilon(1e-12));  // below it
}

TEST_CASE("rendering is deterministic") {
  DeskEnv env(tiny_params());
  env.reset(99, ResetMode::DataCollection);
  const Observation a = render(env.scene(), env.world(), env.params());
  const Observation b = render(env.scene(), env.world(), env.params());
  CHECK(a.data == b.data);
}

TEST_CASE("evaluation resets start on the goal ray") {
  DeskEnv env(tiny_params());
  env.reset(5, ResetMode::Evaluation);

  CHECK(env.world().camera.position.z() == 15.0);
  const Eigen::Vector3d p = env.target_in_camera();
  CHECK(std::abs(p.x() / p.z()) < 1e-12);
  CHECK(std::abs(p.y() / p.z()) < 1e-12);
  CHECK(env.goal_info().pz_star == doctest::Approx(2.0 * (15.0 - 0.85)).epsilon(1e-9));
  CHECK(env.goal_info().p_star.x() == 0.0);
  CHECK(env.goal_info().p_star.z() == env.goal_info().pz_star);
  CHECK(std::abs(env.goal_info().relative_yaw) < 1e-9);
  CHECK(env.previous_cost() <= 1e-12);
  CHECK(env.observation().data == env.goal_observation().data);

  const FeaturePointSet box = env.current_bbox();
  REQUIRE(box.valid);
  CHECK(box.points(0, 0) < box.points(1, 0));
  CHECK(box.points(0, 1) < box.points(3, 1));
  CHECK(box.points(1, 0) == box.points(2, 0));
  CHECK(std::abs(box.points(0, 0) + box.points(1, 0)) < 0.05);  // roughly centered
  CHECK(box.depths.minCoeff() == box.depths.maxCoeff());
  CHECK(box.depths[0] == doctest::Approx(env.goal_info().pz_star));
}

TEST_CASE("resets are deterministic in the scenario seed") {
  DeskEnv a(tiny_params()), b(tiny_params());
  a.reset(123, ResetMode::DataCollection);
  b.reset(123, ResetMode::DataCollection);
  CHECK((a.world().camera.position - b.world().camera.position).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.world().camera.yaw == b.world().camera.yaw);
  CHECK(a.observation().data == b.observation().data);

  b.reset(124, ResetMode::DataCollection);
  CHECK((a.world().camera.position - b.world().camera.position).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("data-collection resets sample the documented viewpoint ranges") {
  DeskEnv env(tiny_params());
  double h_lo = 1e30, h_hi = -1e30, az_lo = 1e30, az_hi = -1e30;
  for (int i = 0; i < 200; ++i) {
    env.reset(sub_seed(77, "reset-probe", static_cast<std::uint64_t>(i)), ResetMode::DataCollection);
    const double h = env.world().camera.position.z();
    CHECK(h >= 12.0);
    CHECK(h <= 18.0);
    const double az = -env.goal_info().relative_yaw;  // camera azimuth about the target
    CHECK(az >= -M_PI / 2.0 - 1e-9);
    CHECK(az <= M_PI / 2.0 + 1e-9);
    h_lo = std::min(h_lo, h);
    h_hi = std::max(h_hi, h);
    az_lo = std::min(az_lo, az);
    az_hi = std::max(az_hi, az);
  }
  CHECK(h_hi - h_lo > 3.0);
  CHECK(az_hi - az_lo > M_PI / 2.0);
}

TEST_CASE("kinematic steps are reversible when the heading is unchanged") {
  SimParams p = tiny_params();
  p.target_speed = 0.0;
  DeskEnv env(p);
  env.reset(9, ResetMode::Evaluation);
  const CameraPose start = env.world().camera;

  Action u = Eigen::VectorXd::Zero(4);
  u << 0.3, -0.2, 0.4, 0.0;
  env.advance(u);
  env.advance(-u);
  CHECK((env.world().camera.position - start.position).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(env.world().camera.yaw == doctest::Approx(start.yaw));

  Action r = Eigen::VectorXd::Zero(4);
  r[3] = 0.5;
  env.reset(9, ResetMode::Evaluation);
  env.advance(r);
  env.advance(-r);
  CHECK(env.world().camera.yaw == doctest::Approx(start.yaw).epsilon(1e-12));
  CHECK((env.world().camera.position - start.position).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("out-of-range actions are clipped before integration") {
  SimParams p = tiny_params();
  p.target_speed = 0.0;
  DeskEnv env(p);
  env.reset(13, ResetMode::Evaluation);
  const Eigen::Vector3d before = env.world().camera.position;
  Action u = Eigen::VectorXd::Zero(4);
  u[2] = 5.0;  // clipped to 1, so the climb is max_speed * dt
  env.advance(u);
  CHECK(env.world().camera.position.z() - before.z() == doctest::Approx(1.0));
}

TEST_CASE("the target tracks its path at the configured speed") {
  DeskEnv env(tiny_params());
  env.reset(21, ResetMode::Evaluation);
  const double s0 = env.world().target.path_s;
  const TargetState peek = env.peek_target_next();
  env.advance(Eigen::VectorXd::Zero(4));
  CHECK(env.world().target.path_s == doctest::Approx(s0 + 0.1).epsilon(1e-12));
  CHECK((env.world().target.position - peek.position).cwiseAbs().maxCoeff() == 0.0);
  CHECK(env.world().target.heading == peek.heading);

  SimParams still = tiny_params();
  still.target_speed = 0.0;
  DeskEnv fixed(still);
  fixed.reset(21, ResetMode::Evaluation);
  const FeaturePointSet now = fixed.current_bbox();
  const FeaturePointSet next = fixed.next_bbox_static_camera();
  CHECK((now.points - next.points).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a stationary pair runs out the clock at zero cost") {
  SimParams p = tiny_params();
  p.target_speed = 0.0;
  p.horizon = 12;
  DeskEnv env(p);
  const RolloutResult res = rollout(env, [](DeskEnv&) { return Eigen::VectorXd::Zero(4); }, 31);
  CHECK(res.steps == 12);
  CHECK(res.end == Termination::Horizon);
  CHECK(res.costs.size() == 12);
  CHECK(res.total_cost <= 1e-10);
  for (double c : res.costs) CHECK(c >= 0.0);
}

TEST_CASE("turning away ends the episode with the capitalized cost") {
  SimParams p = tiny_params();
  p.target_speed = 0.0;
  DeskEnv env(p);
  Action spin = Eigen::VectorXd::Zero(4);
  spin[3] = 1.0;
  const RolloutResult res = rollout(env, [&](DeskEnv&) { return spin; }, 41);
  CHECK(res.end == Termination::OutOfView);
  REQUIRE(res.steps >= 2);
  REQUIRE(res.steps < p.horizon);
  const double prev = res.costs[static_cast<size_t>(res.steps - 2)];
  CHECK(res.costs.back() == doctest::Approx((p.horizon - res.steps + 1) * prev).epsilon(1e-12));
  double total = 0.0;
  for (double c : res.costs) total += c;
  CHECK(res.total_cost == doctest::Approx(total));
}

TEST_CASE("diving at the target trips the proximity failure") {
  SimParams p = tiny_params();
  p.target_speed = 0.0;
  DeskEnv env(p);
  env.reset(43, ResetMode::Evaluation);
  Action dive(4);
  dive << 1.0, 0.0, -std::tan(M_PI / 6.0), 0.0;  // straight down the line of sight
  int t = 0;
  StepOutcome out;
  double prev = env.previous_cost();
  while (!env.done()) {
    prev = env.previous_cost();
    out = env.step(dive);
    ++t;
  }
  CHECK(out.reason == Termination::TooClose);
  CHECK(out.cost == doctest::Approx((p.horizon - t + 1) * prev).epsilon(1e-12));
  CHECK_THROWS_AS(env.step(dive), std::logic_error);
}

TEST_CASE("episode rollouts are deterministic") {
  SimParams p = tiny_params();
  DeskEnv env(p);
  auto wiggle = [](DeskEnv& e) {
    Action u = Eigen::VectorXd::Zero(4);
    u[0] = 0.2 * std::sin(0.3 * e.time());
    u[3] = 0.1 * std::cos(0.2 * e.time());
    return u;
  };
  const RolloutResult a = rollout(env, wiggle, 55);
  const RolloutResult b = rollout(env, wiggle, 55);
  CHECK(a.total_cost == b.total_cost);
  CHECK(a.costs == b.costs);
  CHECK(a.steps == b.steps);
}

TEST_CASE("scripted collection fills every triplet and fits the normalizer") {
  SimParams p = tiny_params();
  auto chroma = make_featurizer("chroma");
  const TrajectoryDataset ds = generate_dataset(p, 2, 3, 1234, *chroma);
  CHECK(ds.n_traj == 2);
  CHECK(ds.horizon == 3);
  CHECK(ds.triplet_count() == 6);
  CHECK(ds.channels == 3);
  CHECK(ds.height == 16);
  CHECK(ds.width == 16);
  CHECK(ds.control_dim == 4);
  CHECK(ds.featurizer_id == "chroma");
  CHECK(ds.seed == 1234);
  CHECK(ds.standardizer.channels() == 5);
  for (double sd : ds.standardizer.stddev) CHECK(sd >= Standardizer::kMinStd);

  const TrajectoryDataset again = generate_dataset(p, 2, 3, 1234, *chroma);
  CHECK(ds.frames == again.frames);
  CHECK(ds.actions == again.actions);

  const TrajectoryDataset other = generate_dataset(p, 2, 3, 1235, *chroma);
  CHECK(ds.actions != other.actions);

  CHECK_THROWS_AS(generate_dataset(p, 0, 3, 1, *chroma), std::invalid_argument);
}

TEST_CASE("the collection controller settles onto its sampled viewpoint") {
  SimParams p = tiny_params();
  p.target_speed = 0.0;
  auto chroma = make_featurizer("chroma");
  const TrajectoryDataset ds = generate_dataset(p, 1, 100, 2024, *chroma, 0.0);
  const Eigen::VectorXd last = ds.action(0, 99);
  CHECK(last.cwiseAbs().maxCoeff() < 0.02);
}
