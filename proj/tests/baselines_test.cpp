#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "servo/baselines.hpp"
#include "servo/rng.hpp"

using namespace servo;

namespace {

SimParams tiny_params() {
  SimParams p;
  p.resolution = 16;
  p.supersample = 1;
  return p;
}

FeaturePointSet square_features(double half_extent, double depth) {
  FeaturePointSet fps;
  fps.points << -half_extent, -half_extent, half_extent, -half_extent, half_extent, half_extent,
      -half_extent, half_extent;
  fps.depths.setConstant(depth);
  fps.valid = true;
  return fps;
}

Eigen::Matrix<double, 8, 1> stacked_error(const FeaturePointSet& a, const FeaturePointSet& b) {
  Eigen::Matrix<double, 8, 1> e;
  for (int i = 0; i < 4; ++i) {
    e[2 * i] = a.points(i, 0) - b.points(i, 0);
    e[2 * i + 1] = a.points(i, 1) - b.points(i, 1);
  }
  return e;
}

}  // namespace

TEST_CASE("the interaction matrix rows follow the point-feature law") {
  FeaturePointSet fps;
  fps.points.setZero();
  fps.depths.setConstant(10.0);
  fps.valid = true;
  const Eigen::Matrix<double, 8, 4> L = interaction_matrix(fps);
  CHECK(L(0, 0) == doctest::Approx(-0.1));
  CHECK(L(0, 1) == 0.0);
  CHECK(L(0, 2) == 0.0);
  CHECK(L(0, 3) == 0.0);
  CHECK(L(1, 0) == 0.0);
  CHECK(L(1, 1) == doctest::Approx(-0.1));
  CHECK(L(1, 2) == 0.0);
  CHECK(L(1, 3) == 0.0);
}

TEST_CASE("doubling the depth halves only the translational columns") {
  FeaturePointSet near = square_features(0.2, 10.0);
  FeaturePointSet far = square_features(0.2, 20.0);
  const Eigen::Matrix<double, 8, 4> Ln = interaction_matrix(near);
  const Eigen::Matrix<double, 8, 4> Lf = interaction_matrix(far);
  CHECK((Lf.leftCols<3>() - 0.5 * Ln.leftCols<3>()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((Lf.col(3) - Ln.col(3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mirroring a point across the vertical axis flips the matched entries") {
  FeaturePointSet fps;
  fps.points << 0.3, 0.1, 0.3, 0.1, 0.3, 0.1, 0.3, 0.1;
  fps.depths.setConstant(12.0);
  fps.valid = true;
  FeaturePointSet mirrored = fps;
  mirrored.points.col(0) *= -1.0;
  const Eigen::Matrix<double, 8, 4> L = interaction_matrix(fps);
  const Eigen::Matrix<double, 8, 4> M = interaction_matrix(mirrored);
  CHECK(M(0, 2) == doctest::Approx(-L(0, 2)));  // x / Z changes sign in the x row
  CHECK(M(1, 3) == doctest::Approx(-L(1, 3)));  // -x changes sign in the y row
  CHECK(M(0, 0) == L(0, 0));
  CHECK(M(1, 1) == L(1, 1));
  CHECK(M(0, 3) == L(0, 3));
}

TEST_CASE("the interaction matrix rejects non-positive depths") {
  FeaturePointSet fps = square_features(0.2, 10.0);
  fps.depths[2] = 0.0;
  CHECK_THROWS_AS(interaction_matrix(fps), std::invalid_argument);
  fps.depths[2] = -3.0;
  CHECK_THROWS_AS(interaction_matrix(fps), std::invalid_argument);
}

TEST_CASE("the interaction matrix matches finite differences on projected points") {
  const std::vector<Eigen::Vector3d> anchors = {
      {2.0, 1.0, 18.0}, {-3.0, 0.5, 22.0}, {1.5, -2.0, 25.0}, {-1.0, -1.5, 20.0}};
  auto project = [&](const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& xf) {
    FeaturePointSet fps;
    for (int i = 0; i < 4; ++i) {
      const Eigen::Vector3d q = xf(anchors[static_cast<size_t>(i)]);
      fps.points(i, 0) = q.x() / q.z();
      fps.points(i, 1) = q.y() / q.z();
      fps.depths[i] = q.z();
    }
    fps.valid = true;
    return fps;
  };

  const FeaturePointSet base = project([](const Eigen::Vector3d& p) { return p; });
  const Eigen::Matrix<double, 8, 4> L = interaction_matrix(base);
  const double eps = 1e-4;
  for (int j = 0; j < 4; ++j) {
    // camera motion along axis j displaces the points the opposite way;
    // the heading axis spins them about the optical axis
    auto displaced = [&](double e) {
      return project([&](const Eigen::Vector3d& p) -> Eigen::Vector3d {
        if (j < 3) {
          Eigen::Vector3d q = p;
          q[j] -= e;
          return q;
        }
        const double c = std::cos(e), s = std::sin(e);
        return {c * p.x() + s * p.y(), -s * p.x() + c * p.y(), p.z()};
      });
    };
    const FeaturePointSet hi = displaced(eps);
    const FeaturePointSet lo = displaced(-eps);
    for (int i = 0; i < 4; ++i) {
      const double fdx = (hi.points(i, 0) - lo.points(i, 0)) / (2.0 * eps);
      const double fdy = (hi.points(i, 1) - lo.points(i, 1)) / (2.0 * eps);
      CHECK(fdx == doctest::Approx(L(2 * i, j)).epsilon(1e-6));
      CHECK(fdy == doctest::Approx(L(2 * i + 1, j)).epsilon(1e-6));
    }
  }
}

TEST_CASE("image servoing is quiet at the goal") {
  const FeaturePointSet at_goal = square_features(0.2, 20.0);
  const TwistCommand cmd = ibvs_twist(at_goal, at_goal, 0.2, 0.1);
  CHECK_FALSE(cmd.degenerate);
  CHECK(cmd.v_cam.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(cmd.yaw_rate) < 1e-12);
}

TEST_CASE("a pure depth offset commands a pure approach") {
  const FeaturePointSet goal = square_features(0.2, 20.0);
  // same physical corners seen two meters farther back
  const FeaturePointSet current = square_features(0.2 * 20.0 / 22.0, 22.0);
  const TwistCommand cmd = ibvs_twist(current, goal, 0.2, 0.1);
  CHECK_FALSE(cmd.degenerate);
  CHECK(cmd.v_cam.z() == doctest::Approx(4.4).epsilon(1e-9));
  CHECK(std::abs(cmd.v_cam.x()) < 1e-9);
  CHECK(std::abs(cmd.v_cam.y()) < 1e-9);
  CHECK(std::abs(cmd.yaw_rate) < 1e-9);
}

TEST_CASE("repeated feature points are refused rather than inverted") {
  FeaturePointSet degenerate;
  degenerate.points << 0.1, 0.05, 0.1, 0.05, 0.1, 0.05, 0.1, 0.05;
  degenerate.depths.setConstant(10.0);
  degenerate.valid = true;
  const TwistCommand cmd = ibvs_twist(degenerate, square_features(0.2, 10.0), 0.2, 0.1);
  CHECK(cmd.degenerate);

  const SimParams p;
  CameraPose pose;
  CHECK(twist_command_to_action(cmd, pose, p).cwiseAbs().maxCoeff() == 0.0);

  FeaturePointSet invalid;
  CHECK(ibvs_twist(invalid, square_features(0.2, 10.0), 0.2, 0.1).degenerate);
  CHECK_THROWS_AS(ibvs_twist(degenerate, degenerate, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("image servoing contracts the feature error in closed loop") {
  SimParams p = tiny_params();
  p.target_speed = 0.0;
  DeskEnv env(p);
  const Controller controller = make_ibvs_controller(0.2, false);
  for (std::uint64_t seed : {101ull, 102ull, 103ull}) {
    env.reset(seed, ResetMode::Evaluation);
    Rng rng(seed ^ 0x5eed);
    Action kick(4);
    for (int j = 0; j < 4; ++j) kick[j] = rng.uniform(-0.5, 0.5);
    env.advance(kick);
    REQUIRE(env.current_bbox().valid);
    const double e0 = stacked_error(env.current_bbox(), env.goal_info().features).norm();
    REQUIRE(e0 > 1e-4);
    for (int t = 0; t < 20; ++t) {
      REQUIRE_FALSE(env.done());
      env.step(controller(env));
    }
    const double e1 = stacked_error(env.current_bbox(), env.goal_info().features).norm();
    CHECK(e1 < 0.1 * e0);
  }
}

TEST_CASE("pose servoing is proportional to the pose error") {
  const Eigen::Vector3d p_star(0.0, 0.0, 28.3);
  const TwistCommand still = pbvs_twist(p_star, p_star, 0.0, 1.0, 0.1, true);
  CHECK(still.v_cam.cwiseAbs().maxCoeff() == 0.0);
  CHECK(still.yaw_rate == 0.0);

  const TwistCommand ahead = pbvs_twist(p_star + Eigen::Vector3d(0, 0, 1), p_star, 0.4, 1.0, 0.1, true);
  CHECK(ahead.v_cam.x() == 0.0);
  CHECK(ahead.v_cam.y() == 0.0);
  CHECK(ahead.v_cam.z() == doctest::Approx(10.0));
  CHECK(ahead.yaw_rate == 0.0);

  const TwistCommand turning = pbvs_twist(p_star, p_star, 0.4, 1.0, 0.1, false);
  CHECK(turning.yaw_rate == doctest::Approx(4.0));

  CHECK_THROWS_AS(pbvs_twist(p_star, p_star, 0.0, -1.0, 0.1, true), std::invalid_argument);
}

TEST_CASE("camera-frame commands map through the tilted mount") {
  SimParams p;  // pitch -pi/6
  CameraPose pose;
  pose.yaw = 0.4;
  TwistCommand cmd;
  cmd.v_cam = {0.0, 0.0, 10.0};  // along the optical axis
  const Action u = twist_command_to_action(cmd, pose, p);
  CHECK(u[0] == doctest::Approx(std::cos(M_PI / 6.0)));
  CHECK(u[1] == doctest::Approx(0.0));
  CHECK(u[2] == doctest::Approx(-0.5));
  CHECK(u[3] == doctest::Approx(0.0));
}

TEST_CASE("aiming at the upcoming pose beats chasing the current one") {
  SimParams p = tiny_params();
  DeskEnv env(p);
  const RolloutResult next_pose = rollout(env, make_pbvs_controller(1.0, true, true), 7);
  const RolloutResult current_pose = rollout(env, make_pbvs_controller(1.0, false, true), 7);
  CHECK(next_pose.end == Termination::Horizon);
  CHECK(next_pose.total_cost < 0.01);
  CHECK(next_pose.total_cost < current_pose.total_cost);
}

TEST_CASE("cross-entropy search draws three-x-dim members and keeps the top fifth") {
  const int dim = 5;
  int calls = 0;
  const Eigen::VectorXd target = Eigen::VectorXd::LinSpaced(dim, 0.2, 1.0);
  auto objective = [&](const Eigen::VectorXd& v) {
    ++calls;
    return (v - target).squaredNorm();
  };
  CemConfig config;
  config.iterations = 10;
  config.seed = 5;
  const CemResult result = cem_optimize(objective, dim, config);

  CHECK(calls == 10 * 3 * dim);
  REQUIRE(result.populations.size() == 10);
  REQUIRE(result.population_costs.size() == 10);
  REQUIRE(result.mean_history.size() == 10);

  for (size_t it = 0; it < result.populations.size(); ++it) {
    REQUIRE(result.populations[it].size() == static_cast<size_t>(3 * dim));
    std::vector<int> order(static_cast<size_t>(3 * dim));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return result.population_costs[it][static_cast<size_t>(a)] <
             result.population_costs[it][static_cast<size_t>(b)];
    });
    Eigen::VectorXd elite_mean = Eigen::VectorXd::Zero(dim);
    for (int e = 0; e < 3; ++e) elite_mean += result.populations[it][static_cast<size_t>(order[static_cast<size_t>(e)])];
    elite_mean /= 3.0;
    CHECK((elite_mean - result.mean_history[it]).cwiseAbs().maxCoeff() < 1e-12);
  }

  // the search pays off on a smooth bowl
  const double initial = objective(Eigen::VectorXd::Ones(dim).cwiseMax(0.0));
  const double final_cost = objective(result.mean.cwiseMax(0.0));
  CHECK(final_cost < initial);
  CHECK(final_cost < 0.05);
}

TEST_CASE("cross-entropy search is deterministic and validates its inputs") {
  auto objective = [](const Eigen::VectorXd& v) { return v.squaredNorm(); };
  CemConfig config;
  config.iterations = 4;
  config.seed = 11;
  const CemResult a = cem_optimize(objective, 3, config);
  const CemResult b = cem_optimize(objective, 3, config);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0);
  for (size_t i = 0; i < a.mean_history.size(); ++i)
    CHECK((a.mean_history[i] - b.mean_history[i]).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(cem_optimize(objective, 0, config), std::invalid_argument);
  config.iterations = 0;
  CHECK_THROWS_AS(cem_optimize(objective, 3, config), std::invalid_argument);
}

TEST_CASE("the gain sweep walks its fixed grid and prefers smaller ties") {
  std::vector<double> seen;
  const GainChoice flat = gain_sweep([&](double g) {
    seen.push_back(g);
    return 1.0;
  });
  REQUIRE(seen.size() == 40);
  for (int i = 0; i < 40; ++i) CHECK(seen[static_cast<size_t>(i)] == doctest::Approx(0.05 * (i + 1)).epsilon(1e-12));
  CHECK(flat.gain == doctest::Approx(0.05));
  CHECK(flat.mean_cost == 1.0);

  const GainChoice dip = gain_sweep([](double g) { return std::abs(g - 1.35); });
  CHECK(dip.gain == doctest::Approx(1.35));
  CHECK(dip.mean_cost == doctest::Approx(0.0));
}

TEST_CASE("baseline weight tuning fixes the feature weights at one") {
  SimParams p = tiny_params();
  p.horizon = 10;
  DeskEnv env(p);
  Rng rng(19);
  const BilinearModel model =
      BilinearModel::random(DynamicsVariant::LocallyConnected, {16}, 5, 4, 3, 0.05, rng);
  auto chroma = make_featurizer("chroma");
  const PolicyWeights weights = tune_unweighted_policy(env, model, *chroma, Standardizer::identity(5), 1, 99);
  CHECK(weights.w.size() == 5);
  CHECK((weights.w - Eigen::VectorXd::Ones(5)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(weights.lambda.size() == 4);
  CHECK(weights.lambda.minCoeff() >= 0.0);
  CHECK(weights.bias == 0.0);
}

TEST_CASE("rollout cost helpers refuse empty seed lists") {
  SimParams p = tiny_params();
  DeskEnv env(p);
  CHECK_THROWS_AS(mean_rollout_cost(env, [](DeskEnv&) { return Eigen::VectorXd::Zero(4); }, {}),
                  std::invalid_argument);
}
