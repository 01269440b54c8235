#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "servo/dynamics.hpp"
#include "servo/featurize.hpp"
#include "servo/fqi.hpp"
#include "servo/rng.hpp"
#include "servo/sim.hpp"

using namespace servo;

namespace {

// one-dimensional next-state expansion whose greedy value is the bias alone
std::vector<FeatureQuad> unit_quads() {
  std::vector<FeatureQuad> quads(1);
  quads[0].P = Eigen::MatrixXd::Identity(1, 1);
  quads[0].q = Eigen::VectorXd::Zero(1);
  quads[0].r = 0.0;
  return quads;
}

BellmanSample make_sample(const Eigen::VectorXd& phi, double cost, bool terminal) {
  BellmanSample s;
  s.phi_t = phi;
  s.cost = cost;
  s.terminal = terminal;
  if (!terminal) s.next_quads = unit_quads();
  return s;
}

// fixed observation, zero cost, fixed horizon; the goal is already met
class StaticEnv : public Env {
 public:
  explicit StaticEnv(int horizon) : horizon_(horizon), obs_(1, 4, 4) {
    for (size_t i = 0; i < obs_.data.size(); ++i) obs_.data[i] = 0.25 * static_cast<double>(i % 3);
  }
  int action_dim() const override { return 2; }
  int horizon() const override { return horizon_; }
  void reset(std::uint64_t, ResetMode) override {
    t_ = 0;
    done_ = false;
  }
  StepOutcome step(const Action&) override {
    ++t_;
    StepOutcome out;
    out.cost = 0.0;
    out.reason = t_ >= horizon_ ? Termination::Horizon : Termination::None;
    done_ = out.episode_over();
    return out;
  }
  const Observation& observation() const override { return obs_; }
  const Observation& goal_observation() const override { return obs_; }
  bool done() const override { return done_; }
  int time() const override { return t_; }

 private:
  int horizon_;
  int t_ = 0;
  bool done_ = false;
  Observation obs_;
};

}  // namespace

TEST_CASE("a constant value function has the closed-form one-step inconsistency") {
  const double gamma = 0.9;
  BellmanBatch batch;
  batch.control_dim = 1;
  const std::vector<double> costs = {0.4, 1.3, 0.0, 2.2};
  for (double c : costs) {
    Eigen::VectorXd phi(2);
    phi << c, c * c;  // arbitrary features; theta is zero in these checks
    batch.samples.push_back(make_sample(phi, c, false));
  }

  PolicyWeights flat = PolicyWeights::from_theta(Eigen::VectorXd::Zero(2), 0.0, 0, 1, 1);
  CHECK(bellman_error(batch, flat, gamma) ==
        doctest::Approx((0.4 * 0.4 + 1.3 * 1.3 + 0.0 + 2.2 * 2.2) / 4.0));

  flat.bias = 1.7;
  double expected = 0.0;
  for (double c : costs) {
    const double diff = (1.0 - gamma) * flat.bias - c;
    expected += diff * diff;
  }
  CHECK(bellman_error(batch, flat, gamma) == doctest::Approx(expected / 4.0).epsilon(1e-12));

  // constant costs are fit exactly by the stationary bias c / (1 - gamma)
  BellmanBatch constant;
  constant.control_dim = 1;
  for (int i = 0; i < 5; ++i) constant.samples.push_back(make_sample(Eigen::VectorXd::Zero(2), 0.6, false));
  flat.bias = 0.6 / (1.0 - gamma);
  CHECK(bellman_error(constant, flat, gamma) < 1e-24);

  CHECK_THROWS_AS(bellman_error(BellmanBatch{}, flat, gamma), std::invalid_argument);
}

TEST_CASE("the scale fit solves its two-variable least squares in closed form") {
  // terminal pairs with phi . theta = 1 and 2 against costs 2 and 3:
  // alpha = 1, bias = 1 reproduces both targets exactly
  PolicyWeights prev = PolicyWeights::from_theta(Eigen::VectorXd::Ones(2), 0.0, 0, 1, 1);
  BellmanBatch batch;
  batch.control_dim = 1;
  Eigen::VectorXd phi1(2), phi2(2);
  phi1 << 1.0, 0.0;
  phi2 << 0.0, 2.0;
  batch.samples.push_back(make_sample(phi1, 2.0, true));
  batch.samples.push_back(make_sample(phi2, 3.0, true));

  const AlphaBiasFit fit = fit_alpha_bias(batch, prev, 0.9, 0.0);
  CHECK(fit.alpha == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit.bias == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit.objective < 1e-18);
  CHECK(fit.reference_objective == doctest::Approx(1.0));  // alpha 1, bias 0 misses both by 1
  CHECK_FALSE(fit.alpha_clamped);
  CHECK_FALSE(fit.alpha_undetermined);
}

TEST_CASE("zero costs with regularization shrink the scale to zero") {
  PolicyWeights prev = PolicyWeights::from_theta(Eigen::VectorXd::Ones(2), 0.5, 0, 1, 1);
  BellmanBatch batch;
  batch.control_dim = 1;
  Eigen::VectorXd phi(2);
  phi << 1.0, 2.0;
  batch.samples.push_back(make_sample(phi, 0.0, true));
  batch.samples.push_back(make_sample(2.0 * phi, 0.0, true));

  const AlphaBiasFit fit = fit_alpha_bias(batch, prev, 0.9, 0.1);
  CHECK(fit.alpha == 0.0);
  CHECK(fit.bias == 0.0);
  CHECK(fit.objective == 0.0);
  CHECK_FALSE(fit.alpha_clamped);
  CHECK(fit.objective <= fit.reference_objective);
}

TEST_CASE("an all-zero previous value function leaves the scale undetermined") {
  PolicyWeights prev = PolicyWeights::from_theta(Eigen::VectorXd::Zero(2), 0.0, 0, 1, 1);
  BellmanBatch batch;
  batch.control_dim = 1;
  Eigen::VectorXd phi(2);
  phi << 1.0, 2.0;
  batch.samples.push_back(make_sample(phi, 2.0, true));
  batch.samples.push_back(make_sample(phi, 4.0, true));

  const AlphaBiasFit fit = fit_alpha_bias(batch, prev, 0.9, 0.0);
  CHECK(fit.alpha_undetermined);
  CHECK(fit.alpha == 1.0);
  CHECK(fit.bias == doctest::Approx(3.0));
  CHECK(fit.objective == doctest::Approx(1.0));  // residuals -1 and +1
}

TEST_CASE("the non-negative fit recovers realizable targets") {
  Rng rng(7);
  const int dim = 5, n = 60;
  Eigen::VectorXd truth(dim);
  truth << 0.8, 0.0, 1.5, 0.3, 0.0;
  const double true_bias = -0.7;

  PolicyWeights half = PolicyWeights::from_theta(Eigen::VectorXd::Zero(dim), 0.0, 0, 3, 2);
  BellmanBatch batch;
  batch.control_dim = 2;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd phi(dim);
    for (int k = 0; k < dim; ++k) phi[k] = rng.uniform();
    batch.samples.push_back(make_sample(phi, phi.dot(truth) + true_bias, true));
  }

  const ThetaBiasFit fit = fit_theta_bias(batch, half, 0.9, 0.0);
  CHECK(fit.kkt_residual <= kKktTolerance);
  CHECK(fit.objective < 1e-12);
  CHECK(fit.objective <= fit.reference_objective + 1e-12);
  CHECK(fit.weights.theta().minCoeff() >= 0.0);
  CHECK((fit.weights.theta() - truth).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(fit.weights.bias == doctest::Approx(true_bias).epsilon(1e-6));
}

TEST_CASE("featureless batches are fit by the bias alone") {
  PolicyWeights half = PolicyWeights::from_theta(Eigen::VectorXd::Zero(3), 0.0, 0, 1, 2);
  BellmanBatch batch;
  batch.control_dim = 2;
  const std::vector<double> targets = {1.0, 2.0, 6.0};
  for (double t : targets) batch.samples.push_back(make_sample(Eigen::VectorXd::Zero(3), t, true));

  const ThetaBiasFit fit = fit_theta_bias(batch, half, 0.9, 0.0);
  CHECK(fit.weights.theta().cwiseAbs().maxCoeff() == 0.0);
  CHECK(fit.weights.bias == doctest::Approx(3.0));
  const double var = ((1.0 - 3.0) * (1.0 - 3.0) + 1.0 + 9.0) / 3.0;
  CHECK(fit.objective == doctest::Approx(var));
  CHECK(fit.kkt_residual <= kKktTolerance);
}

TEST_CASE("the non-negative fit clamps hostile coordinates and beats a grid") {
  Rng rng(13);
  const int dim = 2, n = 40;
  PolicyWeights half = PolicyWeights::from_theta(Eigen::VectorXd::Constant(dim, 0.5), 0.0, 0, 1, 1);
  BellmanBatch batch;
  batch.control_dim = 1;
  Eigen::MatrixXd phis(n, dim);
  Eigen::VectorXd targets(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd phi(dim);
    phi[0] = rng.uniform();
    phi[1] = rng.uniform();
    // the second coordinate is anti-correlated with the target
    const double t = 2.0 * phi[0] - 1.5 * phi[1] + 0.4;
    phis.row(i) = phi.transpose();
    targets[i] = t;
    batch.samples.push_back(make_sample(phi, t, true));
  }

  const double nu = 0.01;
  const ThetaBiasFit fit = fit_theta_bias(batch, half, 0.9, nu);
  CHECK(fit.kkt_residual <= kKktTolerance);
  CHECK(fit.weights.theta().minCoeff() >= 0.0);
  CHECK(fit.weights.theta()[1] == 0.0);
  CHECK(fit.objective <= fit.reference_objective + 1e-9);

  auto objective_at = [&](const Eigen::VectorXd& theta) {
    const double bias = targets.mean() - phis.colwise().mean().dot(theta);
    return (phis * theta + Eigen::VectorXd::Constant(n, bias) - targets).squaredNorm() / n +
           nu * theta.squaredNorm();
  };
  for (double a = 0.0; a <= 2.01; a += 0.25)
    for (double b = 0.0; b <= 2.01; b += 0.25) {
      Eigen::VectorXd probe(2);
      probe << a, b;
      CHECK(fit.objective <= objective_at(probe) + 1e-9);
    }
}

TEST_CASE("the fits reject malformed inputs") {
  BellmanBatch empty;
  PolicyWeights w = PolicyWeights::uniform(0, 1, 1);
  CHECK_THROWS_AS(fit_alpha_bias(empty, w, 0.9, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(fit_theta_bias(empty, w, 0.9, 0.1), std::invalid_argument);

  BellmanBatch batch;
  batch.control_dim = 1;
  batch.samples.push_back(make_sample(Eigen::VectorXd::Ones(2), 1.0, true));
  PolicyWeights negative = PolicyWeights::from_theta(Eigen::VectorXd::Constant(2, -0.5), 0.0, 0, 1, 1);
  CHECK_THROWS_AS(fit_theta_bias(batch, negative, 0.9, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(fit_alpha_bias(batch, w, 0.9, -0.1), std::invalid_argument);
}

TEST_CASE("a goal-satisfied environment drives the value function to zero") {
  StaticEnv env(5);
  const BilinearModel model = BilinearModel::zeros(DynamicsVariant::LocallyConnected, {4}, 1, 2, 3);
  auto pixel = make_featurizer("pixel");
  const PolicyWeights theta0 = PolicyWeights::uniform(0, 1, 2);

  FqiConfig config;
  config.sampling_iterations = 2;
  config.fqi_iterations = 3;
  config.trajectories_per_iteration = 2;
  config.validation_trajectories = 2;
  const FqiResult result = fqi_run(env, model, *pixel, Standardizer::identity(1), theta0, config, 77);

  REQUIRE(result.records.size() == 6);
  REQUIRE(result.per_sampling.size() == 2);
  REQUIRE(result.validation_costs.size() == 2);
  CHECK(result.total_training_trajectories == 4);
  for (const FqiIterationRecord& rec : result.records) {
    CHECK(rec.bellman == 0.0);
    CHECK(rec.theta_min == 0.0);
    CHECK(rec.kkt_residual <= kKktTolerance);
  }
  for (double v : result.validation_costs) CHECK(v == 0.0);
  CHECK(result.best.theta().cwiseAbs().maxCoeff() == 0.0);
  CHECK(result.best.bias == 0.0);
}

TEST_CASE("policy iteration on the simulator honors its per-record contracts") {
  SimParams p;
  p.resolution = 16;
  p.supersample = 1;
  p.horizon = 10;
  DeskEnv env(p);

  Rng rng(29);
  const BilinearModel model =
      BilinearModel::random(DynamicsVariant::LocallyConnected, {16}, 5, 4, 3, 0.05, rng);
  auto chroma = make_featurizer("chroma");
  const Standardizer st = Standardizer::identity(5);
  const PolicyWeights theta0 = PolicyWeights::uniform(0, 5, 4);

  FqiConfig config;
  config.sampling_iterations = 2;
  config.fqi_iterations = 3;
  config.trajectories_per_iteration = 3;
  config.validation_trajectories = 2;

  const FqiResult run1 = fqi_run(env, model, *chroma, st, theta0, config, 4242);
  REQUIRE(run1.records.size() == 6);
  int expected_s = 0, expected_k = 0;
  for (const FqiIterationRecord& rec : run1.records) {
    CHECK(rec.sampling_iteration == expected_s);
    CHECK(rec.fqi_iteration == expected_k);
    if (++expected_k == 3) {
      expected_k = 0;
      ++expected_s;
    }
    CHECK(rec.scale_objective <= rec.scale_reference + 1e-12 + 1e-12 * rec.scale_reference);
    CHECK(rec.fit_objective <= rec.fit_reference + 1e-9 + 1e-9 * rec.fit_reference);
    CHECK(rec.kkt_residual <= kKktTolerance);
    CHECK(rec.theta_min >= 0.0);
    CHECK(std::isfinite(rec.bellman));
    CHECK(rec.bellman >= 0.0);
  }
  CHECK(run1.validation_costs.size() == 2);
  const size_t best_index =
      run1.validation_costs[0] <= run1.validation_costs[1] ? 0 : 1;
  CHECK((run1.best.theta() - run1.per_sampling[best_index].theta()).cwiseAbs().maxCoeff() == 0.0);

  const FqiResult run2 = fqi_run(env, model, *chroma, st, theta0, config, 4242);
  CHECK((run1.best.theta() - run2.best.theta()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(run1.best.bias == run2.best.bias);
  for (size_t i = 0; i < run1.records.size(); ++i) {
    CHECK(run1.records[i].alpha == run2.records[i].alpha);
    CHECK(run1.records[i].bellman == run2.records[i].bellman);
    CHECK(run1.records[i].fit_objective == run2.records[i].fit_objective);
  }
  CHECK(run1.validation_costs == run2.validation_costs);

  // the greedy evaluator is itself deterministic
  const double c1 = greedy_rollout_cost(env, model, *chroma, st, run1.best, evaluation_seed(4242, 0));
  const double c2 = greedy_rollout_cost(env, model, *chroma, st, run1.best, evaluation_seed(4242, 0));
  CHECK(c1 == c2);
}

TEST_CASE("policy iteration validates its configuration") {
  StaticEnv env(3);
  const BilinearModel model = BilinearModel::zeros(DynamicsVariant::LocallyConnected, {4}, 1, 2, 3);
  auto pixel = make_featurizer("pixel");
  const PolicyWeights theta0 = PolicyWeights::uniform(0, 1, 2);

  FqiConfig bad;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(fqi_run(env, model, *pixel, Standardizer::identity(1), theta0, bad, 1),
                  std::invalid_argument);
  bad = FqiConfig{};
  bad.sampling_iterations = 0;
  CHECK_THROWS_AS(fqi_run(env, model, *pixel, Standardizer::identity(1), theta0, bad, 1),
                  std::invalid_argument);

  PolicyWeights negative = theta0;
  negative.lambda[0] = -0.5;
  CHECK_THROWS_AS(fqi_run(env, model, *pixel, Standardizer::identity(1), negative, FqiConfig{}, 1),
                  std::invalid_argument);
}
