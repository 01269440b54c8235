#include "servo/policy.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace servo {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_weights(const PolicyWeights& weights, const std::vector<FeatureQuad>& quads) {
  require(weights.w.size() == static_cast<Eigen::Index>(quads.size()),
          "policy weights do not match state expansion size");
  require((weights.w.array() >= 0.0).all() && (weights.lambda.array() >= 0.0).all(),
          "policy weights must be non-negative");
}

}  // namespace

ServoState make_servo_state(const Observation& obs, const Observation& goal_obs, const Featurizer& featurizer,
                            const Standardizer& standardizer, int pyramid_levels) {
  ServoState s;
  s.obs = obs;
  s.goal_obs = goal_obs;
  s.features = build_pyramid(featurize(obs, featurizer, standardizer), pyramid_levels);
  s.goal_features = build_pyramid(featurize(goal_obs, featurizer, standardizer), pyramid_levels);
  return s;
}

Eigen::VectorXd PolicyWeights::theta() const {
  Eigen::VectorXd t(w.size() + lambda.size());
  t << w, lambda;
  return t;
}

PolicyWeights PolicyWeights::uniform(int levels, int channels, int control_dim) {
  PolicyWeights p;
  p.levels = levels;
  p.channels = channels;
  p.w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(levels + 1) * channels);
  p.lambda = Eigen::VectorXd::Ones(control_dim);
  p.bias = 0.0;
  return p;
}

PolicyWeights PolicyWeights::from_theta(const Eigen::VectorXd& theta, double bias, int levels, int channels,
                                        int control_dim) {
  const Eigen::Index nw = static_cast<Eigen::Index>(levels + 1) * channels;
  require(theta.size() == nw + control_dim, "theta has wrong dimension");
  PolicyWeights p;
  p.levels = levels;
  p.channels = channels;
  p.w = theta.head(nw);
  p.lambda = theta.tail(control_dim);
  p.bias = bias;
  return p;
}

std::vector<FeatureQuad> expand_state(const ServoState& state, const BilinearModel& model) {
  require(state.features.depth() == model.levels && state.goal_features.depth() == model.levels,
          "state pyramids do not match model depth");
  std::vector<FeatureQuad> quads;
  quads.reserve(static_cast<size_t>(model.levels + 1) * model.channels);
  for (int l = 0; l <= model.levels; ++l) {
    const FeatureMap& y = state.features.levels[static_cast<size_t>(l)];
    const FeatureMap& goal = state.goal_features.levels[static_cast<size_t>(l)];
    const LevelJacobian jac = jacobian_level(model, y);
    const double inv_cells = 1.0 / static_cast<double>(y.resolution * y.resolution);
    for (int c = 0; c < model.channels; ++c) {
      const Eigen::MatrixXd& J = jac.per_channel[static_cast<size_t>(c)];
      const Eigen::VectorXd f0 = predict_free_channel(model, y, c);
      const Eigen::VectorXd e0 = goal.channel_vec(c) - f0;
      FeatureQuad quad;
      quad.P = inv_cells * (J.transpose() * J);
      quad.q = -2.0 * inv_cells * (J.transpose() * e0);
      quad.r = inv_cells * e0.squaredNorm();
      quads.push_back(std::move(quad));
    }
  }
  return quads;
}

Eigen::VectorXd phi(const ServoState& state, const Action& u, const BilinearModel& model) {
  require(state.features.depth() == model.levels, "state pyramid does not match model depth");
  require(static_cast<int>(u.size()) == model.control_dim, "action has wrong dimension");
  const int nw = (model.levels + 1) * model.channels;
  Eigen::VectorXd out(nw + model.control_dim);
  const Pyramid pred = predict(model, state.features, u);
  int i = 0;
  for (int l = 0; l <= model.levels; ++l) {
    const FeatureMap& goal = state.goal_features.levels[static_cast<size_t>(l)];
    const FeatureMap& p = pred.levels[static_cast<size_t>(l)];
    const double inv_cells = 1.0 / static_cast<double>(p.resolution * p.resolution);
    for (int c = 0; c < model.channels; ++c, ++i)
      out[i] = inv_cells * (goal.channel_vec(c) - p.channel_vec(c)).squaredNorm();
  }
  out.tail(model.control_dim) = u.array().square();
  return out;
}

Eigen::VectorXd phi_from_quads(const std::vector<FeatureQuad>& quads, const Action& u, int control_dim) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(quads.size()) + control_dim);
  for (size_t i = 0; i < quads.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = u.dot(quads[i].P * u) + quads[i].q.dot(u) + quads[i].r;
  out.tail(control_dim) = u.array().square();
  return out;
}

double q_value(const PolicyWeights& weights, const ServoState& state, const Action& u, const BilinearModel& model) {
  return phi(state, u, model).dot(weights.theta()) + weights.bias;
}

QuadraticForm assemble_quadratic(const std::vector<FeatureQuad>& quads, const PolicyWeights& weights) {
  check_weights(weights, quads);
  const Eigen::Index dim = weights.lambda.size();
  QuadraticForm f;
  f.A = Eigen::MatrixXd::Zero(dim, dim);
  f.g = Eigen::VectorXd::Zero(dim);
  f.k = 0.0;
  for (size_t i = 0; i < quads.size(); ++i) {
    const double wi = weights.w[static_cast<Eigen::Index>(i)];
    if (wi == 0.0) continue;
    f.A.noalias() += wi * quads[i].P;
    f.g.noalias() += wi * quads[i].q;
    f.k += wi * quads[i].r;
  }
  f.A.diagonal() += weights.lambda;
  return f;
}

QuadraticForm objective_quadratic(const ServoState& state, const BilinearModel& model,
                                  const PolicyWeights& weights) {
  return assemble_quadratic(expand_state(state, model), weights);
}

Action clip_action(Action u) {
  for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = std::clamp(u[j], -1.0, 1.0);
  return u;
}

namespace {

Action solve_quadratic_argmin(const QuadraticForm& f, const PolicyWeights& weights) {
  Eigen::MatrixXd A = f.A;
  if (weights.lambda.size() == 0 || weights.lambda.minCoeff() == 0.0)
    A.diagonal().array() += 1e-9;  // keep the normal system invertible when unpenalized
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("act: degenerate policy weights, singular objective");
  const Action u = ldlt.solve(-0.5 * f.g);
  if (!u.allFinite()) throw std::runtime_error("act: degenerate policy weights, singular objective");
  return clip_action(u);
}

}  // namespace

Action act_from_quads(const std::vector<FeatureQuad>& quads, const PolicyWeights& weights) {
  return solve_quadratic_argmin(assemble_quadratic(quads, weights), weights);
}

Action act(const ServoState& state, const BilinearModel& model, const PolicyWeights& weights) {
  return act_from_quads(expand_state(state, model), weights);
}

std::pair<Action, double> min_q_from_quads(const std::vector<FeatureQuad>& quads, const PolicyWeights& weights) {
  const QuadraticForm f = assemble_quadratic(quads, weights);
  const Action u = solve_quadratic_argmin(f, weights);
  const double value = u.dot(f.A * u) + f.g.dot(u) + f.k + weights.bias;
  return {u, value};
}

std::pair<Action, double> min_q(const PolicyWeights& weights, const ServoState& state, const BilinearModel& model) {
  return min_q_from_quads(expand_state(state, model), weights);
}

}  // namespace servo
