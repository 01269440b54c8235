#include "servo/fqi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace servo {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double greedy_next_value(const BellmanSample& sample, const PolicyWeights& weights) {
  return min_q_from_quads(sample.next_quads, weights).second;
}

// phi of the greedy next action, actions frozen under the supplied weights
Eigen::VectorXd greedy_next_phi(const BellmanSample& sample, const PolicyWeights& weights, int control_dim) {
  const Action u = act_from_quads(sample.next_quads, weights);
  return phi_from_quads(sample.next_quads, u, control_dim);
}

struct CenteredProblem {
  Eigen::MatrixXd gram;       // Phi_c^T Phi_c / N
  Eigen::VectorXd cross;      // Phi_c^T t_c / N
  Eigen::VectorXd mean_phi;
  double mean_target = 0.0;
  double target_ss = 0.0;     // t_c^T t_c / N
};

}  // namespace

double bellman_error(const BellmanBatch& batch, const PolicyWeights& weights, double gamma) {
  require(!batch.samples.empty(), "bellman_error: empty batch");
  const Eigen::VectorXd theta = weights.theta();
  double total = 0.0;
  for (const BellmanSample& sample : batch.samples) {
    const double q = sample.phi_t.dot(theta) + weights.bias;
    const double target = sample.terminal ? sample.cost : sample.cost + gamma * greedy_next_value(sample, weights);
    const double diff = q - target;
    total += diff * diff;
  }
  return total / static_cast<double>(batch.samples.size());
}

AlphaBiasFit fit_alpha_bias(const BellmanBatch& batch, const PolicyWeights& theta_prev, double gamma, double nu) {
  require(!batch.samples.empty(), "fit_alpha_bias: empty batch");
  require(nu >= 0.0, "fit_alpha_bias: negative regularization");
  const int n = batch.size();
  const Eigen::VectorXd theta = theta_prev.theta();
  const double theta_ss = theta.squaredNorm();

  Eigen::VectorXd d(n), e(n), c(n);
  for (int i = 0; i < n; ++i) {
    const BellmanSample& sample = batch.samples[static_cast<size_t>(i)];
    c[i] = sample.cost;
    if (sample.terminal) {
      d[i] = sample.phi_t.dot(theta);
      e[i] = 1.0;
    } else {
      const Eigen::VectorXd phi_next = greedy_next_phi(sample, theta_prev, batch.control_dim);
      d[i] = sample.phi_t.dot(theta) - gamma * phi_next.dot(theta);
      e[i] = 1.0 - gamma;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  auto objective_at = [&](double alpha, double bias) {
    return inv_n * (alpha * d + bias * e - c).squaredNorm() + nu * alpha * alpha * theta_ss;
  };

  AlphaBiasFit fit;
  fit.reference_objective = objective_at(1.0, theta_prev.bias);
  const double dd = d.squaredNorm() * inv_n;
  const double de = d.dot(e) * inv_n;
  const double ee = e.squaredNorm() * inv_n;
  const double dc = d.dot(c) * inv_n;
  const double ec = e.dot(c) * inv_n;

  if (dd == 0.0 && nu * theta_ss == 0.0) {
    // the scale has no effect on the objective; keep it
    fit.alpha = 1.0;
    fit.bias = ec / ee;
    fit.alpha_undetermined = true;
    std::fprintf(stderr, "warning: scale fit is undetermined, keeping previous scale\n");
  } else {
    Eigen::Matrix2d normal;
    normal << dd + nu * theta_ss, de, de, ee;
    const Eigen::Vector2d rhs(dc, ec);
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(normal, Eigen::ComputeFullU | Eigen::ComputeFullV);
    svd.setThreshold(1e-14);
    const Eigen::Vector2d solution = svd.solve(rhs);
    fit.alpha = solution[0];
    fit.bias = solution[1];
    if (fit.alpha < 0.0) {
      fit.alpha = 0.0;
      fit.bias = ec / ee;
      fit.alpha_clamped = true;
    }
  }
  fit.objective = objective_at(fit.alpha, fit.bias);
  return fit;
}

ThetaBiasFit fit_theta_bias(const BellmanBatch& batch, const PolicyWeights& theta_half, double gamma, double nu) {
  require(!batch.samples.empty(), "fit_theta_bias: empty batch");
  require(nu >= 0.0, "fit_theta_bias: negative regularization");
  require((theta_half.w.array() >= 0.0).all() && (theta_half.lambda.array() >= 0.0).all(),
          "fit_theta_bias: half-step weights must be non-negative");
  const int n = batch.size();
  const Eigen::Index dim = theta_half.theta().size();

  Eigen::MatrixXd phi(n, dim);
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i) {
    const BellmanSample& sample = batch.samples[static_cast<size_t>(i)];
    require(sample.phi_t.size() == dim, "fit_theta_bias: feature size mismatch");
    phi.row(i) = sample.phi_t.transpose();
    t[i] = sample.terminal ? sample.cost : sample.cost + gamma * greedy_next_value(sample, theta_half);
  }

  CenteredProblem prob;
  prob.mean_phi = phi.colwise().mean();
  prob.mean_target = t.mean();
  const Eigen::MatrixXd phi_c = phi.rowwise() - prob.mean_phi.transpose();
  const Eigen::VectorXd t_c = t.array() - prob.mean_target;
  const double inv_n = 1.0 / static_cast<double>(n);
  prob.gram = phi_c.transpose() * phi_c * inv_n;
  prob.cross = phi_c.transpose() * t_c * inv_n;
  prob.target_ss = t_c.squaredNorm() * inv_n;

  auto gradient = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return 2.0 * (prob.gram * x - prob.cross + nu * x);
  };
  auto centered_objective = [&](const Eigen::VectorXd& x) {
    return x.dot(prob.gram * x) - 2.0 * prob.cross.dot(x) + prob.target_ss + nu * x.squaredNorm();
  };
  auto kkt_residual = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd g = gradient(x);
    double r = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k)
      r = std::max(r, x[k] > 0.0 ? std::abs(g[k]) : std::max(0.0, -g[k]));
    return r;
  };

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(prob.gram);
  const double lipschitz = 2.0 * (std::max(eig.eigenvalues().maxCoeff(), 0.0) + nu);

  Eigen::VectorXd x = theta_half.theta().cwiseMax(0.0);
  int used = 0;
  if (lipschitz > 0.0) {
    const double step = 1.0 / lipschitz;
    Eigen::VectorXd y = x;
    double momentum = 1.0;
    double best_obj = centered_objective(x);
    for (; used < kNnlsIterationCap; ++used) {
      if (kkt_residual(x) <= kKktTolerance) break;
      Eigen::VectorXd next = (y - step * gradient(y)).cwiseMax(0.0);
      const double obj = centered_objective(next);
      if (obj > best_obj) {  // restart momentum from the best iterate
        y = x;
        momentum = 1.0;
        next = (y - step * gradient(y)).cwiseMax(0.0);
      }
      const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      y = next + ((momentum - 1.0) / next_momentum) * (next - x);
      x = next;
      momentum = next_momentum;
      best_obj = std::min(best_obj, centered_objective(x));
    }
  }

  // active-set polish: exact solve on the positive support until optimal
  const int max_passes = 8 * static_cast<int>(dim) + 8;
  for (int pass = 0; pass < max_passes; ++pass) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index k = 0; k < dim; ++k)
      if (x[k] > 0.0) support.push_back(k);
    if (!support.empty()) {
      const Eigen::Index m = static_cast<Eigen::Index>(support.size());
      Eigen::MatrixXd sub(m, m);
      Eigen::VectorXd rhs(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        rhs[a] = prob.cross[support[static_cast<size_t>(a)]];
        for (Eigen::Index b = 0; b < m; ++b)
          sub(a, b) = prob.gram(support[static_cast<size_t>(a)], support[static_cast<size_t>(b)]);
        sub(a, a) += nu;
      }
      const Eigen::VectorXd z = sub.ldlt().solve(rhs);
      if ((z.array() >= 0.0).all()) {
        x.setZero();
        for (Eigen::Index a = 0; a < m; ++a) x[support[static_cast<size_t>(a)]] = z[a];
      } else {
        // back off toward the solve until the first coordinate hits zero
        double scale = 1.0;
        for (Eigen::Index a = 0; a < m; ++a) {
          if (z[a] < 0.0) {
            const double xa = x[support[static_cast<size_t>(a)]];
            scale = std::min(scale, xa / (xa - z[a]));
          }
        }
        for (Eigen::Index a = 0; a < m; ++a) {
          const Eigen::Index k = support[static_cast<size_t>(a)];
          x[k] = std::max(0.0, x[k] + scale * (z[a] - x[k]));
          if (z[a] < 0.0 && x[k] < 1e-15) x[k] = 0.0;
        }
        continue;
      }
    }
    const Eigen::VectorXd g = gradient(x);
    Eigen::Index worst = -1;
    double worst_grad = -kKktTolerance;
    for (Eigen::Index k = 0; k < dim; ++k) {
      if (x[k] == 0.0 && g[k] < worst_grad) {
        worst_grad = g[k];
        worst = k;
      }
    }
    if (worst < 0) break;
    x[worst] = std::numeric_limits<double>::min();  // admit into the support
  }

  ThetaBiasFit fit;
  fit.iterations = used;
  fit.kkt_residual = kkt_residual(x);
  if (fit.kkt_residual > kKktTolerance) {
    throw std::runtime_error("fit_theta_bias: solver stalled, first-order residual " +
                             std::to_string(fit.kkt_residual));
  }
  const double bias = prob.mean_target - prob.mean_phi.dot(x);
  fit.weights = PolicyWeights::from_theta(x, bias, theta_half.levels, theta_half.channels,
                                          static_cast<int>(theta_half.lambda.size()));
  fit.objective = inv_n * (phi * x + Eigen::VectorXd::Constant(n, bias) - t).squaredNorm() + nu * x.squaredNorm();
  const Eigen::VectorXd half = theta_half.theta();
  fit.reference_objective =
      inv_n * (phi * half + Eigen::VectorXd::Constant(n, theta_half.bias) - t).squaredNorm() + nu * half.squaredNorm();
  return fit;
}

namespace {

Pyramid featurize_pyramid(const Observation& obs, const Featurizer& featurizer, const Standardizer& standardizer,
                          int levels) {
  return build_pyramid(featurize(obs, featurizer, standardizer), levels);
}

std::vector<FeatureQuad> expand_observation(const Observation& obs, const Pyramid& goal, const BilinearModel& model,
                                            const Featurizer& featurizer, const Standardizer& standardizer) {
  ServoState state;
  state.features = featurize_pyramid(obs, featurizer, standardizer, model.levels);
  state.goal_features = goal;
  return expand_state(state, model);
}

void gather_trajectory(Env& env, const BilinearModel& model, const Featurizer& featurizer,
                       const Standardizer& standardizer, const PolicyWeights& weights, double sigma,
                       std::uint64_t scenario_seed, std::uint64_t noise_seed, BellmanBatch& batch) {
  env.reset(scenario_seed, ResetMode::Evaluation);
  Rng noise(noise_seed);
  const Pyramid goal = featurize_pyramid(env.goal_observation(), featurizer, standardizer, model.levels);
  std::vector<FeatureQuad> quads = expand_observation(env.observation(), goal, model, featurizer, standardizer);
  while (!env.done()) {
    Action u = act_from_quads(quads, weights);
    for (Eigen::Index j = 0; j < u.size(); ++j)
      u[j] = std::clamp(u[j] + sigma * noise.normal(), -1.0, 1.0);
    BellmanSample sample;
    sample.phi_t = phi_from_quads(quads, u, batch.control_dim);
    const StepOutcome out = env.step(u);
    if (!std::isfinite(out.cost)) throw std::runtime_error("fqi_run: non-finite cost from environment");
    sample.cost = out.cost;
    sample.terminal = out.absorbing();
    if (!sample.terminal) {
      sample.next_quads = expand_observation(env.observation(), goal, model, featurizer, standardizer);
      if (!env.done()) quads = sample.next_quads;
    }
    batch.samples.push_back(std::move(sample));
  }
}

}  // namespace

double greedy_rollout_cost(Env& env, const BilinearModel& model, const Featurizer& featurizer,
                           const Standardizer& standardizer, const PolicyWeights& weights, std::uint64_t seed,
                           ResetMode mode) {
  env.reset(seed, mode);
  const Pyramid goal = featurize_pyramid(env.goal_observation(), featurizer, standardizer, model.levels);
  double total = 0.0;
  while (!env.done()) {
    const std::vector<FeatureQuad> quads =
        expand_observation(env.observation(), goal, model, featurizer, standardizer);
    total += env.step(act_from_quads(quads, weights)).cost;
  }
  return total;
}

FqiResult fqi_run(Env& env, const BilinearModel& model, const Featurizer& featurizer,
                  const Standardizer& standardizer, const PolicyWeights& theta0, const FqiConfig& config,
                  std::uint64_t master_seed) {
  require(config.sampling_iterations >= 1 && config.fqi_iterations >= 1 && config.trajectories_per_iteration >= 1,
          "fqi_run: iteration counts must be positive");
  require(config.gamma >= 0.0 && config.gamma < 1.0, "fqi_run: discount must lie in [0, 1)");
  require(config.exploration_sigma >= 0.0 && config.nu >= 0.0, "fqi_run: noise and regularization must be >= 0");
  require((theta0.w.array() >= 0.0).all() && (theta0.lambda.array() >= 0.0).all(),
          "fqi_run: initial weights must be non-negative");

  FqiResult result;
  result.total_training_trajectories = config.sampling_iterations * config.trajectories_per_iteration;

  std::vector<std::uint64_t> validation_seeds;
  for (int i = 0; i < config.validation_trajectories; ++i)
    validation_seeds.push_back(validation_seed(master_seed, i));

  PolicyWeights current = theta0;
  for (int s = 0; s < config.sampling_iterations; ++s) {
    BellmanBatch batch;
    batch.control_dim = model.control_dim;
    for (int i = 0; i < config.trajectories_per_iteration; ++i) {
      const std::uint64_t index = static_cast<std::uint64_t>(s) * config.trajectories_per_iteration + i;
      gather_trajectory(env, model, featurizer, standardizer, current, config.exploration_sigma,
                        sub_seed(master_seed, "fqi-sampling", index), sub_seed(master_seed, "fqi-noise", index),
                        batch);
    }

    PolicyWeights iterate = current;
    for (int k = 0; k < config.fqi_iterations; ++k) {
      const AlphaBiasFit scale = fit_alpha_bias(batch, iterate, config.gamma, config.nu);
      PolicyWeights half = iterate;
      half.w *= scale.alpha;
      half.lambda *= scale.alpha;
      half.bias = scale.bias;
      const ThetaBiasFit fit = fit_theta_bias(batch, half, config.gamma, config.nu);
      iterate = fit.weights;

      FqiIterationRecord record;
      record.sampling_iteration = s;
      record.fqi_iteration = k;
      record.alpha = scale.alpha;
      record.bias = iterate.bias;
      record.bellman = bellman_error(batch, iterate, config.gamma);
      record.scale_objective = scale.objective;
      record.scale_reference = scale.reference_objective;
      record.fit_objective = fit.objective;
      record.fit_reference = fit.reference_objective;
      record.kkt_residual = fit.kkt_residual;
      record.theta_min = iterate.theta().minCoeff();
      result.records.push_back(record);
    }

    double validation = 0.0;
    for (const std::uint64_t seed : validation_seeds)
      validation += greedy_rollout_cost(env, model, featurizer, standardizer, iterate, seed);
    validation /= static_cast<double>(validation_seeds.empty() ? 1 : validation_seeds.size());

    result.per_sampling.push_back(iterate);
    result.validation_costs.push_back(validation);
    current = iterate;
  }

  size_t best = 0;
  for (size_t i = 1; i < result.validation_costs.size(); ++i)
    if (result.validation_costs[i] < result.validation_costs[best]) best = i;
  result.best = result.per_sampling[best];
  return result;
}

}  // namespace servo
