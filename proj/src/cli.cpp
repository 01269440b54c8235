#include "servo/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "servo/baselines.hpp"
#include "servo/container.hpp"
#include "servo/dynamics.hpp"
#include "servo/fqi.hpp"
#include "servo/results.hpp"
#include "servo/rng.hpp"
#include "servo/sim.hpp"

namespace servo {

namespace {

using ordered_json = nlohmann::ordered_json;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

std::vector<std::uint64_t> evaluation_seeds(const ExperimentConfig& config) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<size_t>(config.eval_trajectories));
  for (int i = 0; i < config.eval_trajectories; ++i) seeds.push_back(evaluation_seed(config.seed, i));
  return seeds;
}

std::vector<std::uint64_t> validation_seeds(const ExperimentConfig& config) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<size_t>(config.fqi.validation_trajectories));
  for (int i = 0; i < config.fqi.validation_trajectories; ++i) seeds.push_back(validation_seed(config.seed, i));
  return seeds;
}

std::vector<double> rollout_costs(DeskEnv& env, const Controller& controller,
                                  const std::vector<std::uint64_t>& seeds) {
  std::vector<double> costs;
  costs.reserve(seeds.size());
  for (const std::uint64_t s : seeds) costs.push_back(rollout(env, controller, s).total_cost);
  return costs;
}

// 90/10 interleaved split so held-out triplets cover every trajectory phase
void split_triplets(int count, std::vector<int>& train, std::vector<int>& holdout) {
  train.clear();
  holdout.clear();
  for (int i = 0; i < count; ++i) (i % 10 == 9 ? holdout : train).push_back(i);
}

// per-entry variance of the next-frame pyramid entries, the natural scale
// reference for one-step prediction error
double target_entry_variance(const TrajectoryDataset& data, const Featurizer& featurizer, int levels,
                             const std::vector<int>& triplet_indices) {
  double mean = 0.0, m2 = 0.0;
  size_t count = 0;
  Observation x0, x1;
  Eigen::VectorXd u;
  for (const int idx : triplet_indices) {
    data.triplet(idx, x0, u, x1);
    const Pyramid p1 = build_pyramid(featurize(x1, featurizer, data.standardizer), levels);
    for (const FeatureMap& fm : p1.levels) {
      for (const double v : fm.data) {
        ++count;
        const double delta = v - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta * (v - mean);
      }
    }
  }
  return count > 1 ? m2 / static_cast<double>(count) : 0.0;
}

std::string number_text(double v) { return nlohmann::json(v).dump(); }

struct TrainedDynamics {
  ModelBundle bundle;
  double holdout_mse = 0.0;
  double target_variance = 0.0;
};

/* Shared by train-dynamics and compare: fit on the interleaved 90% of the
 * triplets, report held-out error, persist the model, then reload it so the
 * in-memory parameters match the float32 file exactly. */
TrainedDynamics run_dynamics_training(const ExperimentConfig& config, const TrajectoryDataset& ds,
                                      const OutputPaths& out) {
  if (ds.featurizer_id != config.featurizer)
    throw std::runtime_error("dataset featurizer \"" + ds.featurizer_id + "\" does not match configured \"" +
                             config.featurizer + "\"");
  const auto featurizer = make_featurizer(config.featurizer);
  DynamicsTrainConfig dc = config.dynamics;
  dc.seed = sub_seed(config.seed, "dynamics");
  std::vector<int> train_idx, holdout_idx;
  split_triplets(ds.triplet_count(), train_idx, holdout_idx);
  dc.triplet_indices = train_idx;
  const DynamicsTrainResult trained =
      train_dynamics(ds, *featurizer, config.pyramid_levels, config.variant, config.filter_size, dc);

  ModelBundle bundle;
  bundle.model = trained.model;
  bundle.featurizer_id = ds.featurizer_id;
  bundle.standardizer = ds.standardizer;
  save_model(out.model(), bundle);

  std::ofstream log = open_out(out.dynamics_loss_log());
  for (size_t i = 0; i < trained.loss_log.size(); ++i) {
    ordered_json line;
    line["iteration"] = i;
    line["loss"] = trained.loss_log[i];
    log << line.dump() << "\n";
  }

  TrainedDynamics result;
  result.bundle = load_model(out.model());
  result.holdout_mse = dynamics_mse(ds, *featurizer, result.bundle.model, holdout_idx);
  result.target_variance = target_entry_variance(ds, *featurizer, result.bundle.model.levels, holdout_idx);
  std::cout << "trained dynamics: " << trained.loss_log.size() << " iterations, final training loss "
            << number_text(trained.loss_log.empty() ? 0.0 : trained.loss_log.back()) << "\n";
  std::cout << "held-out mse: " << number_text(result.holdout_mse) << " (target entry variance "
            << number_text(result.target_variance) << ")\n";
  return result;
}

struct FqiArtifacts {
  PolicyWeights best;
  std::vector<double> validation_costs;
  int total_training_trajectories = 0;
};

FqiArtifacts run_fqi_training(const ExperimentConfig& config, const ModelBundle& bundle, const OutputPaths& out) {
  const auto featurizer = make_featurizer(bundle.featurizer_id);
  DeskEnv env(config.env);
  const PolicyWeights theta0 =
      PolicyWeights::uniform(bundle.model.levels, bundle.model.channels, bundle.model.control_dim);
  const FqiResult result =
      fqi_run(env, bundle.model, *featurizer, bundle.standardizer, theta0, config.fqi, config.seed);

  save_weights(out.weights(), result.best);
  std::ofstream log = open_out(out.fqi_log());
  size_t rec = 0;
  for (int s = 0; s < config.fqi.sampling_iterations; ++s) {
    for (; rec < result.records.size() && result.records[rec].sampling_iteration == s; ++rec) {
      const FqiIterationRecord& r = result.records[rec];
      ordered_json line;
      line["sampling-iteration"] = r.sampling_iteration;
      line["fqi-iteration"] = r.fqi_iteration;
      line["alpha"] = r.alpha;
      line["bias"] = r.bias;
      line["bellman"] = r.bellman;
      line["scale-objective"] = r.scale_objective;
      line["scale-reference"] = r.scale_reference;
      line["fit-objective"] = r.fit_objective;
      line["fit-reference"] = r.fit_reference;
      line["kkt-residual"] = r.kkt_residual;
      line["theta-min"] = r.theta_min;
      log << line.dump() << "\n";
    }
    ordered_json val;
    val["sampling-iteration"] = s;
    val["validation-cost"] = result.validation_costs[static_cast<size_t>(s)];
    log << val.dump() << "\n";
  }

  std::cout << "training trajectories: " << result.total_training_trajectories << "\n";
  for (size_t s = 0; s < result.validation_costs.size(); ++s)
    std::cout << "validation cost after sampling iteration " << s << ": "
              << number_text(result.validation_costs[s]) << "\n";

  FqiArtifacts artifacts;
  artifacts.best = result.best;
  artifacts.validation_costs = result.validation_costs;
  artifacts.total_training_trajectories = result.total_training_trajectories;
  return artifacts;
}

ResultRow evaluate_controller(DeskEnv& env, const Controller& controller, const std::vector<std::uint64_t>& seeds,
                              const std::string& method, const std::string& tag, const std::string& split) {
  ResultRow row;
  row.method = method;
  row.tag = tag;
  row.split = split;
  row.costs = rollout_costs(env, controller, seeds);
  return row;
}

void print_row(const ResultRow& row) {
  std::cout << row.method << " [" << row.split << "]: mean cost " << number_text(row.mean_cost()) << " +/- "
            << number_text(row.std_error()) << " (n=" << row.n() << ")\n";
}

std::string model_tag(const ModelBundle& bundle) {
  return bundle.featurizer_id + "-" + to_string(bundle.model.variant) + "-L" +
         std::to_string(bundle.model.levels);
}

}  // namespace

int cmd_generate_data(const ExperimentConfig& config, const OutputPaths& out) {
  ensure_dir(out.dir);
  const auto featurizer = make_featurizer(config.featurizer);
  const std::uint64_t data_seed = sub_seed(config.seed, "data");
  const TrajectoryDataset ds = generate_dataset(config.env, config.data_trajectories, config.data_horizon,
                                                data_seed, *featurizer, config.data_noise_sigma);
  save_dataset(out.dataset(), ds);
  std::cout << "triplets: " << ds.triplet_count() << "\n";
  std::cout << "seed: " << ds.seed << "\n";
  return 0;
}

int cmd_train_dynamics(const ExperimentConfig& config, const std::string& dataset_file, const OutputPaths& out) {
  ensure_dir(out.dir);
  const TrajectoryDataset ds = load_dataset(dataset_file);
  run_dynamics_training(config, ds, out);
  return 0;
}

int cmd_train_fqi(const ExperimentConfig& config, const std::string& model_file, const OutputPaths& out) {
  ensure_dir(out.dir);
  const ModelBundle bundle = load_model(model_file);
  if (bundle.featurizer_id != config.featurizer)
    throw std::runtime_error("model featurizer \"" + bundle.featurizer_id + "\" does not match configured \"" +
                             config.featurizer + "\"");
  run_fqi_training(config, bundle, out);
  return 0;
}

int cmd_evaluate(const ExperimentConfig& config, const EvaluateSpec& spec, const OutputPaths& out) {
  ensure_dir(out.dir);
  SimParams params = config.env;
  params.split = spec.split;
  DeskEnv env(params);
  const std::vector<std::uint64_t> seeds = evaluation_seeds(config);

  ResultRow row;
  if (spec.method == "fqi" || spec.method == "unweighted") {
    const ModelBundle bundle = load_model(spec.model_file);
    const PolicyWeights weights = load_weights(spec.weights_file);
    const auto featurizer = make_featurizer(bundle.featurizer_id);
    const Controller controller =
        make_policy_controller(bundle.model, *featurizer, bundle.standardizer, weights);
    row = evaluate_controller(env, controller, seeds, spec.method, model_tag(bundle), to_string(spec.split));
    if (spec.method == "fqi")
      row.train_trajectories = config.fqi.sampling_iterations * config.fqi.trajectories_per_iteration;
  } else {
    if (!spec.gain) throw std::runtime_error("method " + spec.method + " needs --gain");
    Controller controller;
    if (spec.method == "ibvs")
      controller = make_ibvs_controller(*spec.gain, false);
    else if (spec.method == "ibvs-next")
      controller = make_ibvs_controller(*spec.gain, true);
    else if (spec.method == "pbvs")
      controller = make_pbvs_controller(*spec.gain, false);
    else if (spec.method == "pbvs-next")
      controller = make_pbvs_controller(*spec.gain, true);
    else
      throw std::runtime_error("unknown method: " + spec.method);
    row = evaluate_controller(env, controller, seeds, spec.method, "", to_string(spec.split));
    row.gain = *spec.gain;
  }

  ResultTable table;
  table.rows.push_back(row);
  write_result_table(out.evaluate_csv(spec.method, row.split), out.evaluate_json(spec.method, row.split), table);
  print_row(row);
  return 0;
}

int cmd_compare(const ExperimentConfig& config, const OutputPaths& out) {
  ensure_dir(out.dir);
  const auto featurizer = make_featurizer(config.featurizer);

  const std::uint64_t data_seed = sub_seed(config.seed, "data");
  const TrajectoryDataset ds = generate_dataset(config.env, config.data_trajectories, config.data_horizon,
                                                data_seed, *featurizer, config.data_noise_sigma);
  save_dataset(out.dataset(), ds);
  std::cout << "dataset: " << ds.triplet_count() << " triplets (seed " << ds.seed << ")\n";

  const TrainedDynamics dynamics = run_dynamics_training(config, ds, out);
  const ModelBundle& bundle = dynamics.bundle;

  const FqiArtifacts fqi = run_fqi_training(config, bundle, out);

  DeskEnv env(config.env);
  const PolicyWeights unweighted =
      tune_unweighted_policy(env, bundle.model, *featurizer, bundle.standardizer, config.cem_iterations,
                             config.seed);
  save_weights(out.unweighted_weights(), unweighted);
  std::cout << "unweighted baseline tuned: lambda = [";
  for (int j = 0; j < unweighted.lambda.size(); ++j)
    std::cout << (j ? ", " : "") << number_text(unweighted.lambda[j]);
  std::cout << "]\n";

  const std::vector<std::uint64_t> vseeds = validation_seeds(config);
  struct SweptLaw {
    std::string method;
    bool next = false;
    GainChoice choice;
  };
  std::vector<SweptLaw> laws = {{"ibvs", false, {}}, {"ibvs-next", true, {}}, {"pbvs", false, {}},
                                {"pbvs-next", true, {}}};
  ordered_json gains_json;
  for (SweptLaw& law : laws) {
    const bool ibvs = law.method.rfind("ibvs", 0) == 0;
    law.choice = gain_sweep([&](double gain) {
      const Controller c = ibvs ? make_ibvs_controller(gain, law.next) : make_pbvs_controller(gain, law.next);
      return mean_rollout_cost(env, c, vseeds);
    });
    ordered_json entry;
    entry["gain"] = law.choice.gain;
    entry["validation-cost"] = law.choice.mean_cost;
    gains_json[law.method] = entry;
    std::cout << law.method << " swept gain: " << number_text(law.choice.gain) << " (validation cost "
              << number_text(law.choice.mean_cost) << ")\n";
  }
  open_out(out.gains()) << gains_json.dump(2) << "\n";

  const std::vector<std::uint64_t> seeds = evaluation_seeds(config);
  ResultTable table;
  for (const TargetSplit split : {TargetSplit::Train, TargetSplit::Novel}) {
    SimParams params = config.env;
    params.split = split;
    DeskEnv eval_env(params);
    const std::string split_name = to_string(split);

    const Controller fqi_controller =
        make_policy_controller(bundle.model, *featurizer, bundle.standardizer, fqi.best);
    ResultRow fqi_row =
        evaluate_controller(eval_env, fqi_controller, seeds, "fqi", model_tag(bundle), split_name);
    fqi_row.train_trajectories = fqi.total_training_trajectories;
    table.rows.push_back(fqi_row);

    const Controller unweighted_controller =
        make_policy_controller(bundle.model, *featurizer, bundle.standardizer, unweighted);
    table.rows.push_back(
        evaluate_controller(eval_env, unweighted_controller, seeds, "unweighted", model_tag(bundle), split_name));

    for (const SweptLaw& law : laws) {
      const bool ibvs = law.method.rfind("ibvs", 0) == 0;
      const Controller c =
          ibvs ? make_ibvs_controller(law.choice.gain, law.next) : make_pbvs_controller(law.choice.gain, law.next);
      ResultRow row = evaluate_controller(eval_env, c, seeds, law.method, "", split_name);
      row.gain = law.choice.gain;
      table.rows.push_back(row);
    }
  }

  write_result_table(out.results_csv(), out.results_json(), table);
  for (const ResultRow& row : table.rows) print_row(row);

  // embedded directional checks; a regression here is an experiment failure,
  // not a crash, hence the distinct exit code
  bool ok = true;
  auto mean_of = [&](const std::string& method, const std::string& split) {
    for (const ResultRow& row : table.rows)
      if (row.method == method && row.split == split) return row.mean_cost();
    throw std::runtime_error("missing result row: " + method + " " + split);
  };
  for (const std::string split : {"train", "novel"}) {
    const double fqi_mean = mean_of("fqi", split);
    const double unweighted_mean = mean_of("unweighted", split);
    if (!(fqi_mean <= 0.8 * unweighted_mean)) {
      std::cerr << "check failed [" << split << "]: fqi mean " << number_text(fqi_mean)
                << " exceeds 0.8 x unweighted mean " << number_text(unweighted_mean) << "\n";
      ok = false;
    }
  }
  {
    const double with_next = mean_of("pbvs-next", "train");
    const double without = mean_of("pbvs", "train");
    if (!(with_next <= 0.1 * without)) {
      std::cerr << "check failed: pbvs-next mean " << number_text(with_next)
                << " exceeds 0.1 x pbvs mean " << number_text(without) << "\n";
      ok = false;
    }
  }
  return ok ? 0 : 2;
}

}  // namespace servo
