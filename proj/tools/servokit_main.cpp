#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "servo/cli.hpp"
#include "servo/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"learned visual servoing toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_override;
  std::string dataset_file, model_file, weights_file, method;
  std::optional<double> gain;
  std::string split = "train";

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment configuration JSON")->required();
    cmd->add_option("--seed", seed_override, "master seed (overrides the config)");
    cmd->add_option("--out", out_dir, "output directory (default .)");
  };

  CLI::App* gen = app.add_subcommand("generate-data", "collect a scripted-exploration dataset");
  add_common(gen);
  CLI::App* dyn = app.add_subcommand("train-dynamics", "fit the bilinear feature dynamics model");
  add_common(dyn);
  dyn->add_option("--dataset", dataset_file, "dataset container (default <out>/dataset.svt)");
  CLI::App* fqi = app.add_subcommand("train-fqi", "fit feature weights with fitted Q-iteration");
  add_common(fqi);
  fqi->add_option("--model", model_file, "dynamics model file (default <out>/model.svt)");
  CLI::App* ev = app.add_subcommand("evaluate", "evaluate one method on the seeded test episodes");
  add_common(ev);
  ev->add_option("--method", method, "fqi | unweighted | ibvs | ibvs-next | pbvs | pbvs-next")->required();
  ev->add_option("--model", model_file, "dynamics model file (default <out>/model.svt)");
  ev->add_option("--weights", weights_file, "policy weights file");
  ev->add_option("--gain", gain, "per-step gain for the classical laws");
  ev->add_option("--split", split, "target split: train | novel (default train)");
  CLI::App* cmp = app.add_subcommand("compare", "run the full pipeline and write the comparison table");
  add_common(cmp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    servo::ExperimentConfig config = servo::load_config(config_path);
    if (seed_override) config.seed = *seed_override;
    servo::OutputPaths out;
    out.dir = out_dir;

    if (gen->parsed()) return servo::cmd_generate_data(config, out);
    if (dyn->parsed())
      return servo::cmd_train_dynamics(config, dataset_file.empty() ? out.dataset() : dataset_file, out);
    if (fqi->parsed()) return servo::cmd_train_fqi(config, model_file.empty() ? out.model() : model_file, out);
    if (ev->parsed()) {
      servo::EvaluateSpec spec;
      spec.method = method;
      spec.model_file = model_file.empty() ? out.model() : model_file;
      if (!weights_file.empty())
        spec.weights_file = weights_file;
      else
        spec.weights_file = method == "unweighted" ? out.unweighted_weights() : out.weights();
      spec.gain = gain;
      spec.split = servo::target_split_from_string(split);
      return servo::cmd_evaluate(config, spec, out);
    }
    if (cmp->parsed()) return servo::cmd_compare(config, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
