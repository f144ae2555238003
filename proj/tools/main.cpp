#include "rtirl/errors.hpp"
#include "rtirl/experiment.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"RTI-NMPC reinforcement learning on the evaporator benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> thetas;
  std::string only;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--seed", seed, "Seed for training and evaluation");
    sub->add_option("--out", out_dir, "Output directory");
  };

  CLI::App* train = app.add_subcommand("train", "Run Q-learning and write theta.txt and training_log.csv");
  add_common(train);
  train->add_option("--theta", thetas, "Initial parameter file")->expected(0, 1);

  CLI::App* evaluate = app.add_subcommand("evaluate", "Greedy closed loop over the evaluation seeds");
  add_common(evaluate);
  evaluate->add_option("--theta", thetas, "Parameter file to evaluate")->expected(0, 1);

  CLI::App* compare = app.add_subcommand("compare", "Paired comparison of two parameters");
  add_common(compare);
  compare->add_option("--theta", thetas, "theta_a, then optionally theta_b (default: the baseline)")
      ->expected(0, 2)
      ->take_all();

  CLI::App* check = app.add_subcommand("check", "Run the self-check suites");
  add_common(check);
  check->add_option("--only", only, "Run a single suite: qp, sensitivity, steady_state, sqp");

  CLI11_PARSE(app, argc, argv);

  rtirl::ExperimentConfig config;
  try {
    if (!config_path.empty()) config = rtirl::ExperimentConfig::load(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return rtirl::kExitConfig;
  }

  rtirl::CommandOverrides ov;
  ov.thetas = thetas;
  ov.only = only;
  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) ov.seed = seed;
  if (sub->count("--out")) ov.out_dir = out_dir;

  if (sub == train) return rtirl::cmd_train(config, ov, std::cout);
  if (sub == evaluate) return rtirl::cmd_evaluate(config, ov, std::cout);
  if (sub == compare) return rtirl::cmd_compare(config, ov, std::cout);
  return rtirl::cmd_check(config, ov, std::cout);
}
