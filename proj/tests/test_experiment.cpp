#include "rtirl/errors.hpp"
#include "rtirl/experiment.hpp"
#include "rtirl/format.hpp"

#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rtirl;
namespace fs = std::filesystem;

namespace {

const std::string kDataDir = RTIRL_DATA_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rtirl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c = ExperimentConfig::load(kDataDir + "/../configs/default.json");
  c.out_dir = out.string();
  c.training.n_steps = 30;
  c.training.td_window = 10;
  c.evaluation.n_seeds = 2;
  c.evaluation.n_eval_steps = 40;
  return c;
}

}  // namespace

TEST_CASE("config: defaults and the shipped configuration load") {
  const ExperimentConfig empty = ExperimentConfig::from_json_text("{}");
  CHECK(empty.ocp.N == 10);
  CHECK(empty.training.gamma == empty.ocp.gamma);
  CHECK(empty.baseline == "naive");
  const ExperimentConfig def = ExperimentConfig::load(kDataDir + "/../configs/default.json");
  CHECK(def.training.n_steps == 50000);
  CHECK(def.training.td_window == 10000);
  CHECK(def.training.alpha == 1e-3);
  CHECK(def.training.epsilon == 0.1);
  CHECK(fs::path(def.constants_path).is_absolute() == fs::path(kDataDir).is_absolute());
  CHECK(fs::exists(def.constants_path));
}

TEST_CASE("config: JSON text round trip") {
  const ExperimentConfig a = ExperimentConfig::load(kDataDir + "/../configs/default.json");
  const ExperimentConfig b = ExperimentConfig::from_json_text(a.to_json_text());
  CHECK(b.to_json_text() == a.to_json_text());
  CHECK(b.training.scaling.theta_scale == a.training.scaling.theta_scale);
}

TEST_CASE("config: relative paths resolve against the config directory") {
  const fs::path dir = scratch("cfg_paths");
  fs::copy_file(kDataDir + "/evaporator_constants.json", dir / "k.json");
  {
    std::ofstream os(dir / "c.json");
    os << R"({"constants": "k.json", "out_dir": "out"})";
  }
  const ExperimentConfig c = ExperimentConfig::load((dir / "c.json").string());
  CHECK(fs::equivalent(c.constants_path, dir / "k.json"));
  CHECK(fs::path(c.out_dir).parent_path() == dir);
  fs::remove_all(dir);
}

TEST_CASE("config: malformed input is a ConfigError") {
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"training": {"alpah": 1}})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"training": {"scaling": {"theta": {"c_x": 1}}}})"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"ocp": {"N": "ten"}})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"ocp": {"x_s": [1]}})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"baseline": "tuned"})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"training": {"update_rule": "newton"}})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"constants": "/nonexistent.json"})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"evaluation": {"n_seeds": 0}})"), ConfigError);
}

TEST_CASE("CSV headers have the documented field order") {
  CHECK(std::string(kTrainingCsvHeader) ==
        "step,td_error,td_error_window_mean,dtheta_norm,cost,explored,qp_iters,degenerate");
  CHECK(std::string(kEvaluationCsvHeader) ==
        "seed,steps,mean_cost,mean_economic_cost,violation_steps,mean_violation,max_violation,solver_failures");
  CHECK(std::string(kTrajectoryCsvHeader) == "step,X2,P2,P100,F200,cost,violation");
  CHECK(std::string(kComparisonCsvHeader) == "seed,cost_a,cost_b,difference,gain,gain_vs_b");
}

TEST_CASE("train with zero steps writes a header-only log and returns theta unchanged") {
  const fs::path dir = scratch("train0");
  ExperimentConfig c = small_config(dir);
  c.training.n_steps = 0;
  std::ostringstream log;
  REQUIRE(cmd_train(c, {}, log) == kExitOk);
  CHECK(slurp(dir / "training_log.csv") == std::string(kTrainingCsvHeader) + "\n");
  CHECK(load_theta((dir / "theta.txt").string()) == c.initial_theta());
  fs::remove_all(dir);
}

TEST_CASE("train with a fixed seed is byte-identical across invocations") {
  const fs::path d1 = scratch("train_a"), d2 = scratch("train_b"), d3 = scratch("train_c");
  const ExperimentConfig c = small_config(d1);
  std::ostringstream log;
  CommandOverrides o1, o2, o3;
  o1.out_dir = d1.string();
  o2.out_dir = d2.string();
  o3.out_dir = d3.string();
  o3.seed = 77;
  REQUIRE(cmd_train(c, o1, log) == kExitOk);
  REQUIRE(cmd_train(c, o2, log) == kExitOk);
  REQUIRE(cmd_train(c, o3, log) == kExitOk);
  CHECK(slurp(d1 / "training_log.csv") == slurp(d2 / "training_log.csv"));
  CHECK(slurp(d1 / "theta.txt") == slurp(d2 / "theta.txt"));
  CHECK(slurp(d1 / "training_log.csv") != slurp(d3 / "training_log.csv"));
  for (const auto& d : {d1, d2, d3}) fs::remove_all(d);
}

TEST_CASE("evaluate is deterministic given the seeds") {
  const fs::path d1 = scratch("eval_a"), d2 = scratch("eval_b");
  ExperimentConfig c = small_config(d1);
  c.evaluation.write_trajectories = true;
  std::ostringstream log;
  CommandOverrides o2;
  o2.out_dir = d2.string();
  REQUIRE(cmd_evaluate(c, {}, log) == kExitOk);
  REQUIRE(cmd_evaluate(c, o2, log) == kExitOk);
  CHECK(slurp(d1 / "evaluation.csv") == slurp(d2 / "evaluation.csv"));
  CHECK(slurp(d1 / "trajectory_1.csv") == slurp(d2 / "trajectory_1.csv"));
  CHECK(slurp(d1 / "evaluation_summary.csv").rfind("metric,mean,std\n", 0) == 0);
  for (const auto& d : {d1, d2}) fs::remove_all(d);
}

TEST_CASE("nominal closed loop from the steady state with a consistent theta has no violation") {
  ExperimentConfig c;
  c.evaluation.nominal = true;
  c.evaluation.n_eval_steps = 200;
  ThetaVector th = c.baseline_theta();
  th.c_lambda = steady_state_cost(c.ocp) / (1.0 - c.ocp.gamma);
  const EpisodeStats st = run_episode(th, c.ocp, c.evaluation, 5);
  // The optimum rides the X2 bound, so only rounding-level excursions remain.
  CHECK(st.max_violation <= 1e-10);
  CHECK(st.solver_failures == 0);
  CHECK(st.mean_cost == doctest::Approx(st.mean_economic_cost).epsilon(1e-12));
}

TEST_CASE("compare: identical parameters give zero gain, swapping negates it") {
  ExperimentConfig c;
  c.evaluation.n_seeds = 3;
  c.evaluation.n_eval_steps = 60;
  const ThetaVector a = c.baseline_theta();
  ThetaVector b = a;
  b.x_l(0) = 26.0;
  const ComparisonSummary same = compare_thetas(a, a, c.ocp, c.evaluation);
  for (const ComparisonRow& r : same.rows) {
    CHECK(r.gain == 0.0);
    CHECK(r.difference == 0.0);
  }
  CHECK(same.mean_gain == 0.0);
  const ComparisonSummary ab = compare_thetas(a, b, c.ocp, c.evaluation);
  const ComparisonSummary ba = compare_thetas(b, a, c.ocp, c.evaluation);
  REQUIRE(ab.rows.size() == 3);
  for (std::size_t i = 0; i < ab.rows.size(); ++i) {
    CHECK(ab.rows[i].seed == ba.rows[i].seed);
    CHECK(ab.rows[i].gain == -ba.rows[i].gain);
    CHECK(ab.rows[i].difference == -ba.rows[i].difference);
  }
  CHECK(ab.mean_gain == doctest::Approx(-ba.mean_gain).epsilon(1e-14));
}

TEST_CASE("compare writes one row per seed") {
  const fs::path dir = scratch("compare");
  ExperimentConfig c = small_config(dir);
  const fs::path th = dir / "a.txt";
  save_theta(c.baseline_theta(), th.string());
  CommandOverrides o;
  o.thetas = {th.string(), th.string()};
  std::ostringstream log;
  REQUIRE(cmd_compare(c, o, log) == kExitOk);
  const std::string csv = slurp(dir / "comparison.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + c.evaluation.n_seeds);
  o.thetas.push_back(th.string());
  CHECK(cmd_compare(c, o, log) == kExitConfig);
  fs::remove_all(dir);
}

TEST_CASE("check: steady-state gate and suite filtering") {
  const OcpSpec spec;
  CHECK(check_steady_state(spec).passed);

  const fs::path dir = scratch("constants");
  std::string text = slurp(kDataDir + "/evaporator_constants.json");
  const std::string key = "\"lambda\": 38.5";
  REQUIRE(text.find(key) != std::string::npos);
  text.replace(text.find(key), key.size(), "\"lambda\": 28.5");
  {
    std::ofstream os(dir / "bad.json");
    os << text;
  }
  OcpSpec bad;
  bad.plant = PlantConstants::load((dir / "bad.json").string());
  CHECK_FALSE(check_steady_state(bad).passed);
  fs::remove_all(dir);

  const std::vector<CheckResult> only = run_checks(spec, "steady_state");
  REQUIRE(only.size() == 1);
  CHECK(only[0].suite == "steady_state");
  CHECK_THROWS_AS(run_checks(spec, "bogus"), ConfigError);

  CommandOverrides o;
  o.only = "bogus";
  std::ostringstream log;
  CHECK(cmd_check(ExperimentConfig{}, o, log) == kExitConfig);
  o.only = "qp";
  std::ostringstream log2;
  CHECK(cmd_check(ExperimentConfig{}, o, log2) == kExitOk);
  CHECK(log2.str().rfind("PASS qp", 0) == 0);
}

TEST_CASE("numerical failures map to exit code 3") {
  const fs::path dir = scratch("abort");
  ExperimentConfig c = small_config(dir);
  c.training.max_consecutive_failures = 2;
  ThetaVector th = c.baseline_theta();
  th.c_f << 1e308, -1e308;
  const fs::path tp = dir / "overflow.txt";
  save_theta(th, tp.string());
  CommandOverrides o;
  o.thetas = {tp.string()};
  std::ostringstream log;
  CHECK(cmd_train(c, o, log) == kExitNumerical);
  CHECK(log.str().find("aborted at step 1") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("a diverging unscaled update aborts training with exit code 3") {
  const fs::path dir = scratch("diverge");
  ExperimentConfig c = small_config(dir);
  c.training.scaling = UpdateScaling{};
  c.training.alpha = 1.0;
  std::ostringstream log;
  CHECK(cmd_train(c, {}, log) == kExitNumerical);
  CHECK(log.str().find("numerical error") != std::string::npos);
  fs::remove_all(dir);
}
