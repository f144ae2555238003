#pragma once

// Experiment configuration and the train / evaluate / compare / check
// commands behind the command-line tool.

#include "rtirl/checks.hpp"
#include "rtirl/rl.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rtirl {

struct EvaluationSettings {
  long n_eval_steps = 2000;
  int n_seeds = 20;
  std::uint64_t seed = 1000;
  Vec2 initial_state{25.0, 49.74};
  bool nominal = false;            // zero-width disturbances
  bool write_trajectories = false;  // per-seed step CSVs
};

/// Everything a run needs. Loaded from JSON; every key is optional and
/// unknown keys are rejected. Relative paths resolve against the config file.
struct ExperimentConfig {
  OcpSpec ocp;
  TrainingConfig training;
  EvaluationSettings evaluation;
  std::string constants_path;  // empty: built-in constants
  std::string theta_in;        // empty: the baseline
  std::string out_dir = "out";
  std::string baseline = "naive";
  Vec2 train_initial_state{25.0, 49.74};

  void validate() const;
  /// theta_in if set, else the baseline parameter.
  ThetaVector initial_theta() const;
  ThetaVector baseline_theta() const;

  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text, const std::string& base_dir = ".");
  std::string to_json_text() const;
};

/// Per-seed outcome of a greedy closed loop.
struct EpisodeStats {
  std::uint64_t seed = 0;
  long steps = 0;
  double mean_cost = 0.0;           // realized stage cost, violation penalty included
  double mean_economic_cost = 0.0;  // economic part only
  long violation_steps = 0;
  double mean_violation = 0.0;  // mean of 1'v
  double max_violation = 0.0;
  long solver_failures = 0;
};

struct EpisodeStep {
  long step = 0;
  Vec2 x = Vec2::Zero();
  Vec2 u = Vec2::Zero();
  double cost = 0.0;
  double violation = 0.0;
};

/// Greedy RTI closed loop on the stochastic plant seeded with env_seed.
EpisodeStats run_episode(const ThetaVector& theta, const OcpSpec& spec, const EvaluationSettings& eval,
                         std::uint64_t env_seed, std::vector<EpisodeStep>* trace = nullptr);

/// Environment seed for evaluation seed index i (shared by every theta).
std::uint64_t evaluation_seed(const EvaluationSettings& eval, int i);
/// Environment seed used by training for a given training seed.
std::uint64_t training_env_seed(std::uint64_t seed);

struct ComparisonRow {
  std::uint64_t seed = 0;
  double cost_a = 0.0;
  double cost_b = 0.0;
  double difference = 0.0;     // cost_a - cost_b
  double gain = 0.0;           // (cost_b - cost_a) / ((cost_a + cost_b) / 2), antisymmetric
  double gain_vs_b = 0.0;      // (cost_b - cost_a) / cost_b
};

struct ComparisonSummary {
  std::vector<ComparisonRow> rows;
  double mean_gain = 0.0;
  double mean_gain_vs_b = 0.0;  // (mean cost_b - mean cost_a) / mean cost_b
  double fraction_positive = 0.0;
};

ComparisonSummary compare_thetas(const ThetaVector& a, const ThetaVector& b, const OcpSpec& spec,
                                 const EvaluationSettings& eval);

/// Exit codes of the commands.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitNumerical = 3 };

/// Command-line overrides applied on top of the configuration.
struct CommandOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::vector<std::string> thetas;
  std::string only;
};

int cmd_train(const ExperimentConfig& config, const CommandOverrides& ov, std::ostream& log);
int cmd_evaluate(const ExperimentConfig& config, const CommandOverrides& ov, std::ostream& log);
int cmd_compare(const ExperimentConfig& config, const CommandOverrides& ov, std::ostream& log);
int cmd_check(const ExperimentConfig& config, const CommandOverrides& ov, std::ostream& log);

/// CSV writers with a fixed header and 17 significant digits.
void write_training_csv(const TrainingLog& log, const std::string& path);
void write_episode_csv(const std::vector<EpisodeStats>& stats, const std::string& path);
void write_trajectory_csv(const std::vector<EpisodeStep>& trace, const std::string& path);
void write_comparison_csv(const ComparisonSummary& summary, const std::string& path);

extern const char* const kTrainingCsvHeader;
extern const char* const kEvaluationCsvHeader;
extern const char* const kTrajectoryCsvHeader;
extern const char* const kComparisonCsvHeader;

}  // namespace rtirl
