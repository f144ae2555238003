#include "rtirl/experiment.hpp"

#include "rtirl/errors.hpp"
#include "rtirl/format.hpp"
#include "rtirl/qp.hpp"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace rtirl {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* const kTrainingCsvHeader =
    "step,td_error,td_error_window_mean,dtheta_norm,cost,explored,qp_iters,degenerate";
const char* const kEvaluationCsvHeader =
    "seed,steps,mean_cost,mean_economic_cost,violation_steps,mean_violation,max_violation,solver_failures";
const char* const kTrajectoryCsvHeader = "step,X2,P2,P100,F200,cost,violation";
const char* const kComparisonCsvHeader = "seed,cost_a,cost_b,difference,gain,gain_vs_b";

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// ---- JSON helpers -------------------------------------------------------

void reject_unknown(const json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items())
    if (!keys.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for '" + std::string(key) + "' in " + where);
  }
}

void read_vec2(const json& j, const char* key, Vec2& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError("'" + std::string(key) + "' in " + where + " must be an array of two numbers");
  out = Vec2(v[0].get<double>(), v[1].get<double>());
}

void read_mat2(const json& j, const char* key, Mat2& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  const std::string msg = "'" + std::string(key) + "' in " + where + " must be a 2x2 array";
  if (!v.is_array() || v.size() != 2) throw ConfigError(msg);
  for (int i = 0; i < 2; ++i) {
    if (!v[i].is_array() || v[i].size() != 2 || !v[i][0].is_number() || !v[i][1].is_number()) throw ConfigError(msg);
    out(i, 0) = v[i][0].get<double>();
    out(i, 1) = v[i][1].get<double>();
  }
}

json vec2_json(const Vec2& v) { return json::array({v(0), v(1)}); }

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(base_dir) / path).lexically_normal().string();
}

const char* const kScaleBlocks[] = {"B_lambda", "b_lambda", "c_lambda", "B_vf", "b_vf",
                                    "B_l",      "b_l",      "c_f",      "x_l",  "x_u"};
const int kScaleOffsets[] = {ThetaVector::Offsets::B_lambda, ThetaVector::Offsets::b_lambda,
                             ThetaVector::Offsets::c_lambda, ThetaVector::Offsets::B_vf,
                             ThetaVector::Offsets::b_vf,     ThetaVector::Offsets::B_l,
                             ThetaVector::Offsets::b_l,      ThetaVector::Offsets::c_f,
                             ThetaVector::Offsets::x_l,      ThetaVector::Offsets::x_u};

std::ofstream open_csv(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  return os;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

// ---- configuration ----------------------------------------------------------

void ExperimentConfig::validate() const {
  ocp.validate();
  training.validate();
  if (training.gamma != ocp.gamma) throw ConfigError("training gamma differs from the OCP discount");
  if (evaluation.n_eval_steps < 1) throw ConfigError("n_eval_steps must be >= 1");
  if (evaluation.n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  if (!evaluation.initial_state.allFinite() || !train_initial_state.allFinite())
    throw ConfigError("initial states must be finite");
  if (baseline != "naive") throw ConfigError("unknown baseline '" + baseline + "' (only 'naive' is available)");
  if (!constants_path.empty() && !fs::exists(constants_path))
    throw ConfigError("constants file not found: " + constants_path);
  if (!theta_in.empty() && !fs::exists(theta_in)) throw ConfigError("theta file not found: " + theta_in);
}

ThetaVector ExperimentConfig::baseline_theta() const { return naive_theta(ocp); }

ThetaVector ExperimentConfig::initial_theta() const {
  return theta_in.empty() ? baseline_theta() : load_theta(theta_in);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, {"constants", "theta_in", "out_dir", "baseline", "ocp", "training", "evaluation"}, "config");

  ExperimentConfig c;
  read(j, "constants", c.constants_path, "config");
  read(j, "theta_in", c.theta_in, "config");
  read(j, "out_dir", c.out_dir, "config");
  read(j, "baseline", c.baseline, "config");
  c.constants_path = resolve(base_dir, c.constants_path);
  c.theta_in = resolve(base_dir, c.theta_in);
  c.out_dir = resolve(base_dir, c.out_dir);
  if (!c.constants_path.empty()) {
    if (!fs::exists(c.constants_path)) throw ConfigError("constants file not found: " + c.constants_path);
    c.ocp.plant = PlantConstants::load(c.constants_path);
  }

  if (j.contains("ocp")) {
    const json& o = j.at("ocp");
    const std::string w = "ocp";
    reject_unknown(o, {"N", "gamma", "x_s", "u_s", "u_lb", "u_ub", "B_sigma", "b_sigma", "Ts", "substeps"}, w);
    read(o, "N", c.ocp.N, w);
    read(o, "gamma", c.ocp.gamma, w);
    read_vec2(o, "x_s", c.ocp.x_s, w);
    read_vec2(o, "u_s", c.ocp.u_s, w);
    read_vec2(o, "u_lb", c.ocp.u_lb, w);
    read_vec2(o, "u_ub", c.ocp.u_ub, w);
    read_mat2(o, "B_sigma", c.ocp.B_sigma, w);
    read_vec2(o, "b_sigma", c.ocp.b_sigma, w);
    read(o, "Ts", c.ocp.Ts, w);
    read(o, "substeps", c.ocp.substeps, w);
  }
  c.training.gamma = c.ocp.gamma;
  c.evaluation.initial_state = c.ocp.x_s;
  c.train_initial_state = c.ocp.x_s;

  if (j.contains("training")) {
    const json& t = j.at("training");
    const std::string w = "training";
    reject_unknown(t,
                   {"alpha", "epsilon", "explore_std", "n_steps", "seed", "td_window", "line_search", "update_rule",
                    "snapshot_every", "max_consecutive_failures", "initial_state", "scaling"},
                   w);
    read(t, "alpha", c.training.alpha, w);
    read(t, "epsilon", c.training.epsilon, w);
    read(t, "explore_std", c.training.explore_std, w);
    read(t, "n_steps", c.training.n_steps, w);
    read(t, "seed", c.training.seed, w);
    read(t, "td_window", c.training.td_window, w);
    read(t, "line_search", c.training.line_search, w);
    std::string rule = to_string(c.training.update_rule);
    read(t, "update_rule", rule, w);
    c.training.update_rule = parse_update_rule(rule);
    read(t, "snapshot_every", c.training.snapshot_every, w);
    read(t, "max_consecutive_failures", c.training.max_consecutive_failures, w);
    read_vec2(t, "initial_state", c.train_initial_state, w);
    if (t.contains("scaling")) {
      const json& s = t.at("scaling");
      reject_unknown(s, {"cost_scale", "theta"}, "training.scaling");
      read(s, "cost_scale", c.training.scaling.cost_scale, "training.scaling");
      if (s.contains("theta")) {
        const json& th = s.at("theta");
        reject_unknown(th, std::set<std::string>(std::begin(kScaleBlocks), std::end(kScaleBlocks)),
                       "training.scaling.theta");
        for (int b = 0; b < 10; ++b) {
          if (!th.contains(kScaleBlocks[b])) continue;
          double v = 1.0;
          read(th, kScaleBlocks[b], v, "training.scaling.theta");
          const int begin = kScaleOffsets[b];
          const int end = b + 1 < 10 ? kScaleOffsets[b + 1] : ThetaVector::kSize;
          c.training.scaling.theta_scale.segment(begin, end - begin).setConstant(v);
        }
      }
    }
  }

  if (j.contains("evaluation")) {
    const json& e = j.at("evaluation");
    const std::string w = "evaluation";
    reject_unknown(e, {"n_eval_steps", "n_seeds", "seed", "initial_state", "nominal", "write_trajectories"}, w);
    read(e, "n_eval_steps", c.evaluation.n_eval_steps, w);
    read(e, "n_seeds", c.evaluation.n_seeds, w);
    read(e, "seed", c.evaluation.seed, w);
    read_vec2(e, "initial_state", c.evaluation.initial_state, w);
    read(e, "nominal", c.evaluation.nominal, w);
    read(e, "write_trajectories", c.evaluation.write_trajectories, w);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string dir = fs::path(path).parent_path().string();
  return from_json_text(ss.str(), dir.empty() ? "." : dir);
}

std::string ExperimentConfig::to_json_text() const {
  nlohmann::ordered_json j;
  if (!constants_path.empty()) j["constants"] = constants_path;
  if (!theta_in.empty()) j["theta_in"] = theta_in;
  j["out_dir"] = out_dir;
  j["baseline"] = baseline;
  j["ocp"] = {{"N", ocp.N},
              {"gamma", ocp.gamma},
              {"x_s", vec2_json(ocp.x_s)},
              {"u_s", vec2_json(ocp.u_s)},
              {"u_lb", vec2_json(ocp.u_lb)},
              {"u_ub", vec2_json(ocp.u_ub)},
              {"B_sigma", json::array({vec2_json(ocp.B_sigma.row(0).transpose()),
                                       vec2_json(ocp.B_sigma.row(1).transpose())})},
              {"b_sigma", vec2_json(ocp.b_sigma)},
              {"Ts", ocp.Ts},
              {"substeps", ocp.substeps}};
  nlohmann::ordered_json scale;
  for (int b = 0; b < 10; ++b) scale[kScaleBlocks[b]] = training.scaling.theta_scale(kScaleOffsets[b]);
  j["training"] = {{"alpha", training.alpha},
                   {"epsilon", training.epsilon},
                   {"explore_std", training.explore_std},
                   {"n_steps", training.n_steps},
                   {"seed", training.seed},
                   {"td_window", training.td_window},
                   {"line_search", training.line_search},
                   {"update_rule", to_string(training.update_rule)},
                   {"snapshot_every", training.snapshot_every},
                   {"max_consecutive_failures", training.max_consecutive_failures},
                   {"initial_state", vec2_json(train_initial_state)},
                   {"scaling", {{"cost_scale", training.scaling.cost_scale}, {"theta", scale}}}};
  j["evaluation"] = {{"n_eval_steps", evaluation.n_eval_steps},
                     {"n_seeds", evaluation.n_seeds},
                     {"seed", evaluation.seed},
                     {"initial_state", vec2_json(evaluation.initial_state)},
                     {"nominal", evaluation.nominal},
                     {"write_trajectories", evaluation.write_trajectories}};
  return j.dump(2);
}

// ---- closed-loop evaluation ---------------------------------------------

std::uint64_t evaluation_seed(const EvaluationSettings& eval, int i) {
  return splitmix64(eval.seed + static_cast<std::uint64_t>(i));
}

std::uint64_t training_env_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x5EEDULL); }

EpisodeStats run_episode(const ThetaVector& theta, const OcpSpec& spec, const EvaluationSettings& eval,
                         std::uint64_t env_seed, std::vector<EpisodeStep>* trace) {
  PlantConstants plant = spec.plant;
  if (eval.nominal) plant.dX1 = plant.dF1 = plant.dT1 = plant.dT200 = 0.0;
  const StateBounds bounds;
  Environment env(plant, eval.initial_state, env_seed, spec.Ts, spec.substeps, bounds);

  EpisodeStats st;
  st.seed = env_seed;
  PrimalDual guess = PrimalDual::cold_start(spec);
  Vec2 u = spec.u_s;
  double cost_sum = 0.0, econ_sum = 0.0, viol_sum = 0.0;
  if (trace) trace->clear();

  for (long k = 0; k < eval.n_eval_steps; ++k) {
    const Vec2 s = env.state();
    bool solved = false;
    for (int attempt = 0; attempt < 2 && !solved; ++attempt) {
      try {
        const RtiContext ctx = prepare(theta, spec, guess, RtiMode::V);
        const RtiOutput out = feedback(ctx, s);
        u = out.u0;
        guess = shift(out.y_qp);
        solved = true;
      } catch (const QpError&) {
        guess = PrimalDual::cold_start(spec);
      } catch (const NonFiniteError&) {
        guess = PrimalDual::cold_start(spec);
      }
    }
    if (!solved) ++st.solver_failures;

    const Environment::Step step = env.step(u);
    const double v = bound_violation(s, bounds).sum();
    cost_sum += step.cost;
    econ_sum += economic_cost(plant, s, u, step.disturbance);
    viol_sum += v;
    if (v > 0.0) ++st.violation_steps;
    st.max_violation = std::max(st.max_violation, v);
    if (trace) trace->push_back({k, s, u, step.cost, v});
  }
  st.steps = eval.n_eval_steps;
  const double n = static_cast<double>(st.steps);
  st.mean_cost = cost_sum / n;
  st.mean_economic_cost = econ_sum / n;
  st.mean_violation = viol_sum / n;
  return st;
}

ComparisonSummary compare_thetas(const ThetaVector& a, const ThetaVector& b, const OcpSpec& spec,
                                 const EvaluationSettings& eval) {
  ComparisonSummary sum;
  double total_a = 0.0, total_b = 0.0;
  int positive = 0;
  for (int i = 0; i < eval.n_seeds; ++i) {
    const std::uint64_t seed = evaluation_seed(eval, i);
    ComparisonRow row;
    row.seed = seed;
    row.cost_a = run_episode(a, spec, eval, seed).mean_cost;
    row.cost_b = (a == b) ? row.cost_a : run_episode(b, spec, eval, seed).mean_cost;
    row.difference = row.cost_a - row.cost_b;
    const double mid = 0.5 * (row.cost_a + row.cost_b);
    row.gain = mid != 0.0 ? (row.cost_b - row.cost_a) / mid : 0.0;
    row.gain_vs_b = row.cost_b != 0.0 ? (row.cost_b - row.cost_a) / row.cost_b : 0.0;
    total_a += row.cost_a;
    total_b += row.cost_b;
    if (row.gain > 0.0) ++positive;
    sum.mean_gain += row.gain;
    sum.rows.push_back(row);
  }
  const double n = static_cast<double>(eval.n_seeds);
  sum.mean_gain /= n;
  sum.mean_gain_vs_b = total_b != 0.0 ? (total_b - total_a) / total_b : 0.0;
  sum.fraction_positive = positive / n;
  return sum;
}

// ---- CSV ----------------------------------------------------------------

void write_training_csv(const TrainingLog& log, const std::string& path) {
  std::ofstream os = open_csv(path);
  os << kTrainingCsvHeader << '\n';
  for (const TrainingRecord& r : log.records)
    os << r.step << ',' << format_double(r.td_error) << ',' << format_double(r.td_error_window_mean) << ','
       << format_double(r.dtheta_norm) << ',' << format_double(r.cost) << ',' << (r.explored ? 1 : 0) << ','
       << r.qp_iters << ',' << (r.degenerate ? 1 : 0) << '\n';
}

void write_episode_csv(const std::vector<EpisodeStats>& stats, const std::string& path) {
  std::ofstream os = open_csv(path);
  os << kEvaluationCsvHeader << '\n';
  for (const EpisodeStats& s : stats)
    os << s.seed << ',' << s.steps << ',' << format_double(s.mean_cost) << ',' << format_double(s.mean_economic_cost)
       << ',' << s.violation_steps << ',' << format_double(s.mean_violation) << ',' << format_double(s.max_violation)
       << ',' << s.solver_failures << '\n';
}

void write_trajectory_csv(const std::vector<EpisodeStep>& trace, const std::string& path) {
  std::ofstream os = open_csv(path);
  os << kTrajectoryCsvHeader << '\n';
  for (const EpisodeStep& s : trace)
    os << s.step << ',' << format_double(s.x(0)) << ',' << format_double(s.x(1)) << ',' << format_double(s.u(0))
       << ',' << format_double(s.u(1)) << ',' << format_double(s.cost) << ',' << format_double(s.violation) << '\n';
}

void write_comparison_csv(const ComparisonSummary& summary, const std::string& path) {
  std::ofstream os = open_csv(path);
  os << kComparisonCsvHeader << '\n';
  for (const ComparisonRow& r : summary.rows)
    os << r.seed << ',' << format_double(r.cost_a) << ',' << format_double(r.cost_b) << ','
       << format_double(r.difference) << ',' << format_double(r.gain) << ',' << format_double(r.gain_vs_b) << '\n';
}

// ---- commands -----------------------------------------------------------

namespace {

ExperimentConfig apply_overrides(ExperimentConfig c, const CommandOverrides& ov) {
  if (ov.seed) {
    c.training.seed = *ov.seed;
    c.evaluation.seed = *ov.seed;
  }
  if (ov.out_dir) c.out_dir = *ov.out_dir;
  return c;
}

template <typename F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TrainingAborted& e) {
    log << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NonFiniteError& e) {
    log << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const QpError& e) {
    log << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const SqpIterationLimit& e) {
    log << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

std::string out_path(const ExperimentConfig& c, const std::string& name) {
  return (fs::path(c.out_dir) / name).string();
}

}  // namespace

int cmd_train(const ExperimentConfig& config, const CommandOverrides& ov, std::ostream& log) {
  return guarded(log, [&] {
    const ExperimentConfig c = apply_overrides(config, ov);
    const ThetaVector theta0 = ov.thetas.empty() ? c.initial_theta() : load_theta(ov.thetas.front());
    theta0.validate();
    fs::create_directories(c.out_dir);
    Environment env(c.ocp.plant, c.train_initial_state, training_env_seed(c.training.seed), c.ocp.Ts,
                    c.ocp.substeps);
    log << "training " << c.training.n_steps << " steps, rule " << to_string(c.training.update_rule) << ", seed "
        << c.training.seed << '\n';
    const TrainingResult res = train(theta0, c.ocp, c.training, env);

    save_theta(res.theta, out_path(c, "theta.txt"));
    write_training_csv(res.log, out_path(c, "training_log.csv"));
    if (!res.log.snapshots.empty()) {
      std::ofstream os = open_csv(out_path(c, "theta_snapshots.csv"));
      os << "step";
      for (const auto& n : ThetaVector::names()) os << ',' << n;
      os << '\n';
      for (const auto& [step, th] : res.log.snapshots) {
        os << step;
        const ThetaVector::Packed p = th.pack();
        for (int i = 0; i < ThetaVector::kSize; ++i) os << ',' << format_double(p(i));
        os << '\n';
      }
    }
    if (!res.log.records.empty()) {
      const TrainingRecord& last = res.log.records.back();
      log << "final windowed |td error| " << format_double(last.td_error_window_mean) << '\n';
    }
    log << "wrote " << out_path(c, "theta.txt") << " and " << out_path(c, "training_log.csv") << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_evaluate(const ExperimentConfig& config, const CommandOverrides& ov, std::ostream& log) {
  return guarded(log, [&] {
    const ExperimentConfig c = apply_overrides(config, ov);
    const ThetaVector theta = ov.thetas.empty() ? c.initial_theta() : load_theta(ov.thetas.front());
    theta.validate();
    fs::create_directories(c.out_dir);
    std::vector<EpisodeStats> stats;
    std::vector<EpisodeStep> trace;
    for (int i = 0; i < c.evaluation.n_seeds; ++i) {
      const std::uint64_t seed = evaluation_seed(c.evaluation, i);
      stats.push_back(run_episode(theta, c.ocp, c.evaluation, seed, c.evaluation.write_trajectories ? &trace : nullptr));
      if (c.evaluation.write_trajectories)
        write_trajectory_csv(trace, out_path(c, "trajectory_" + std::to_string(i) + ".csv"));
    }
    write_episode_csv(stats, out_path(c, "evaluation.csv"));

    std::vector<double> cost, econ, viol, vsteps;
    for (const EpisodeStats& s : stats) {
      cost.push_back(s.mean_cost);
      econ.push_back(s.mean_economic_cost);
      viol.push_back(s.mean_violation);
      vsteps.push_back(static_cast<double>(s.violation_steps) / static_cast<double>(s.steps));
    }
    std::ofstream os = open_csv(out_path(c, "evaluation_summary.csv"));
    os << "metric,mean,std\n";
    auto row = [&](const char* name, const std::vector<double>& v) {
      os << name << ',' << format_double(mean_of(v)) << ',' << format_double(std_of(v)) << '\n';
      log << name << ": mean " << format_double(mean_of(v)) << ", std " << format_double(std_of(v)) << '\n';
    };
    row("mean_cost", cost);
    row("mean_economic_cost", econ);
    row("mean_violation", viol);
    row("violation_fraction", vsteps);
    return static_cast<int>(kExitOk);
  });
}

int cmd_compare(const ExperimentConfig& config, const CommandOverrides& ov, std::ostream& log) {
  return guarded(log, [&] {
    const ExperimentConfig c = apply_overrides(config, ov);
    if (ov.thetas.size() > 2) throw ConfigError("compare takes at most two --theta files");
    const ThetaVector a = ov.thetas.empty() ? c.initial_theta() : load_theta(ov.thetas[0]);
    const ThetaVector b = ov.thetas.size() == 2 ? load_theta(ov.thetas[1]) : c.baseline_theta();
    a.validate();
    b.validate();
    fs::create_directories(c.out_dir);
    const ComparisonSummary sum = compare_thetas(a, b, c.ocp, c.evaluation);
    write_comparison_csv(sum, out_path(c, "comparison.csv"));
    log << "mean gain " << format_double(sum.mean_gain) << ", gain vs b " << format_double(sum.mean_gain_vs_b)
        << ", positive on " << format_double(sum.fraction_positive) << " of seeds\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_check(const ExperimentConfig& config, const CommandOverrides& ov, std::ostream& log) {
  return guarded(log, [&] {
    const ExperimentConfig c = apply_overrides(config, ov);
    const std::vector<CheckResult> results = run_checks(c.ocp, ov.only, ov.seed.value_or(0));
    bool all = true;
    for (const CheckResult& r : results) {
      log << (r.passed ? "PASS " : "FAIL ") << r.suite << ": max error " << format_double(r.max_error)
          << " (threshold " << format_double(r.threshold) << ", " << r.samples << " samples) " << r.detail << '\n';
      all = all && r.passed;
    }
    return static_cast<int>(all ? kExitOk : kExitCheckFailed);
  });
}

}  // namespace rtirl
