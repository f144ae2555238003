#pragma once

// Q-learning and deterministic policy gradient on top of the RTI
// approximators Q_theta(s, a), V_theta(s) and pi_theta(s).

#include "rtirl/sensitivity.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rtirl {

struct TdSample {
  Vec2 s = Vec2::Zero();
  Vec2 a = Vec2::Zero();
  double cost = 0.0;
  Vec2 s_next = Vec2::Zero();
  long step_index = 0;

  void validate() const;
};

enum class UpdateRule { Basic, Fitting };

/// Units in which the updates are taken. Updates act on the normalized
/// coordinates theta_i / d_i with TD errors and Q in units of cost_scale:
///   g~ = d .* g / cost_scale,  delta~ = delta / cost_scale,
///   step~ from the update rule,  dtheta = d .* step~.
/// cost_scale = 1 and d = 1 give the plain updates in raw coordinates.
struct UpdateScaling {
  double cost_scale = 1.0;
  ThetaVector::Packed theta_scale = ThetaVector::Packed::Ones();

  /// Per-block scales expanded to the packed layout.
  static ThetaVector::Packed blocks(double B_lambda, double b_lambda, double c_lambda, double B_vf, double b_vf,
                                    double B_l, double b_l, double c_f, double x_l, double x_u);
  bool is_identity() const;
  void validate() const;
};

UpdateRule parse_update_rule(const std::string& name);
std::string to_string(UpdateRule rule);

struct TrainingConfig {
  double alpha = 1e-3;
  double epsilon = 0.1;
  double explore_std = 3.1622776601683795;  // sqrt(10)
  double gamma = 0.99;
  long n_steps = 50000;
  std::uint64_t seed = 0;
  long td_window = 10000;
  bool line_search = false;
  UpdateRule update_rule = UpdateRule::Basic;
  long snapshot_every = 0;  // 0 disables theta snapshots in the log
  int max_consecutive_failures = 5;
  UpdateScaling scaling;

  void validate() const;
};

/// Linearization points used to evaluate the TD error. Both are advanced by
/// the caller; the TD error itself never changes them.
struct TdGuesses {
  PrimalDual q;  // for Q-mode at (s, a)
  PrimalDual v;  // for V-mode at s_next
};

/// One evaluation of delta together with the solver outputs behind it.
struct TdEvaluation {
  double delta = 0.0;
  double q_value = 0.0;
  double v_next = 0.0;
  RtiContext q_ctx;
  RtiOutput q_out;
  RtiContext v_ctx;
  RtiOutput v_out;
  bool degenerate = false;
  int qp_iterations = 0;
};

TdEvaluation evaluate_td(const ThetaVector& theta, const OcpSpec& spec, const TdSample& sample,
                         const TdGuesses& guesses);

/// delta = cost + gamma V(s_next) - Q(s, a), gamma taken from spec.
double td_error(const ThetaVector& theta, const OcpSpec& spec, const TdSample& sample, const TdGuesses& guesses);

/// project(theta + alpha delta grad_q), in the coordinates given by scaling.
ThetaVector q_update_basic(const ThetaVector& theta, double delta, const ThetaVector::Packed& grad_q, double alpha,
                           const UpdateScaling& scaling = {});

/// Raw basic step alpha delta g (before projection), in scaled coordinates.
ThetaVector::Packed basic_step(double delta, const ThetaVector::Packed& grad_q, double alpha,
                               const UpdateScaling& scaling = {});

/// Minimizer of (delta - g'd)^2 + |d|^2 / alpha: d = alpha delta g / (1 + alpha g'g),
/// in scaled coordinates and mapped back to theta.
ThetaVector::Packed fitting_step(double delta, const ThetaVector::Packed& grad_q, double alpha,
                                 const UpdateScaling& scaling = {});

/// alpha |g~|^2, the bound on the relative gap between the basic and fitting steps.
double fitting_gap_bound(const ThetaVector::Packed& grad_q, double alpha, const UpdateScaling& scaling = {});

struct FittingResult {
  ThetaVector theta;
  ThetaVector::Packed dtheta = ThetaVector::Packed::Zero();  // after projection and line search
  int halvings = 0;
  bool line_search_failed = false;
  double delta_after = 0.0;  // recomputed at the sample, only with line search
};

/// Closed-form fitting step followed by projection. With line search the step
/// is halved (at most 10 times) until |delta| at the current sample does not
/// increase; when that fails the step is zero and line_search_failed is set.
FittingResult q_update_fitting(const ThetaVector& theta, const OcpSpec& spec, const TdSample& sample,
                               const TdGuesses& guesses, double alpha, const ThetaVector::Packed& grad_q,
                               double delta, bool line_search, const UpdateScaling& scaling = {});

/// Deterministic policy gradient step: g = grad_pi' grad_a Q at a, then
/// project(theta - (alpha / 2) g).
struct PolicyGradientResult {
  ThetaVector theta;
  ThetaVector::Packed gradient = ThetaVector::Packed::Zero();
  bool degenerate = false;  // no update was made
};

PolicyGradientResult pg_update(const ThetaVector& theta, const OcpSpec& spec, const Vec2& s, const Vec2& a,
                               double alpha, const PrimalDual& guess, const UpdateScaling& scaling = {});

/// sat(pi_s) with probability 1 - epsilon, otherwise sat(pi_s + e) with
/// e ~ N(0, explore_std^2 I). Sets explored when the noise branch is taken.
Vec2 epsilon_greedy(const Vec2& pi_s, const TrainingConfig& config, const Vec2& u_lb, const Vec2& u_ub, Rng& rng,
                    bool* explored = nullptr);

struct TrainingRecord {
  long step = 0;
  double td_error = 0.0;
  double td_error_window_mean = 0.0;  // mean |delta| over the trailing window
  double dtheta_norm = 0.0;
  double cost = 0.0;
  bool explored = false;
  int qp_iters = 0;
  bool degenerate = false;
  bool failed = false;  // solver failure, no update
};

struct TrainingLog {
  std::vector<TrainingRecord> records;
  std::vector<std::pair<long, ThetaVector>> snapshots;

  void append(const TrainingRecord& r) { records.push_back(r); }
  bool operator==(const TrainingLog& other) const;
};

class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, long step) : std::runtime_error(what), step(step) {}
  long step;
};

struct TrainingResult {
  ThetaVector theta;
  TrainingLog log;
};

/// Sequential Q-learning loop. The environment supplies the true state and
/// realized cost; exploration draws use a generator seeded from config.seed.
TrainingResult train(const ThetaVector& theta0, const OcpSpec& spec, const TrainingConfig& config,
                     Environment& env);

}  // namespace rtirl
