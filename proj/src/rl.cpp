#include "rtirl/rl.hpp"

#include "rtirl/errors.hpp"

#include <cmath>
#include <deque>
#include <random>

namespace rtirl {

void TdSample::validate() const {
  if (!std::isfinite(cost)) throw NonFiniteError("TD sample cost");
  if (!s.allFinite() || !a.allFinite() || !s_next.allFinite()) throw NonFiniteError("TD sample state or action");
}

UpdateRule parse_update_rule(const std::string& name) {
  if (name == "basic") return UpdateRule::Basic;
  if (name == "fitting") return UpdateRule::Fitting;
  throw ConfigError("unknown update rule '" + name + "' (expected basic or fitting)");
}

std::string to_string(UpdateRule rule) { return rule == UpdateRule::Basic ? "basic" : "fitting"; }

ThetaVector::Packed UpdateScaling::blocks(double B_lambda, double b_lambda, double c_lambda, double B_vf,
                                          double b_vf, double B_l, double b_l, double c_f, double x_l, double x_u) {
  using Off = ThetaVector::Offsets;
  ThetaVector::Packed d;
  d.segment<3>(Off::B_lambda).setConstant(B_lambda);
  d.segment<2>(Off::b_lambda).setConstant(b_lambda);
  d(Off::c_lambda) = c_lambda;
  d.segment<3>(Off::B_vf).setConstant(B_vf);
  d.segment<2>(Off::b_vf).setConstant(b_vf);
  d.segment<10>(Off::B_l).setConstant(B_l);
  d.segment<4>(Off::b_l).setConstant(b_l);
  d.segment<2>(Off::c_f).setConstant(c_f);
  d.segment<2>(Off::x_l).setConstant(x_l);
  d.segment<2>(Off::x_u).setConstant(x_u);
  return d;
}

bool UpdateScaling::is_identity() const { return cost_scale == 1.0 && (theta_scale.array() == 1.0).all(); }

void UpdateScaling::validate() const {
  if (!(cost_scale > 0.0) || !std::isfinite(cost_scale)) throw ConfigError("cost_scale must be positive");
  if (!theta_scale.allFinite() || !(theta_scale.array() >= 0.0).all())
    throw ConfigError("theta scales must be finite and non-negative");
}

void TrainingConfig::validate() const {
  scaling.validate();
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  if (!(explore_std >= 0.0) || !std::isfinite(explore_std)) throw ConfigError("explore_std must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (n_steps < 0) throw ConfigError("n_steps must be >= 0");
  if (td_window < 1) throw ConfigError("td_window must be >= 1");
  if (snapshot_every < 0) throw ConfigError("snapshot_every must be >= 0");
  if (max_consecutive_failures < 1) throw ConfigError("max_consecutive_failures must be >= 1");
}

TdEvaluation evaluate_td(const ThetaVector& theta, const OcpSpec& spec, const TdSample& sample,
                         const TdGuesses& guesses) {
  sample.validate();
  TdEvaluation ev;
  ev.q_ctx = prepare(theta, spec, guesses.q, RtiMode::Q);
  ev.q_out = feedback(ev.q_ctx, sample.s, sample.a);
  ev.v_ctx = prepare(theta, spec, guesses.v, RtiMode::V);
  ev.v_out = feedback(ev.v_ctx, sample.s_next);
  ev.q_value = ev.q_out.value;
  ev.v_next = ev.v_out.value;
  ev.delta = sample.cost + spec.gamma * ev.v_next - ev.q_value;
  if (!std::isfinite(ev.delta)) throw NonFiniteError("TD error");
  ev.degenerate = qp_is_degenerate(ev.q_ctx, ev.q_out);
  ev.qp_iterations = ev.q_out.qp_solution.iterations + ev.v_out.qp_solution.iterations;
  return ev;
}

double td_error(const ThetaVector& theta, const OcpSpec& spec, const TdSample& sample, const TdGuesses& guesses) {
  return evaluate_td(theta, spec, sample, guesses).delta;
}

ThetaVector::Packed basic_step(double delta, const ThetaVector::Packed& grad_q, double alpha,
                               const UpdateScaling& scaling) {
  const double k = scaling.cost_scale;
  const ThetaVector::Packed g = scaling.theta_scale.cwiseProduct(grad_q) / k;
  return scaling.theta_scale.cwiseProduct(alpha * (delta / k) * g);
}

ThetaVector q_update_basic(const ThetaVector& theta, double delta, const ThetaVector::Packed& grad_q, double alpha,
                           const UpdateScaling& scaling) {
  if (!std::isfinite(delta)) throw NonFiniteError("TD error");
  const ThetaVector::Packed raw = theta.pack() + basic_step(delta, grad_q, alpha, scaling);
  if (!raw.allFinite()) throw NonFiniteError("basic update");
  return project_theta(ThetaVector::unpack(raw));
}

ThetaVector::Packed fitting_step(double delta, const ThetaVector::Packed& grad_q, double alpha,
                                 const UpdateScaling& scaling) {
  const double k = scaling.cost_scale;
  const ThetaVector::Packed g = scaling.theta_scale.cwiseProduct(grad_q) / k;
  const ThetaVector::Packed step = (alpha * (delta / k) / (1.0 + alpha * g.squaredNorm())) * g;
  return scaling.theta_scale.cwiseProduct(step);
}

double fitting_gap_bound(const ThetaVector::Packed& grad_q, double alpha, const UpdateScaling& scaling) {
  return alpha * (scaling.theta_scale.cwiseProduct(grad_q) / scaling.cost_scale).squaredNorm();
}

FittingResult q_update_fitting(const ThetaVector& theta, const OcpSpec& spec, const TdSample& sample,
                               const TdGuesses& guesses, double alpha, const ThetaVector::Packed& grad_q,
                               double delta, bool line_search, const UpdateScaling& scaling) {
  if (!std::isfinite(delta)) throw NonFiniteError("TD error");
  const ThetaVector::Packed base = theta.pack();
  ThetaVector::Packed step = fitting_step(delta, grad_q, alpha, scaling);
  if (!step.allFinite()) throw NonFiniteError("fitting update");

  FittingResult res;
  res.theta = project_theta(ThetaVector::unpack(base + step));
  res.dtheta = res.theta.pack() - base;
  if (!line_search) return res;

  constexpr int kMaxHalvings = 10;
  for (int h = 0;; ++h) {
    const double d_new = td_error(res.theta, spec, sample, guesses);
    if (std::abs(d_new) <= std::abs(delta)) {
      res.halvings = h;
      res.delta_after = d_new;
      return res;
    }
    if (h == kMaxHalvings) break;
    step *= 0.5;
    res.theta = project_theta(ThetaVector::unpack(base + step));
    res.dtheta = res.theta.pack() - base;
  }
  res.theta = theta;
  res.dtheta.setZero();
  res.halvings = kMaxHalvings;
  res.line_search_failed = true;
  res.delta_after = delta;
  return res;
}

PolicyGradientResult pg_update(const ThetaVector& theta, const OcpSpec& spec, const Vec2& s, const Vec2& a,
                               double alpha, const PrimalDual& guess, const UpdateScaling& scaling) {
  const RtiContext ctx_v = prepare(theta, spec, guess, RtiMode::V);
  const RtiOutput out_v = feedback(ctx_v, s);
  const RtiContext ctx_q = prepare(theta, spec, guess, RtiMode::Q);
  const RtiOutput out_q = feedback(ctx_q, s, a);

  PolicyGradientResult res;
  res.theta = theta;
  if (qp_is_degenerate(ctx_v, out_v) || qp_is_degenerate(ctx_q, out_q)) {
    res.degenerate = true;
    return res;
  }
  const auto grad_pi = grad_policy_theta(ctx_v, out_v);
  res.gradient = grad_pi.transpose() * grad_q_action(out_q);
  const ThetaVector::Packed& d = scaling.theta_scale;
  const ThetaVector::Packed raw =
      theta.pack() - 0.5 * alpha * d.cwiseProduct(d.cwiseProduct(res.gradient)) / scaling.cost_scale;
  if (!raw.allFinite()) throw NonFiniteError("policy gradient update");
  res.theta = project_theta(ThetaVector::unpack(raw));
  return res;
}

Vec2 epsilon_greedy(const Vec2& pi_s, const TrainingConfig& config, const Vec2& u_lb, const Vec2& u_ub, Rng& rng,
                    bool* explored) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const bool explore = coin(rng) < config.epsilon;
  Vec2 a = pi_s;
  if (explore) {
    std::normal_distribution<double> noise(0.0, config.explore_std);
    for (int i = 0; i < 2; ++i) a(i) += noise(rng);
  }
  if (explored) *explored = explore;
  return a.cwiseMax(u_lb).cwiseMin(u_ub);
}

bool TrainingLog::operator==(const TrainingLog& other) const {
  if (records.size() != other.records.size() || snapshots.size() != other.snapshots.size()) return false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const TrainingRecord& a = records[i];
    const TrainingRecord& b = other.records[i];
    if (a.step != b.step || a.td_error != b.td_error || a.td_error_window_mean != b.td_error_window_mean ||
        a.dtheta_norm != b.dtheta_norm || a.cost != b.cost || a.explored != b.explored ||
        a.qp_iters != b.qp_iters || a.degenerate != b.degenerate || a.failed != b.failed)
      return false;
  }
  for (std::size_t i = 0; i < snapshots.size(); ++i)
    if (snapshots[i].first != other.snapshots[i].first || !(snapshots[i].second == other.snapshots[i].second))
      return false;
  return true;
}

TrainingResult train(const ThetaVector& theta0, const OcpSpec& spec, const TrainingConfig& config,
                     Environment& env) {
  config.validate();
  spec.validate();
  theta0.validate();
  if (config.gamma != spec.gamma) throw ConfigError("training gamma differs from the OCP discount");

  TrainingResult result;
  result.theta = theta0;
  ThetaVector& theta = result.theta;
  Rng rng(config.seed);

  PrimalDual guess = PrimalDual::cold_start(spec);
  Vec2 last_action = spec.u_s;
  std::deque<double> window;
  double window_sum = 0.0;
  int consecutive_failures = 0;

  for (long k = 0; k < config.n_steps; ++k) {
    TrainingRecord rec;
    rec.step = k;
    const Vec2 s = env.state();

    Vec2 a = last_action;
    RtiOutput out_v;
    bool have_policy = false;
    try {
      const RtiContext ctx_v = prepare(theta, spec, guess, RtiMode::V);
      out_v = feedback(ctx_v, s);
      rec.qp_iters += out_v.qp_solution.iterations;
      a = epsilon_greedy(out_v.u0, config, spec.u_lb, spec.u_ub, rng, &rec.explored);
      have_policy = true;
    } catch (const std::runtime_error&) {
      rec.failed = true;
    }

    const Environment::Step step = env.step(a);
    last_action = a;
    rec.cost = step.cost;

    if (have_policy) {
      try {
        TdSample sample{s, a, step.cost, step.x_next, k};
        TdGuesses guesses{guess, shift(out_v.y_qp)};
        const TdEvaluation ev = evaluate_td(theta, spec, sample, guesses);
        rec.td_error = ev.delta;
        rec.degenerate = ev.degenerate;
        rec.qp_iters += ev.qp_iterations;
        guess = ev.v_out.y_qp;

        if (!ev.degenerate) {
          const ThetaVector::Packed grad = grad_q_theta(ev.q_ctx, ev.q_out);
          const ThetaVector::Packed before = theta.pack();
          if (config.update_rule == UpdateRule::Basic) {
            theta = q_update_basic(theta, ev.delta, grad, config.alpha, config.scaling);
          } else {
            theta = q_update_fitting(theta, spec, sample, guesses, config.alpha, grad, ev.delta, config.line_search,
                                     config.scaling)
                        .theta;
          }
          try {
            theta.validate();
          } catch (const std::invalid_argument& e) {
            throw TrainingAborted("training aborted at step " + std::to_string(k) + ": update left theta invalid (" +
                                      e.what() + ")",
                                  k);
          }
          rec.dtheta_norm = (theta.pack() - before).norm();
        }
      } catch (const TrainingAborted&) {
        throw;
      } catch (const std::runtime_error&) {
        rec.failed = true;
      }
    }

    if (rec.failed) {
      guess = PrimalDual::cold_start(spec);
      if (++consecutive_failures >= config.max_consecutive_failures)
        throw TrainingAborted("training aborted at step " + std::to_string(k) + " after " +
                                  std::to_string(consecutive_failures) + " consecutive solver failures",
                              k);
    } else {
      consecutive_failures = 0;
      window.push_back(std::abs(rec.td_error));
      window_sum += window.back();
      if (static_cast<long>(window.size()) > config.td_window) {
        window_sum -= window.front();
        window.pop_front();
      }
    }
    rec.td_error_window_mean = window.empty() ? 0.0 : window_sum / static_cast<double>(window.size());
    result.log.append(rec);
    if (config.snapshot_every > 0 && (k + 1) % config.snapshot_every == 0) result.log.snapshots.emplace_back(k + 1, theta);
  }
  return result;
}

}  // namespace rtirl
