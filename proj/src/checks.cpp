#include "rtirl/checks.hpp"

#include "rtirl/errors.hpp"
#include "rtirl/format.hpp"
#include "rtirl/oracles.hpp"
#include "rtirl/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rtirl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Vec2 OperatingBox::sample(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {lower(0) + (upper(0) - lower(0)) * u(rng), lower(1) + (upper(1) - lower(1)) * u(rng)};
}

ThetaVector random_test_theta(const OcpSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto sym = [&](int n, double scale) {
    MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) m(i, j) = m(j, i) = scale * u(rng);
    return m;
  };
  ThetaVector t = naive_theta(spec);
  t.B_lambda = sym(2, 0.1);
  t.b_lambda = Vec2(u(rng), u(rng));
  t.B_vf += sym(2, 0.2);
  t.b_vf = Vec2(u(rng), u(rng));
  t.B_l += sym(4, 0.2);
  for (int i = 0; i < 4; ++i) t.b_l(i) = u(rng);
  t.c_f = 0.05 * Vec2(u(rng), u(rng));
  t.x_l += 0.5 * Vec2(u(rng), u(rng));
  t.x_u += 0.5 * Vec2(u(rng), u(rng));
  return project_theta(t);
}

CheckResult check_qp_oracle(int n_problems, std::uint64_t seed, double tol) {
  CheckResult r{"qp", true, 0.0, tol, 0, ""};
  Rng rng(seed);
  std::uniform_int_distribution<int> dn(1, 6);
  int unsolved = 0;
  for (int t = 0; t < n_problems; ++t) {
    const int n = dn(rng);
    const int me = std::uniform_int_distribution<int>(0, std::max(0, n - 1))(rng);
    const int mi = std::uniform_int_distribution<int>(0, 10)(rng);
    const QpProblem p = oracle::random_convex_qp(rng, n, me, mi);
    const auto ref = oracle::enumerate_active_sets(p);
    if (!ref) {
      ++unsolved;
      continue;
    }
    const QpSolution sol = solve_qp(p);
    const double err = std::abs(sol.objective - ref->objective) / std::max(1.0, std::abs(ref->objective));
    r.max_error = std::max(r.max_error, err);
    ++r.samples;
  }
  r.passed = r.max_error <= tol && unsolved == 0;
  r.detail = std::to_string(r.samples) + " problems";
  if (unsolved > 0) r.detail += ", " + std::to_string(unsolved) + " without an oracle solution";
  return r;
}

namespace {

struct ModeEval {
  double value = 0.0;
  Vec2 u0 = Vec2::Zero();
  std::vector<int> active;
};

ModeEval eval_mode(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& lin, const Vec2& s,
                   const std::optional<Vec2>& a) {
  const RtiContext ctx = prepare(theta, spec, lin, a ? RtiMode::Q : RtiMode::V);
  const RtiOutput out = feedback(ctx, s, a);
  return {out.value, out.u0, out.qp_solution.active_set};
}

}  // namespace

CheckResult check_sensitivity(const OcpSpec& spec, int n_samples, std::uint64_t seed, double tol) {
  CheckResult r{"sensitivity", true, 0.0, tol, 0, ""};
  Rng rng(seed);
  const OperatingBox box;
  std::uniform_real_distribution<double> du(-40.0, 40.0);
  const double h = 1e-4;
  int rejected = 0;
  const int max_attempts = 20 * n_samples;
  double worst[4] = {0.0, 0.0, 0.0, 0.0};

  for (int attempt = 0; attempt < max_attempts && r.samples < n_samples; ++attempt) {
    const ThetaVector theta = random_test_theta(spec, rng);
    const Vec2 s = box.sample(rng);
    Vec2 a = (spec.u_s + Vec2(du(rng), du(rng))).cwiseMax(spec.u_lb).cwiseMin(spec.u_ub);
    PrimalDual lin;
    try {
      lin = shift(sqp_solve_full(theta, spec, s, std::nullopt, 1e-8, 50).y);
    } catch (const std::runtime_error&) {
      ++rejected;
      continue;
    }

    const RtiContext ctx_q = prepare(theta, spec, lin, RtiMode::Q);
    const RtiOutput out_q = feedback(ctx_q, s, a);
    const RtiContext ctx_v = prepare(theta, spec, lin, RtiMode::V);
    const RtiOutput out_v = feedback(ctx_v, s);
    if (qp_is_degenerate(ctx_q, out_q) || qp_is_degenerate(ctx_v, out_v)) {
      ++rejected;
      continue;
    }

    MatrixXd analytic(4, ThetaVector::kSize);
    analytic.row(0) = grad_q_theta(ctx_q, out_q).transpose();
    analytic.row(1) = grad_v_theta(ctx_v, out_v).transpose();
    analytic.bottomRows(2) = grad_policy_theta(ctx_v, out_v);

    bool stable = true;
    auto f = [&](const VectorXd& p) {
      const ThetaVector t = ThetaVector::unpack(p);
      const ModeEval q = eval_mode(t, spec, lin, s, a);
      const ModeEval v = eval_mode(t, spec, lin, s, std::nullopt);
      if (q.active != out_q.qp_solution.active_set || v.active != out_v.qp_solution.active_set) stable = false;
      VectorXd y(4);
      y << q.value, v.value, v.u0;
      return y;
    };
    const FdReport rep = fd_check(f, theta.pack(), analytic, h);

    auto fa = [&](const VectorXd& act) {
      const ModeEval q = eval_mode(theta, spec, lin, s, Vec2(act));
      if (q.active != out_q.qp_solution.active_set) stable = false;
      return VectorXd::Constant(1, q.value);
    };
    const FdReport rep_a = fd_check(fa, VectorXd(a), MatrixXd(grad_q_action(out_q).transpose()), h);
    if (!stable) {
      ++rejected;
      continue;
    }

    for (std::size_t i = 0; i < rep.entries.size(); ++i) {
      const int row = static_cast<int>(i % 4);
      worst[std::min(row, 2)] = std::max(worst[std::min(row, 2)], rep.entries[i].rel_err);
    }
    worst[3] = std::max(worst[3], rep_a.max_rel_err);
    r.max_error = std::max({r.max_error, rep.max_rel_err, rep_a.max_rel_err});
    ++r.samples;
  }
  r.passed = r.samples >= n_samples && r.max_error <= tol;
  r.detail = "Q " + format_double(worst[0]) + ", V " + format_double(worst[1]) + ", pi " + format_double(worst[2]) +
             ", dQ/da " + format_double(worst[3]) + "; " + std::to_string(rejected) + " samples redrawn";
  return r;
}

CheckResult check_steady_state(const OcpSpec& spec, double tol) {
  CheckResult r{"steady_state", true, 0.0, tol, 1, ""};
  try {
    spec.plant.validate();
    const Vec2 x1 = integrate_step(spec.plant, spec.x_s, spec.u_s, spec.plant.nominal(), spec.Ts, spec.substeps);
    r.max_error = (x1 - spec.x_s).lpNorm<Eigen::Infinity>();
    if (!std::isfinite(r.max_error)) r.max_error = std::numeric_limits<double>::infinity();
    r.passed = r.max_error <= tol;
    r.detail = "x+ = (" + format_double(x1(0)) + ", " + format_double(x1(1)) + ")";
  } catch (const std::exception& e) {
    r.passed = false;
    r.max_error = std::numeric_limits<double>::infinity();
    r.detail = e.what();
  }
  return r;
}

CheckResult check_sqp(const OcpSpec& spec, int n_states, std::uint64_t seed, double tol, int max_iter,
                      double grad_tol) {
  CheckResult r{"sqp", true, 0.0, grad_tol, 0, ""};
  Rng rng(seed);
  const OperatingBox box;
  std::uniform_real_distribution<double> du(-40.0, 40.0);
  int worst_iters = 0;
  double worst_kkt = 0.0;
  int failures = 0;
  for (int t = 0; t < n_states; ++t) {
    const ThetaVector theta = random_test_theta(spec, rng);
    const Vec2 s = box.sample(rng);
    const Vec2 a = (spec.u_s + Vec2(du(rng), du(rng))).cwiseMax(spec.u_lb).cwiseMin(spec.u_ub);
    try {
      for (const bool q_mode : {false, true}) {
        const std::optional<Vec2> act = q_mode ? std::optional<Vec2>(a) : std::nullopt;
        const SqpResult res = sqp_solve_full(theta, spec, s, act, tol, max_iter);
        worst_iters = std::max(worst_iters, res.iterations);
        worst_kkt = std::max(worst_kkt, res.residual_history.back());
        if (!q_mode) continue;
        const RtiContext ctx = prepare(theta, spec, res.y, RtiMode::Q);
        const RtiOutput out = feedback(ctx, s, a);
        const ThetaVector::Packed g_rti = grad_q_theta(ctx, out);
        const ThetaVector::Packed g_nlp = grad_lagrangian_theta(theta, spec, res.y, s, a);
        const double err = (g_rti - g_nlp).lpNorm<Eigen::Infinity>() / std::max(1.0, g_nlp.lpNorm<Eigen::Infinity>());
        r.max_error = std::max(r.max_error, err);
      }
      ++r.samples;
    } catch (const SqpIterationLimit& e) {
      ++failures;
      worst_kkt = std::max(worst_kkt, e.last_residual);
    }
  }
  r.passed = failures == 0 && r.max_error <= grad_tol;
  r.detail = "max iterations " + std::to_string(worst_iters) + ", max final KKT " + format_double(worst_kkt) + ", " +
             std::to_string(failures) + " not converged in " + std::to_string(max_iter);
  return r;
}

const std::vector<std::string>& check_suite_names() {
  static const std::vector<std::string> names{"qp", "sensitivity", "steady_state", "sqp"};
  return names;
}

std::vector<CheckResult> run_checks(const OcpSpec& spec, const std::string& only, std::uint64_t seed) {
  const auto& names = check_suite_names();
  if (!only.empty() && std::find(names.begin(), names.end(), only) == names.end())
    throw ConfigError("unknown check suite '" + only + "'");
  std::vector<CheckResult> out;
  auto want = [&](const char* name) { return only.empty() || only == name; };
  if (want("steady_state")) out.push_back(check_steady_state(spec));
  if (want("qp")) out.push_back(check_qp_oracle(200, seed + 1));
  if (want("sensitivity")) out.push_back(check_sensitivity(spec, 50, seed + 2));
  if (want("sqp")) out.push_back(check_sqp(spec, 20, seed + 3));
  return out;
}

}  // namespace rtirl
