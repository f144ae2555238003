#include "rtirl/rti.hpp"

#include <cmath>
#include <stdexcept>

namespace rtirl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

RtiContext prepare(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& guess, RtiMode mode) {
  guess.check_dimensions(spec.N);
  const OcpLayout L(spec.N);
  const bool q_mode = mode == RtiMode::Q;
  const DecisionTrajectory& z = guess.z;

  RtiContext ctx;
  ctx.lin_point = guess;
  if (!q_mode) ctx.lin_point.zeta.setZero();
  ctx.theta_snapshot = theta;
  ctx.spec = spec;
  ctx.mode = mode;
  ctx.cost_offset = ocp_cost(theta, spec, z);

  QpProblem& qp = ctx.qp_template;
  qp.H = ocp_cost_hessian(theta, spec);
  qp.g = ocp_cost_gradient(theta, spec, z);

  const int me = L.num_eq(q_mode);
  qp.Aeq = MatrixXd::Zero(me, L.num_z());
  qp.beq = VectorXd::Zero(me);
  qp.Aeq.block<2, 2>(0, L.x(0)).setIdentity();
  qp.beq.segment<2>(0) = z.x(0);  // - s in feedback
  for (int k = 0; k < spec.N; ++k) {
    const StepSensitivity sens = model_step_theta_sens(theta, spec, z.x(k), z.u(k));
    const int row = 2 + 2 * k;
    qp.Aeq.block<2, 2>(row, L.x(k)) = sens.dx;
    qp.Aeq.block<2, 2>(row, L.u(k)) = sens.du;
    qp.Aeq.block<2, 2>(row, L.x(k + 1)) = -Mat2::Identity();
    qp.beq.segment<2>(row) = sens.x_next - z.x(k + 1);
  }
  if (q_mode) {
    qp.Aeq.block<2, 2>(L.num_chi(), L.u(0)).setIdentity();
    qp.beq.segment<2>(L.num_chi()) = z.u(0);  // - a in feedback
  }

  qp.Ain = inequality_jacobian(spec);
  qp.bin = inequality_values(theta, spec, z);
  return ctx;
}

RtiOutput feedback(const RtiContext& ctx, const Vec2& s, const std::optional<Vec2>& a, const QpOptions& qp_opts) {
  const bool q_mode = ctx.mode == RtiMode::Q;
  if (q_mode != a.has_value())
    throw std::invalid_argument(q_mode ? "Q-mode feedback requires an action" : "V-mode feedback takes no action");
  const OcpLayout L(ctx.spec.N);

  QpProblem qp = ctx.qp_template;
  qp.beq.segment<2>(0) -= s;
  if (q_mode) qp.beq.segment<2>(L.num_chi()) -= *a;

  RtiOutput out;
  out.s = s;
  out.a = a;
  out.qp_solution = solve_qp(qp, qp_opts);
  const QpSolution& sol = out.qp_solution;

  out.dz = sol.z;
  out.y_qp = PrimalDual(ctx.spec.N);
  out.y_qp.z.vec() = ctx.lin_point.z.vec() + sol.z;
  out.y_qp.chi = sol.lam_eq.head(L.num_chi());
  if (q_mode) out.y_qp.zeta = sol.lam_eq.segment<2>(L.num_chi());
  out.y_qp.mu = sol.mu_in.head(L.num_mu());
  out.y_qp.nu = sol.mu_in.tail(L.num_nu());
  out.value = ctx.cost_offset + sol.objective;
  out.u0 = out.y_qp.z.u(0);
  if (!std::isfinite(out.value)) throw NonFiniteError("RTI value");
  return out;
}

PrimalDual shift(const PrimalDual& y) {
  const int N = y.N();
  const OcpLayout L(N);
  PrimalDual out = y;
  for (int k = 0; k < N; ++k) {
    out.z.x(k) = y.z.x(k + 1);
    out.z.sigma(k) = y.z.sigma(k + 1);
    out.chi.segment<2>(2 * k) = y.chi.segment<2>(2 * k + 2);
    out.mu.segment<4>(4 * k) = y.mu.segment<4>(4 * k + 4);
    out.nu.segment<2>(L.nu_sigma(k)) = y.nu.segment<2>(L.nu_sigma(k + 1));
  }
  for (int k = 0; k + 1 < N; ++k) {
    out.z.u(k) = y.z.u(k + 1);
    out.nu.segment<4>(4 * k) = y.nu.segment<4>(4 * k + 4);
  }
  out.zeta.setZero();
  return out;
}

SqpResult sqp_solve_full(const ThetaVector& theta, const OcpSpec& spec, const Vec2& s, const std::optional<Vec2>& a,
                         double tol, int max_iter, const std::optional<PrimalDual>& guess) {
  SqpResult res;
  res.y = guess ? *guess : PrimalDual::cold_start(spec);
  if (!a) res.y.zeta.setZero();
  const RtiMode mode = a ? RtiMode::Q : RtiMode::V;
  for (int it = 0;; ++it) {
    const double err = kkt_error(theta, spec, res.y, s, a);
    res.residual_history.push_back(err);
    if (err <= tol) return res;
    if (it >= max_iter)
      throw SqpIterationLimit("SQP did not converge in " + std::to_string(max_iter) + " iterations", err);
    const RtiContext ctx = prepare(theta, spec, res.y, mode);
    res.y = feedback(ctx, s, a).y_qp;
    res.iterations = it + 1;
  }
}

}  // namespace rtirl
