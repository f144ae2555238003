#include "rtirl/sensitivity.hpp"

#include "rtirl/errors.hpp"

#include <algorithm>
#include <cmath>

namespace rtirl {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Off = ThetaVector::Offsets;

namespace {

VectorXd qp_inequality_values(const RtiContext& ctx, const RtiOutput& out) {
  return ctx.qp_template.Ain * out.dz + ctx.qp_template.bin;
}

void check_output(const RtiContext& ctx, const RtiOutput& out, RtiMode expected) {
  if (ctx.mode != expected)
    throw std::invalid_argument(expected == RtiMode::Q ? "expected a Q-mode context" : "expected a V-mode context");
  if (out.dz.size() != ctx.qp_template.H.rows()) throw DimensionMismatch("RTI output does not match context");
}

}  // namespace

bool qp_is_degenerate(const RtiContext& ctx, const RtiOutput& out, double tol) {
  const VectorXd h = qp_inequality_values(ctx, out);
  const VectorXd& m = out.qp_solution.mu_in;
  for (Eigen::Index i = 0; i < h.size(); ++i)
    if (std::abs(h(i)) < tol && m(i) < tol) return true;
  return false;
}

ThetaVector::Packed grad_q_theta(const RtiContext& ctx, const RtiOutput& out) {
  check_output(ctx, out, RtiMode::Q);
  return grad_lagrangian_theta(ctx.theta_snapshot, ctx.spec, out.y_qp, out.s, out.a);
}

ThetaVector::Packed grad_v_theta(const RtiContext& ctx, const RtiOutput& out) {
  check_output(ctx, out, RtiMode::V);
  return grad_lagrangian_theta(ctx.theta_snapshot, ctx.spec, out.y_qp, out.s, std::nullopt);
}

MatrixXd qp_solution_theta_jacobian(const RtiContext& ctx, const RtiOutput& out) {
  const OcpSpec& spec = ctx.spec;
  const OcpLayout L(spec.N);
  const QpProblem& qp = ctx.qp_template;
  const int n = static_cast<int>(qp.H.rows());
  const int me = static_cast<int>(qp.Aeq.rows());
  const VectorXd h = qp_inequality_values(ctx, out);
  const VectorXd& m = out.qp_solution.mu_in;

  std::vector<int> active;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const bool positive = m(i) > kDegeneracyTol;
    if (!positive && std::abs(h(i)) < kDegeneracyTol)
      throw StrictComplementarityViolated("inequality " + std::to_string(i) + " is weakly active");
    if (positive) active.push_back(static_cast<int>(i));
  }
  const int na = static_cast<int>(active.size());
  const int dim = n + me + na;

  MatrixXd K = MatrixXd::Zero(dim, dim);
  K.topLeftCorner(n, n) = qp.H;
  K.block(0, n, n, me) = qp.Aeq.transpose();
  K.block(n, 0, me, n) = qp.Aeq;
  for (int j = 0; j < na; ++j) {
    K.block(0, n + me + j, n, 1) = -qp.Ain.row(active[j]).transpose();
    K.block(n + me + j, 0, 1, n) = qp.Ain.row(active[j]);
  }

  MatrixXd rhs = MatrixXd::Zero(dim, ThetaVector::kSize);
  rhs.topRows(n) = ocp_cost_gradient_theta_jacobian(spec, out.y_qp.z);
  for (int k = 0; k < spec.N; ++k) rhs.block<2, 2>(n + 2 + 2 * k, Off::c_f).setIdentity();
  for (int j = 0; j < na; ++j) {
    const int row = active[j];
    if (row >= L.num_mu()) continue;
    const int within = row % 4;
    if (within < 2)
      rhs(n + me + j, Off::x_l + within) = -1.0;
    else
      rhs(n + me + j, Off::x_u + within - 2) = 1.0;
  }

  Eigen::FullPivLU<MatrixXd> lu(K);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw SingularKkt("active-set KKT matrix is singular (rank " + std::to_string(lu.rank()) +
                                            " of " + std::to_string(dim) + ")");
  const MatrixXd sol = lu.solve(-rhs);
  if (!sol.allFinite()) throw NonFiniteError("policy sensitivity");
  return sol;
}

Eigen::Matrix<double, 2, ThetaVector::kSize> grad_policy_theta(const RtiContext& ctx, const RtiOutput& out) {
  check_output(ctx, out, RtiMode::V);
  const MatrixXd J = qp_solution_theta_jacobian(ctx, out);
  return J.middleRows(OcpLayout(ctx.spec.N).u(0), 2);
}

Vec2 grad_q_action(const RtiOutput& out) {
  if (!out.a) throw std::invalid_argument("grad_q_action needs a Q-mode output");
  return -out.y_qp.zeta;
}

SensitivityBundle compute_sensitivities(const RtiContext& ctx_q, const RtiOutput& out_q, const RtiContext& ctx_v,
                                        const RtiOutput& out_v) {
  SensitivityBundle b;
  b.grad_q_theta = grad_q_theta(ctx_q, out_q);
  b.grad_v_theta = grad_v_theta(ctx_v, out_v);
  b.grad_q_action = grad_q_action(out_q);
  try {
    b.grad_pi_theta = grad_policy_theta(ctx_v, out_v);
  } catch (const StrictComplementarityViolated&) {
    b.strict_complementarity = false;
  }
  return b;
}

FdReport fd_check(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& point, const MatrixXd& analytic,
                  double h, double abs_floor, const std::vector<std::string>& input_names) {
  if (analytic.cols() != point.size()) throw DimensionMismatch("fd_check: analytic Jacobian has wrong column count");
  if (!input_names.empty() && static_cast<Eigen::Index>(input_names.size()) != point.size())
    throw DimensionMismatch("fd_check: wrong number of input names");
  FdReport report;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(point(i)));
    VectorXd plus = point, minus = point;
    plus(i) += step;
    minus(i) -= step;
    const VectorXd fd = (f(plus) - f(minus)) / (2.0 * step);
    if (fd.size() != analytic.rows()) throw DimensionMismatch("fd_check: analytic Jacobian has wrong row count");
    for (Eigen::Index r = 0; r < fd.size(); ++r) {
      FdEntry e;
      e.name = input_names.empty() ? std::to_string(i) : input_names[static_cast<size_t>(i)];
      if (fd.size() > 1) e.name += "[" + std::to_string(r) + "]";
      e.analytic = analytic(r, i);
      e.fd = fd(r);
      e.rel_err = std::abs(e.analytic - e.fd) / std::max({std::abs(e.analytic), std::abs(e.fd), abs_floor});
      report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

FdReport fd_check(const std::function<double(const VectorXd&)>& f, const VectorXd& point,
                  const VectorXd& analytic_gradient, double h, double abs_floor,
                  const std::vector<std::string>& input_names) {
  const auto vf = [&](const VectorXd& p) { return VectorXd::Constant(1, f(p)); };
  return fd_check(vf, point, MatrixXd(analytic_gradient.transpose()), h, abs_floor, input_names);
}

}  // namespace rtirl
