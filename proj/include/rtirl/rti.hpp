#pragma once

#include "rtirl/ocp.hpp"
#include "rtirl/qp.hpp"

#include <optional>
#include <vector>

namespace rtirl {

enum class RtiMode {
  V,  // u0 free: value function and policy
  Q,  // u0 = a embedded: action-value function
};

/// Everything the feedback phase needs, computed before s (and a) are known.
///
/// The QP is posed in the step dz = z - lin_point.z. Its Hessian is the exact
/// (constant) Hessian of the quadratic cost; constraint curvature is ignored.
/// The rows of beq that belong to x0 = s (and u0 = a) hold only the lin_point
/// part and are completed in feedback().
struct RtiContext {
  PrimalDual lin_point;
  QpProblem qp_template;
  double cost_offset = 0.0;  // F(lin_point.z)
  ThetaVector theta_snapshot;
  OcpSpec spec;
  RtiMode mode = RtiMode::V;
};

struct RtiOutput {
  PrimalDual y_qp;   // lin_point + full step, multipliers from the QP
  Eigen::VectorXd dz;
  double value = 0.0;  // cost_offset + QP objective = F(y_qp.z)
  Vec2 u0 = Vec2::Zero();
  QpSolution qp_solution;
  Vec2 s = Vec2::Zero();
  std::optional<Vec2> a;
};

RtiContext prepare(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& guess, RtiMode mode);

/// Solves the single QP and applies the full step. a must be given iff the
/// context is in Q mode.
RtiOutput feedback(const RtiContext& ctx, const Vec2& s, const std::optional<Vec2>& a = std::nullopt,
                   const QpOptions& qp_opts = {});

/// Moves every stage one step earlier and repeats the last one; zeta is reset.
PrimalDual shift(const PrimalDual& y);

class SqpIterationLimit : public std::runtime_error {
 public:
  SqpIterationLimit(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual(last_residual) {}
  double last_residual;
};

struct SqpResult {
  PrimalDual y;
  int iterations = 0;                  // QPs solved
  std::vector<double> residual_history;  // kkt_error before each QP and at exit
};

/// Full-step SQP with the RTI QP until kkt_error <= tol. Starts from the
/// steady-state cold start unless a guess is given.
SqpResult sqp_solve_full(const ThetaVector& theta, const OcpSpec& spec, const Vec2& s, const std::optional<Vec2>& a,
                         double tol = 1e-8, int max_iter = 50, const std::optional<PrimalDual>& guess = std::nullopt);

}  // namespace rtirl
