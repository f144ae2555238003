#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace rtirl {

/// Dense convex QP
///
///   minimize    1/2 z'Hz + g'z
///   subject to  Aeq z + beq  = 0
///               Ain z + bin >= 0
///
/// H must be positive definite on the null space of Aeq and Aeq must have
/// full row rank.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  Eigen::MatrixXd Ain;
  Eigen::VectorXd bin;

  QpProblem() = default;
  /// Allocates an all-zero problem of the given size.
  QpProblem(int n, int me, int mi);

  int num_vars() const { return static_cast<int>(g.size()); }
  int num_eq() const { return static_cast<int>(beq.size()); }
  int num_ineq() const { return static_cast<int>(bin.size()); }

  double objective(const Eigen::VectorXd& z) const;
};

/// Primal-dual solution. Multipliers follow the Lagrangian
///   1/2 z'Hz + g'z + lam_eq'(Aeq z + beq) - mu_in'(Ain z + bin).
struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd lam_eq;
  Eigen::VectorXd mu_in;
  std::vector<int> active_set;  // sorted inequality indices
  double objective = 0.0;
  int iterations = 0;
};

/// Residual blocks of the KKT conditions, all in infinity norm.
struct KktResiduals {
  double stationarity = 0.0;
  double equality = 0.0;
  double inequality = 0.0;  // max violation of Ain z + bin >= 0
  double dual_sign = 0.0;   // max(-mu_in)
  double complementarity = 0.0;

  double max() const;
};

KktResiduals qp_kkt_residuals(const QpProblem& p, const QpSolution& s);

class QpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QpInfeasible : public QpError {
 public:
  using QpError::QpError;
};

class QpNonConvex : public QpError {
 public:
  using QpError::QpError;
};

class QpIterationLimit : public QpError {
 public:
  using QpError::QpError;
};

/// Dimension mismatch or rank-deficient equality constraints.
class QpInvalid : public QpError {
 public:
  using QpError::QpError;
};

struct QpOptions {
  double tol = 1e-8;
  int max_iter = 0;  // 0 selects 10 * (n + me + mi)
  // Re-solve the KKT system of the final active set with one step of
  // iterative refinement; kept only if it stays primal and dual feasible.
  bool polish = true;
};

/// Goldfarb-Idnani dual active-set method.
///
/// The most violated inequality (lowest index on ties) enters the active set;
/// the blocking constraint of a partial step is the one with the smallest
/// ratio, again lowest index on ties. If H is not positive definite but is on
/// the null space of Aeq, the solver works with H + rho Aeq'Aeq, which has
/// the same minimizer and multipliers.
QpSolution solve_qp(const QpProblem& p, const QpOptions& opts = {});

/// Writes a QP as plain-text matrix blocks for offline debugging.
void dump_qp(const QpProblem& p, const std::string& path, const std::string& note = {});

}  // namespace rtirl
