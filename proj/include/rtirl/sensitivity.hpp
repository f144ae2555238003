#pragma once

// Parametric sensitivities of the RTI approximators Q, V and pi. The
// linearization point of the context is treated as independent of theta, so
// every derivative here is a derivative of the QP solved in feedback().

#include "rtirl/rti.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rtirl {

constexpr double kDegeneracyTol = 1e-8;

class StrictComplementarityViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularKkt : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// True when some inequality of the QP is tight (|value| < tol) while its
/// multiplier is below tol as well.
bool qp_is_degenerate(const RtiContext& ctx, const RtiOutput& out, double tol = kDegeneracyTol);

/// grad_theta of the QP Lagrangian at the Q-mode solution.
ThetaVector::Packed grad_q_theta(const RtiContext& ctx, const RtiOutput& out);
/// grad_theta of the QP Lagrangian at the V-mode solution.
ThetaVector::Packed grad_v_theta(const RtiContext& ctx, const RtiOutput& out);

/// d u0 / d theta (2 x 31) of the V-mode QP solution by the implicit function
/// theorem on the active-set KKT system. Throws StrictComplementarityViolated
/// or SingularKkt.
Eigen::Matrix<double, 2, ThetaVector::kSize> grad_policy_theta(const RtiContext& ctx, const RtiOutput& out);

/// Full d(dz, lambda, mu_active)/d theta, exposed for tests.
Eigen::MatrixXd qp_solution_theta_jacobian(const RtiContext& ctx, const RtiOutput& out);

/// dQ/da = -zeta of the Q-mode solution.
Vec2 grad_q_action(const RtiOutput& out);

struct SensitivityBundle {
  ThetaVector::Packed grad_q_theta = ThetaVector::Packed::Zero();
  ThetaVector::Packed grad_v_theta = ThetaVector::Packed::Zero();
  Eigen::Matrix<double, 2, ThetaVector::kSize> grad_pi_theta = Eigen::Matrix<double, 2, ThetaVector::kSize>::Zero();
  Vec2 grad_q_action = Vec2::Zero();
  bool strict_complementarity = true;
};

/// Everything at once from matching Q- and V-mode contexts at the same s.
SensitivityBundle compute_sensitivities(const RtiContext& ctx_q, const RtiOutput& out_q, const RtiContext& ctx_v,
                                        const RtiOutput& out_v);

struct FdEntry {
  std::string name;
  double analytic = 0.0;
  double fd = 0.0;
  double rel_err = 0.0;
};

struct FdReport {
  std::vector<FdEntry> entries;
  double max_rel_err = 0.0;
};

/// Central-difference check of an analytic Jacobian (rows: outputs,
/// columns: inputs). Step for coordinate i is h * max(1, |point_i|).
/// rel_err = |analytic - fd| / max(|analytic|, |fd|, floor) where floor is
/// abs_floor. Names may be empty.
FdReport fd_check(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& point,
                  const Eigen::MatrixXd& analytic, double h = 1e-6, double abs_floor = 1.0,
                  const std::vector<std::string>& input_names = {});

/// Scalar convenience overload.
FdReport fd_check(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& point,
                  const Eigen::VectorXd& analytic_gradient, double h = 1e-6, double abs_floor = 1.0,
                  const std::vector<std::string>& input_names = {});

}  // namespace rtirl
