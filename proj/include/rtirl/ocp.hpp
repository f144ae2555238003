#pragma once

// Parametric economic NMPC problem
//
//   min  lambda(x0) + sum_k gamma^k [ l(x_k, u_k) + slack(sigma_k) ]
//        + gamma^N [ Vf(x_N) + slack(sigma_N) ]
//   s.t. x0 = s, (u0 = a), x_{k+1} = f(x_k, u_k) + c_f,
//        u_lb <= u_k <= u_ub, x_l - sigma_k <= x_k <= x_u + sigma_k, sigma_k >= 0
//
// Decision vector z stores per stage k < N the block (x_k, u_k, sigma_k) and
// ends with (x_N, sigma_N). Inequalities are kept in the ">= 0" form
//   x - x_l + sigma, x_u - x + sigma   (multipliers mu, 4 per stage k = 0..N)
//   u - u_lb, u_ub - u                 (multipliers nu, 4 per stage k < N)
//   sigma                              (multipliers nu, 2 per stage k = 0..N)
// and the Lagrangian is
//   F + chi'G - mu'(bounds) - nu'(control and slack bounds) + zeta'(u0 - a).

#include "rtirl/plant.hpp"
#include "rtirl/theta.hpp"

#include <Eigen/Dense>

#include <optional>

namespace rtirl {

struct OcpSpec {
  int N = 10;
  double gamma = 0.99;
  Vec2 x_s{25.0, 49.74};
  Vec2 u_s{191.71, 215.89};
  Vec2 u_lb{100.0, 100.0};
  Vec2 u_ub{400.0, 400.0};
  Mat2 B_sigma = Mat2::Identity();
  Vec2 b_sigma{1e5, 1e5};
  double Ts = 1.0;
  int substeps = 10;
  PlantConstants plant;  // prediction model, evaluated at nominal disturbances

  void validate() const;
};

/// Index bookkeeping for z, the multipliers and the constraint rows.
class OcpLayout {
 public:
  explicit OcpLayout(int N) : N_(N) {}

  int N() const { return N_; }
  int num_z() const { return 6 * N_ + 4; }
  int x(int k) const { return 6 * k; }
  int u(int k) const { return 6 * k + 2; }
  int sigma(int k) const { return k < N_ ? 6 * k + 4 : 6 * N_ + 2; }

  int num_chi() const { return 2 * (N_ + 1); }
  int num_mu() const { return 4 * (N_ + 1); }
  int num_nu() const { return 4 * N_ + 2 * (N_ + 1); }
  int num_ineq() const { return num_mu() + num_nu(); }
  int num_eq(bool with_action) const { return num_chi() + (with_action ? 2 : 0); }

  // Rows inside mu: lower bounds at 4k, 4k+1; upper bounds at 4k+2, 4k+3.
  int mu_lower(int k) const { return 4 * k; }
  int mu_upper(int k) const { return 4 * k + 2; }
  // Rows inside nu.
  int nu_u_lower(int k) const { return 4 * k; }
  int nu_u_upper(int k) const { return 4 * k + 2; }
  int nu_sigma(int k) const { return 4 * N_ + 2 * k; }

 private:
  int N_;
};

/// Primal trajectory (x_0..x_N, u_0..u_{N-1}, sigma_0..sigma_N).
class DecisionTrajectory {
 public:
  DecisionTrajectory() = default;
  explicit DecisionTrajectory(int N) : N_(N), data_(Eigen::VectorXd::Zero(OcpLayout(N).num_z())) {}
  DecisionTrajectory(int N, Eigen::VectorXd data);

  /// Every state x_s, every control u_s, zero slacks.
  static DecisionTrajectory constant(int N, const Vec2& x, const Vec2& u);

  int N() const { return N_; }
  OcpLayout layout() const { return OcpLayout(N_); }

  auto x(int k) { return data_.segment<2>(layout().x(k)); }
  auto x(int k) const { return data_.segment<2>(layout().x(k)); }
  auto u(int k) { return data_.segment<2>(layout().u(k)); }
  auto u(int k) const { return data_.segment<2>(layout().u(k)); }
  auto sigma(int k) { return data_.segment<2>(layout().sigma(k)); }
  auto sigma(int k) const { return data_.segment<2>(layout().sigma(k)); }

  const Eigen::VectorXd& vec() const { return data_; }
  Eigen::VectorXd& vec() { return data_; }

 private:
  int N_ = 0;
  Eigen::VectorXd data_;
};

/// Full primal-dual point y = (z, chi, mu, nu, zeta).
struct PrimalDual {
  DecisionTrajectory z;
  Eigen::VectorXd chi;
  Eigen::VectorXd mu;
  Eigen::VectorXd nu;
  Eigen::Vector2d zeta = Eigen::Vector2d::Zero();

  PrimalDual() = default;
  explicit PrimalDual(int N);

  /// Steady-state trajectory with zero multipliers.
  static PrimalDual cold_start(const OcpSpec& spec);

  int N() const { return z.N(); }
  /// Stacked (z, chi, mu, nu, zeta).
  Eigen::VectorXd stacked() const;
  void check_dimensions(int N) const;
};

/// Economic stage cost at (x_s, u_s) under nominal disturbances.
double steady_state_cost(const OcpSpec& spec);
/// The untrained parameter: identity Hessians, c_lambda = steady-state cost.
ThetaVector naive_theta(const OcpSpec& spec);

double initial_cost_theta(const ThetaVector& theta, const OcpSpec& spec, const Vec2& x0);
double terminal_cost_theta(const ThetaVector& theta, const OcpSpec& spec, const Vec2& xN);
/// gamma^k (q'B_l q + b_l'q + sigma'B_sigma sigma + b_sigma'sigma), 0 <= k < N.
double stage_cost_theta(const ThetaVector& theta, const OcpSpec& spec, const Vec2& x, const Vec2& u,
                        const Vec2& sigma, int k);
/// gamma^k (sigma'B_sigma sigma + b_sigma'sigma)
double slack_cost(const OcpSpec& spec, const Vec2& sigma, int k);

/// Total objective F(z).
double ocp_cost(const ThetaVector& theta, const OcpSpec& spec, const DecisionTrajectory& z);
Eigen::VectorXd ocp_cost_gradient(const ThetaVector& theta, const OcpSpec& spec, const DecisionTrajectory& z);
/// Constant Hessian of F (block diagonal per stage).
Eigen::MatrixXd ocp_cost_hessian(const ThetaVector& theta, const OcpSpec& spec);

/// F is linear in theta: dF/dtheta at z (packed coordinates).
ThetaVector::Packed ocp_cost_theta_gradient(const OcpSpec& spec, const DecisionTrajectory& z);
/// d(grad_z F)/dtheta at z, num_z x 31.
Eigen::MatrixXd ocp_cost_gradient_theta_jacobian(const OcpSpec& spec, const DecisionTrajectory& z);

/// f(x, u) + c_f with the nominal disturbance.
Vec2 model_step_theta(const ThetaVector& theta, const OcpSpec& spec, const Vec2& x, const Vec2& u);
StepSensitivity model_step_theta_sens(const ThetaVector& theta, const OcpSpec& spec, const Vec2& x, const Vec2& u);

/// Equality residuals G(z) = (x0 - s, f(x_k, u_k) + c_f - x_{k+1}, [u0 - a]).
Eigen::VectorXd equality_residual(const ThetaVector& theta, const OcpSpec& spec, const DecisionTrajectory& z,
                                  const Vec2& s, const std::optional<Vec2>& a);
/// Jacobian of equality_residual.
Eigen::MatrixXd equality_jacobian(const ThetaVector& theta, const OcpSpec& spec, const DecisionTrajectory& z,
                                  bool with_action);
/// Inequality values (mu rows then nu rows), all >= 0 when feasible.
Eigen::VectorXd inequality_values(const ThetaVector& theta, const OcpSpec& spec, const DecisionTrajectory& z);
/// Constant Jacobian of inequality_values.
Eigen::MatrixXd inequality_jacobian(const OcpSpec& spec);

double eval_lagrangian(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& y, const Vec2& s,
                       const std::optional<Vec2>& a);
Eigen::VectorXd grad_lagrangian_z(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& y,
                                  const std::optional<Vec2>& a);
ThetaVector::Packed grad_lagrangian_theta(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& y,
                                          const Vec2& s, const std::optional<Vec2>& a);

class ActiveSetAmbiguous : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KktOptions {
  double active_tol = 1e-8;
  bool require_strict_complementarity = false;
};

/// xi(y): stationarity, equality residuals and the values of the constraints
/// that are active (positive multiplier, tight or violated). Constraints that
/// are tight with a zero multiplier throw ActiveSetAmbiguous when strict
/// complementarity is required.
Eigen::VectorXd kkt_residual(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& y, const Vec2& s,
                             const std::optional<Vec2>& a, const KktOptions& opts = {});

/// max(|xi|_inf, max(-mu), max(-nu)); the SQP stopping measure.
double kkt_error(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& y, const Vec2& s,
                 const std::optional<Vec2>& a);

}  // namespace rtirl
