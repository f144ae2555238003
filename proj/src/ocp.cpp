#include "rtirl/ocp.hpp"

#include <cmath>
#include <stdexcept>

namespace rtirl {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Off = ThetaVector::Offsets;

void OcpSpec::validate() const {
  if (N < 1) throw ConfigError("OCP horizon N must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("OCP discount must lie in (0, 1]");
  if (!(b_sigma.array() > 0.0).all()) throw ConfigError("slack linear penalty must be positive");
  if (!(u_lb.array() < u_ub.array()).all()) throw ConfigError("control bounds require u_lb < u_ub");
  if (!(Ts > 0.0) || substeps < 1) throw ConfigError("sampling time and substeps must be positive");
  if ((B_sigma - B_sigma.transpose()).cwiseAbs().maxCoeff() != 0.0)
    throw ConfigError("slack Hessian must be symmetric");
  plant.validate();
}

DecisionTrajectory::DecisionTrajectory(int N, VectorXd data) : N_(N), data_(std::move(data)) {
  if (data_.size() != OcpLayout(N).num_z()) throw DimensionMismatch("decision trajectory size does not match N");
}

DecisionTrajectory DecisionTrajectory::constant(int N, const Vec2& x, const Vec2& u) {
  DecisionTrajectory z(N);
  for (int k = 0; k <= N; ++k) z.x(k) = x;
  for (int k = 0; k < N; ++k) z.u(k) = u;
  return z;
}

PrimalDual::PrimalDual(int N) : z(N) {
  const OcpLayout L(N);
  chi = VectorXd::Zero(L.num_chi());
  mu = VectorXd::Zero(L.num_mu());
  nu = VectorXd::Zero(L.num_nu());
}

PrimalDual PrimalDual::cold_start(const OcpSpec& spec) {
  PrimalDual y(spec.N);
  y.z = DecisionTrajectory::constant(spec.N, spec.x_s, spec.u_s);
  return y;
}

VectorXd PrimalDual::stacked() const {
  VectorXd v(z.vec().size() + chi.size() + mu.size() + nu.size() + 2);
  v << z.vec(), chi, mu, nu, zeta;
  return v;
}

void PrimalDual::check_dimensions(int N) const {
  const OcpLayout L(N);
  if (z.N() != N || z.vec().size() != L.num_z() || chi.size() != L.num_chi() || mu.size() != L.num_mu() ||
      nu.size() != L.num_nu())
    throw DimensionMismatch("primal-dual point does not match horizon N=" + std::to_string(N));
}

namespace {

double discount(const OcpSpec& spec, int k) { return std::pow(spec.gamma, k); }

Eigen::Vector4d stage_offset(const OcpSpec& spec, const Vec2& x, const Vec2& u) {
  Eigen::Vector4d q;
  q << x - spec.x_s, u - spec.u_s;
  return q;
}

// Packed upper-triangle features of v'Bv: v_i^2 on the diagonal, 2 v_i v_j off it.
template <int D>
void add_sym_features(ThetaVector::Packed& phi, int off, const Eigen::Matrix<double, D, 1>& v, double w) {
  for (int i = 0; i < D; ++i)
    for (int j = i; j < D; ++j) phi(off++) += w * (i == j ? v(i) * v(i) : 2.0 * v(i) * v(j));
}

// Gradient of the features above with respect to z, where v_i = z(idx[i]) - const.
template <int D>
void add_sym_feature_jacobian(MatrixXd& J, int off, const Eigen::Matrix<double, D, 1>& v, const int (&idx)[D],
                              double w) {
  for (int i = 0; i < D; ++i)
    for (int j = i; j < D; ++j, ++off) {
      if (i == j) {
        J(idx[i], off) += w * 2.0 * v(i);
      } else {
        J(idx[i], off) += w * 2.0 * v(j);
        J(idx[j], off) += w * 2.0 * v(i);
      }
    }
}

}  // namespace

double steady_state_cost(const OcpSpec& spec) {
  return economic_cost(spec.plant, spec.x_s, spec.u_s, spec.plant.nominal());
}

ThetaVector naive_theta(const OcpSpec& spec) { return ThetaVector::naive(steady_state_cost(spec)); }

double initial_cost_theta(const ThetaVector& theta, const OcpSpec& spec, const Vec2& x0) {
  const Vec2 p = x0 - spec.x_s;
  return p.dot(theta.B_lambda * p) + theta.b_lambda.dot(p) + theta.c_lambda;
}

double terminal_cost_theta(const ThetaVector& theta, const OcpSpec& spec, const Vec2& xN) {
  const Vec2 p = xN - spec.x_s;
  return discount(spec, spec.N) * (p.dot(theta.B_vf * p) + theta.b_vf.dot(p));
}

double slack_cost(const OcpSpec& spec, const Vec2& sigma, int k) {
  return discount(spec, k) * (sigma.dot(spec.B_sigma * sigma) + spec.b_sigma.dot(sigma));
}

double stage_cost_theta(const ThetaVector& theta, const OcpSpec& spec, const Vec2& x, const Vec2& u,
                        const Vec2& sigma, int k) {
  if (k < 0 || k >= spec.N) throw std::out_of_range("stage index outside [0, N-1]");
  const Eigen::Vector4d q = stage_offset(spec, x, u);
  return discount(spec, k) * (q.dot(theta.B_l * q) + theta.b_l.dot(q)) + slack_cost(spec, sigma, k);
}

double ocp_cost(const ThetaVector& theta, const OcpSpec& spec, const DecisionTrajectory& z) {
  double F = initial_cost_theta(theta, spec, z.x(0));
  for (int k = 0; k < spec.N; ++k) F += stage_cost_theta(theta, spec, z.x(k), z.u(k), z.sigma(k), k);
  F += terminal_cost_theta(theta, spec, z.x(spec.N)) + slack_cost(spec, z.sigma(spec.N), spec.N);
  return F;
}

VectorXd ocp_cost_gradient(const ThetaVector& theta, const OcpSpec& spec, const DecisionTrajectory& z) {
  const OcpLayout L(spec.N);
  VectorXd grad = VectorXd::Zero(L.num_z());
  const Vec2 p0 = z.x(0) - spec.x_s;
  grad.segment<2>(L.x(0)) += 2.0 * theta.B_lambda * p0 + theta.b_lambda;
  for (int k = 0; k <= spec.N; ++k) {
    const double w = discount(spec, k);
    if (k < spec.N) {
      const Eigen::Vector4d gq = w * (2.0 * theta.B_l * stage_offset(spec, z.x(k), z.u(k)) + theta.b_l);
      grad.segment<2>(L.x(k)) += gq.head<2>();
      grad.segment<2>(L.u(k)) += gq.tail<2>();
    } else {
      const Vec2 pN = z.x(k) - spec.x_s;
      grad.segment<2>(L.x(k)) += w * (2.0 * theta.B_vf * pN + theta.b_vf);
    }
    grad.segment<2>(L.sigma(k)) += w * (2.0 * spec.B_sigma * z.sigma(k) + spec.b_sigma);
  }
  return grad;
}

MatrixXd ocp_cost_hessian(const ThetaVector& theta, const OcpSpec& spec) {
  const OcpLayout L(spec.N);
  MatrixXd H = MatrixXd::Zero(L.num_z(), L.num_z());
  H.block<2, 2>(L.x(0), L.x(0)) += 2.0 * theta.B_lambda;
  for (int k = 0; k <= spec.N; ++k) {
    const double w = discount(spec, k);
    if (k < spec.N) {
      // (x_k, u_k) are contiguous.
      H.block<4, 4>(L.x(k), L.x(k)) += 2.0 * w * theta.B_l;
    } else {
      H.block<2, 2>(L.x(k), L.x(k)) += 2.0 * w * theta.B_vf;
    }
    H.block<2, 2>(L.sigma(k), L.sigma(k)) += 2.0 * w * spec.B_sigma;
  }
  return H;
}

ThetaVector::Packed ocp_cost_theta_gradient(const OcpSpec& spec, const DecisionTrajectory& z) {
  ThetaVector::Packed phi = ThetaVector::Packed::Zero();
  const Vec2 p0 = z.x(0) - spec.x_s;
  add_sym_features<2>(phi, Off::B_lambda, p0, 1.0);
  phi.segment<2>(Off::b_lambda) += p0;
  phi(Off::c_lambda) = 1.0;
  for (int k = 0; k < spec.N; ++k) {
    const double w = discount(spec, k);
    const Eigen::Vector4d q = stage_offset(spec, z.x(k), z.u(k));
    add_sym_features<4>(phi, Off::B_l, q, w);
    phi.segment<4>(Off::b_l) += w * q;
  }
  const double wN = discount(spec, spec.N);
  const Vec2 pN = z.x(spec.N) - spec.x_s;
  add_sym_features<2>(phi, Off::B_vf, pN, wN);
  phi.segment<2>(Off::b_vf) += wN * pN;
  return phi;
}

MatrixXd ocp_cost_gradient_theta_jacobian(const OcpSpec& spec, const DecisionTrajectory& z) {
  const OcpLayout L(spec.N);
  MatrixXd J = MatrixXd::Zero(L.num_z(), ThetaVector::kSize);
  {
    const Vec2 p0 = z.x(0) - spec.x_s;
    const int idx[2] = {L.x(0), L.x(0) + 1};
    add_sym_feature_jacobian<2>(J, Off::B_lambda, p0, idx, 1.0);
    J(idx[0], Off::b_lambda) += 1.0;
    J(idx[1], Off::b_lambda + 1) += 1.0;
  }
  for (int k = 0; k < spec.N; ++k) {
    const double w = discount(spec, k);
    const Eigen::Vector4d q = stage_offset(spec, z.x(k), z.u(k));
    const int idx[4] = {L.x(k), L.x(k) + 1, L.u(k), L.u(k) + 1};
    add_sym_feature_jacobian<4>(J, Off::B_l, q, idx, w);
    for (int i = 0; i < 4; ++i) J(idx[i], Off::b_l + i) += w;
  }
  {
    const double wN = discount(spec, spec.N);
    const Vec2 pN = z.x(spec.N) - spec.x_s;
    const int idx[2] = {L.x(spec.N), L.x(spec.N) + 1};
    add_sym_feature_jacobian<2>(J, Off::B_vf, pN, idx, wN);
    J(idx[0], Off::b_vf) += wN;
    J(idx[1], Off::b_vf + 1) += wN;
  }
  return J;
}

Vec2 model_step_theta(const ThetaVector& theta, const OcpSpec& spec, const Vec2& x, const Vec2& u) {
  Vec2 next = integrate_step(spec.plant, x, u, spec.plant.nominal(), spec.Ts, spec.substeps) + theta.c_f;
  if (!next.allFinite()) throw NonFiniteError("model prediction");
  return next;
}

StepSensitivity model_step_theta_sens(const ThetaVector& theta, const OcpSpec& spec, const Vec2& x, const Vec2& u) {
  StepSensitivity s = integrate_step_sens(spec.plant, x, u, spec.plant.nominal(), spec.Ts, spec.substeps);
  s.x_next += theta.c_f;
  if (!s.x_next.allFinite()) throw NonFiniteError("model prediction");
  return s;
}

VectorXd equality_residual(const ThetaVector& theta, const OcpSpec& spec, const DecisionTrajectory& z, const Vec2& s,
                           const std::optional<Vec2>& a) {
  const OcpLayout L(spec.N);
  VectorXd G(L.num_eq(a.has_value()));
  G.segment<2>(0) = z.x(0) - s;
  for (int k = 0; k < spec.N; ++k)
    G.segment<2>(2 + 2 * k) = model_step_theta(theta, spec, z.x(k), z.u(k)) - z.x(k + 1);
  if (a) G.segment<2>(L.num_chi()) = z.u(0) - *a;
  return G;
}

MatrixXd equality_jacobian(const ThetaVector& theta, const OcpSpec& spec, const DecisionTrajectory& z,
                           bool with_action) {
  const OcpLayout L(spec.N);
  MatrixXd J = MatrixXd::Zero(L.num_eq(with_action), L.num_z());
  J.block<2, 2>(0, L.x(0)).setIdentity();
  for (int k = 0; k < spec.N; ++k) {
    const StepSensitivity sens = model_step_theta_sens(theta, spec, z.x(k), z.u(k));
    const int row = 2 + 2 * k;
    J.block<2, 2>(row, L.x(k)) = sens.dx;
    J.block<2, 2>(row, L.u(k)) = sens.du;
    J.block<2, 2>(row, L.x(k + 1)) = -Mat2::Identity();
  }
  if (with_action) J.block<2, 2>(L.num_chi(), L.u(0)).setIdentity();
  return J;
}

VectorXd inequality_values(const ThetaVector& theta, const OcpSpec& spec, const DecisionTrajectory& z) {
  const OcpLayout L(spec.N);
  VectorXd h(L.num_ineq());
  const int nu0 = L.num_mu();
  for (int k = 0; k <= spec.N; ++k) {
    h.segment<2>(L.mu_lower(k)) = z.x(k) - theta.x_l + z.sigma(k);
    h.segment<2>(L.mu_upper(k)) = theta.x_u - z.x(k) + z.sigma(k);
    h.segment<2>(nu0 + L.nu_sigma(k)) = z.sigma(k);
  }
  for (int k = 0; k < spec.N; ++k) {
    h.segment<2>(nu0 + L.nu_u_lower(k)) = z.u(k) - spec.u_lb;
    h.segment<2>(nu0 + L.nu_u_upper(k)) = spec.u_ub - z.u(k);
  }
  return h;
}

MatrixXd inequality_jacobian(const OcpSpec& spec) {
  const OcpLayout L(spec.N);
  MatrixXd J = MatrixXd::Zero(L.num_ineq(), L.num_z());
  const int nu0 = L.num_mu();
  const Mat2 I = Mat2::Identity();
  for (int k = 0; k <= spec.N; ++k) {
    J.block<2, 2>(L.mu_lower(k), L.x(k)) = I;
    J.block<2, 2>(L.mu_lower(k), L.sigma(k)) = I;
    J.block<2, 2>(L.mu_upper(k), L.x(k)) = -I;
    J.block<2, 2>(L.mu_upper(k), L.sigma(k)) = I;
    J.block<2, 2>(nu0 + L.nu_sigma(k), L.sigma(k)) = I;
  }
  for (int k = 0; k < spec.N; ++k) {
    J.block<2, 2>(nu0 + L.nu_u_lower(k), L.u(k)) = I;
    J.block<2, 2>(nu0 + L.nu_u_upper(k), L.u(k)) = -I;
  }
  return J;
}

namespace {

VectorXd stacked_ineq_multipliers(const PrimalDual& y) {
  VectorXd m(y.mu.size() + y.nu.size());
  m << y.mu, y.nu;
  return m;
}

VectorXd stacked_eq_multipliers(const PrimalDual& y, bool with_action) {
  VectorXd m(y.chi.size() + (with_action ? 2 : 0));
  m.head(y.chi.size()) = y.chi;
  if (with_action) m.tail<2>() = y.zeta;
  return m;
}

}  // namespace

double eval_lagrangian(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& y, const Vec2& s,
                       const std::optional<Vec2>& a) {
  y.check_dimensions(spec.N);
  const bool q_mode = a.has_value();
  double Lval = ocp_cost(theta, spec, y.z);
  Lval += stacked_eq_multipliers(y, q_mode).dot(equality_residual(theta, spec, y.z, s, a));
  Lval -= stacked_ineq_multipliers(y).dot(inequality_values(theta, spec, y.z));
  return Lval;
}

VectorXd grad_lagrangian_z(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& y,
                           const std::optional<Vec2>& a) {
  y.check_dimensions(spec.N);
  const bool q_mode = a.has_value();
  VectorXd g = ocp_cost_gradient(theta, spec, y.z);
  g += equality_jacobian(theta, spec, y.z, q_mode).transpose() * stacked_eq_multipliers(y, q_mode);
  g -= inequality_jacobian(spec).transpose() * stacked_ineq_multipliers(y);
  return g;
}

ThetaVector::Packed grad_lagrangian_theta(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& y,
                                          const Vec2& /*s*/, const std::optional<Vec2>& /*a*/) {
  y.check_dimensions(spec.N);
  (void)theta;  // L is affine in theta; the gradient depends on y only.
  const OcpLayout L(spec.N);
  ThetaVector::Packed g = ocp_cost_theta_gradient(spec, y.z);
  for (int k = 0; k < spec.N; ++k) g.segment<2>(Off::c_f) += y.chi.segment<2>(2 + 2 * k);
  for (int k = 0; k <= spec.N; ++k) {
    g.segment<2>(Off::x_l) += y.mu.segment<2>(L.mu_lower(k));
    g.segment<2>(Off::x_u) -= y.mu.segment<2>(L.mu_upper(k));
  }
  return g;
}

VectorXd kkt_residual(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& y, const Vec2& s,
                      const std::optional<Vec2>& a, const KktOptions& opts) {
  const VectorXd stat = grad_lagrangian_z(theta, spec, y, a);
  const VectorXd eq = equality_residual(theta, spec, y.z, s, a);
  const VectorXd h = inequality_values(theta, spec, y.z);
  const VectorXd m = stacked_ineq_multipliers(y);

  std::vector<double> active;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const bool tight = h(i) <= opts.active_tol;
    const bool positive = m(i) > opts.active_tol;
    if (opts.require_strict_complementarity && tight && std::abs(h(i)) <= opts.active_tol && !positive)
      throw ActiveSetAmbiguous("inequality " + std::to_string(i) + " is weakly active");
    if (tight || positive) active.push_back(h(i));
  }
  VectorXd xi(stat.size() + eq.size() + static_cast<Eigen::Index>(active.size()));
  xi << stat, eq, Eigen::Map<const VectorXd>(active.data(), static_cast<Eigen::Index>(active.size()));
  return xi;
}

double kkt_error(const ThetaVector& theta, const OcpSpec& spec, const PrimalDual& y, const Vec2& s,
                 const std::optional<Vec2>& a) {
  const VectorXd xi = kkt_residual(theta, spec, y, s, a);
  double err = xi.size() > 0 ? xi.lpNorm<Eigen::Infinity>() : 0.0;
  if (y.mu.size() > 0) err = std::max(err, -y.mu.minCoeff());
  if (y.nu.size() > 0) err = std::max(err, -y.nu.minCoeff());
  return err;
}

}  // namespace rtirl
