#include "rtirl/plant.hpp"

#include "json.hpp"

#include <cassert>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace rtirl {

namespace {

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw NonFiniteError(name);
}

template <class Fn>
void for_each_field(PlantConstants& k, Fn&& fn) {
  fn("M", k.M);
  fn("C", k.C);
  fn("UA2", k.UA2);
  fn("Cp", k.Cp);
  fn("lambda", k.lambda);
  fn("lambda_s", k.lambda_s);
  fn("F3", k.F3);
  fn("a", k.a);
  fn("b", k.b);
  fn("c", k.c);
  fn("d", k.d);
  fn("e", k.e);
  fn("f", k.f);
  fn("g", k.g);
  fn("h", k.h);
  fn("X1_nom", k.X1_nom);
  fn("F1_nom", k.F1_nom);
  fn("T1_nom", k.T1_nom);
  fn("T200_nom", k.T200_nom);
  fn("dX1", k.dX1);
  fn("dF1", k.dF1);
  fn("dT1", k.dT1);
  fn("dT200", k.dT200);
}

}  // namespace

void PlantConstants::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("plant constant must be positive: ") + name);
  };
  positive(M, "M");
  positive(C, "C");
  positive(UA2, "UA2");
  positive(Cp, "Cp");
  positive(lambda, "lambda");
  positive(lambda_s, "lambda_s");
  for (double w : {dX1, dF1, dT1, dT200})
    if (!(w >= 0.0)) throw ConfigError("disturbance half-widths must be non-negative");
}

PlantConstants PlantConstants::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open constants file: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed constants file " + path + ": " + e.what());
  }
  PlantConstants k;
  for_each_field(k, [&](const char* name, double& v) {
    if (!j.contains(name) || !j[name].is_number()) throw ConfigError(std::string("constants file missing ") + name);
    v = j[name].get<double>();
  });
  k.validate();
  return k;
}

void PlantConstants::save(const std::string& path) const {
  nlohmann::ordered_json j;
  PlantConstants copy = *this;
  for_each_field(copy, [&](const char* name, double& v) { j[name] = v; });
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write constants file: " + path);
  os << std::setw(2) << j << "\n";
}

AlgebraicOutputs algebraic_outputs(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d) {
  const double X2 = x(0), P2 = x(1);
  const double P100 = u(0), F200 = u(1);
  AlgebraicOutputs o{};
  o.T2 = k.a * P2 + k.b * X2 + k.c;
  o.T3 = k.d * P2 + k.e;
  o.T100 = k.f * P100 + k.g;
  o.UA1 = k.h * (d.F1 + k.F3);
  o.Q100 = o.UA1 * (o.T100 - o.T2);
  o.F4 = (o.Q100 - d.F1 * k.Cp * (o.T2 - d.T1)) / k.lambda;
  o.F2 = d.F1 - o.F4;
  const double denom = 1.0 + k.UA2 / (2.0 * k.Cp * F200);
  require_finite(denom, "Q200 denominator (F200)");
  if (denom == 0.0) throw NonFiniteError("Q200 denominator is zero");
  o.Q200 = k.UA2 * (o.T3 - d.T200) / denom;
  o.F5 = o.Q200 / k.lambda;
  o.F100 = o.Q100 / k.lambda_s;

  require_finite(o.Q100, "Q100");
  require_finite(o.F4, "F4");
  require_finite(o.Q200, "Q200");
  require_finite(o.F100, "F100");
  assert(o.F2 == d.F1 - o.F4);
  assert(std::abs(k.lambda * o.F5 - o.Q200) <= 4e-16 * (1.0 + std::abs(o.Q200)) * 4.0);
  return o;
}

Vec2 ode_rhs(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d) {
  const AlgebraicOutputs o = algebraic_outputs(k, x, u, d);
  return {(d.F1 * d.X1 - o.F2 * x(0)) / k.M, (o.F4 - o.F5) / k.C};
}

RhsJacobian ode_rhs_jacobian(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d) {
  const AlgebraicOutputs o = algebraic_outputs(k, x, u, d);
  const double X2 = x(0);
  const double F200 = u(1);

  // d/d(X2, P2, P100, F200)
  const double dT2[4] = {k.b, k.a, 0.0, 0.0};
  const double dT3[4] = {0.0, k.d, 0.0, 0.0};
  const double dT100[4] = {0.0, 0.0, k.f, 0.0};
  double dF4[4], dF5[4];
  const double denom = 1.0 + k.UA2 / (2.0 * k.Cp * F200);
  const double ddenom_dF200 = -k.UA2 / (2.0 * k.Cp * F200 * F200);
  for (int i = 0; i < 4; ++i) {
    const double dQ100 = o.UA1 * (dT100[i] - dT2[i]);
    dF4[i] = (dQ100 - d.F1 * k.Cp * dT2[i]) / k.lambda;
    double dQ200 = k.UA2 * dT3[i] / denom;
    if (i == 3) dQ200 -= k.UA2 * (o.T3 - d.T200) * ddenom_dF200 / (denom * denom);
    dF5[i] = dQ200 / k.lambda;
  }

  RhsJacobian J;
  Eigen::Matrix<double, 2, 4> full;
  for (int i = 0; i < 4; ++i) {
    const double dF2 = -dF4[i];
    full(0, i) = -(dF2 * X2 + (i == 0 ? o.F2 : 0.0)) / k.M;
    full(1, i) = (dF4[i] - dF5[i]) / k.C;
  }
  J.dx = full.leftCols<2>();
  J.du = full.rightCols<2>();
  return J;
}

Vec2 integrate_step(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d, double Ts,
                    int substeps) {
  if (!(Ts > 0.0) || substeps < 1) throw std::invalid_argument("integrate_step: Ts > 0 and substeps >= 1 required");
  const double h = Ts / substeps;
  Vec2 xk = x;
  for (int s = 0; s < substeps; ++s) {
    const Vec2 k1 = ode_rhs(k, xk, u, d);
    const Vec2 k2 = ode_rhs(k, xk + 0.5 * h * k1, u, d);
    const Vec2 k3 = ode_rhs(k, xk + 0.5 * h * k2, u, d);
    const Vec2 k4 = ode_rhs(k, xk + h * k3, u, d);
    xk += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!xk.allFinite()) throw NonFiniteError("integrated state");
  return xk;
}

StepSensitivity integrate_step_sens(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d,
                                    double Ts, int substeps) {
  if (!(Ts > 0.0) || substeps < 1) throw std::invalid_argument("integrate_step: Ts > 0 and substeps >= 1 required");
  using Sens = Eigen::Matrix<double, 2, 4>;
  const double h = Ts / substeps;
  Vec2 xk = x;
  Sens S = Sens::Zero();
  S.leftCols<2>().setIdentity();

  // Derivative of one RHS evaluation at xs whose own sensitivity is Ss.
  auto stage = [&](const Vec2& xs, const Sens& Ss, Vec2& val, Sens& dval) {
    val = ode_rhs(k, xs, u, d);
    const RhsJacobian J = ode_rhs_jacobian(k, xs, u, d);
    dval = J.dx * Ss;
    dval.rightCols<2>() += J.du;
  };

  for (int s = 0; s < substeps; ++s) {
    Vec2 k1, k2, k3, k4;
    Sens d1, d2, d3, d4;
    stage(xk, S, k1, d1);
    stage(xk + 0.5 * h * k1, S + 0.5 * h * d1, k2, d2);
    stage(xk + 0.5 * h * k2, S + 0.5 * h * d2, k3, d3);
    stage(xk + h * k3, S + h * d3, k4, d4);
    xk += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    S += (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
  }
  if (!xk.allFinite() || !S.allFinite()) throw NonFiniteError("integrated state or sensitivity");
  return {xk, S.leftCols<2>(), S.rightCols<2>()};
}

Disturbance sample_disturbance(const PlantConstants& k, Rng& rng) {
  auto draw = [&](double nominal, double half) {
    if (half <= 0.0) return nominal;
    std::uniform_real_distribution<double> dist(nominal - half, nominal + half);
    return dist(rng);
  };
  Disturbance d;
  d.X1 = draw(k.X1_nom, k.dX1);
  d.F1 = draw(k.F1_nom, k.dF1);
  d.T1 = draw(k.T1_nom, k.dT1);
  d.T200 = draw(k.T200_nom, k.dT200);
  return d;
}

double economic_cost(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d) {
  const AlgebraicOutputs o = algebraic_outputs(k, x, u, d);
  return 10.09 * (o.F2 + k.F3) + 600.0 * o.F100 + 0.6 * u(1);
}

Vec2 bound_violation(const Vec2& x, const StateBounds& bounds) {
  return (bounds.lower - x).cwiseMax(x - bounds.upper).cwiseMax(0.0);
}

double realized_stage_cost(const PlantConstants& k, const Vec2& x, const Vec2& u, const StateBounds& bounds,
                           const Disturbance& d) {
  const Vec2 v = bound_violation(x, bounds);
  return economic_cost(k, x, u, d) + v.squaredNorm() + 1e5 * v.sum();
}

Environment::Environment(PlantConstants consts, Vec2 x0, std::uint64_t seed, double Ts, int substeps,
                         StateBounds bounds)
    : k_(std::move(consts)), x_(std::move(x0)), rng_(seed), Ts_(Ts), substeps_(substeps), bounds_(bounds) {}

Environment::Step Environment::step(const Vec2& u) {
  const Disturbance d = sample_disturbance(k_, rng_);
  Step s;
  s.cost = realized_stage_cost(k_, x_, u, bounds_, d);
  s.x_next = integrate_step(k_, x_, u, d, Ts_, substeps_);
  s.disturbance = d;
  x_ = s.x_next;
  return s;
}

}  // namespace rtirl
