#pragma once

// Evaporation process: two states (product concentration X2, operating
// pressure P2), two controls (steam pressure P100, cooling water flow F200)
// and four stochastic inputs (feed concentration X1, feed flow F1, feed
// temperature T1, cooling water inlet temperature T200).

#include "rtirl/errors.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>

namespace rtirl {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Rng = std::mt19937_64;

struct Disturbance {
  double X1 = 0.0;
  double F1 = 0.0;
  double T1 = 0.0;
  double T200 = 0.0;
};

struct PlantConstants {
  double M = 20.0;
  double C = 4.0;
  double UA2 = 6.84;
  double Cp = 0.07;
  double lambda = 38.5;
  double lambda_s = 36.6;
  double F3 = 50.0;
  double a = 0.5616, b = 0.3126, c = 48.43, d = 0.507, e = 55.0, f = 0.1538, g = 90.0, h = 0.16;
  double X1_nom = 5.0, F1_nom = 10.0, T1_nom = 40.0, T200_nom = 25.0;
  // Half-widths of the uniform disturbance intervals.
  double dX1 = 1.0, dF1 = 2.0, dT1 = 8.0, dT200 = 5.0;

  Disturbance nominal() const { return {X1_nom, F1_nom, T1_nom, T200_nom}; }

  /// Throws ConfigError when a physically positive constant is not.
  void validate() const;

  /// Reads the JSON constants file; every key is required.
  static PlantConstants load(const std::string& path);
  void save(const std::string& path) const;
};

struct AlgebraicOutputs {
  double T2, T3, T100, UA1, Q100, Q200, F2, F4, F5, F100;
};

AlgebraicOutputs algebraic_outputs(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d);

/// (dX2/dt, dP2/dt)
Vec2 ode_rhs(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d);

struct RhsJacobian {
  Mat2 dx;
  Mat2 du;
};

RhsJacobian ode_rhs_jacobian(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d);

/// Fixed-step RK4 over Ts with the disturbance held constant.
Vec2 integrate_step(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d, double Ts,
                    int substeps);

struct StepSensitivity {
  Vec2 x_next;
  Mat2 dx;  // d x_next / d x
  Mat2 du;  // d x_next / d u
};

/// integrate_step together with the exact derivative of the discrete RK4 map.
StepSensitivity integrate_step_sens(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d,
                                    double Ts, int substeps);

/// Independent uniform draws on nominal +- half-width.
Disturbance sample_disturbance(const PlantConstants& k, Rng& rng);

struct StateBounds {
  Vec2 lower{25.0, 40.0};
  Vec2 upper{100.0, 80.0};
};

/// 10.09 (F2 + F3) + 600 F100 + 0.6 F200
double economic_cost(const PlantConstants& k, const Vec2& x, const Vec2& u, const Disturbance& d);

/// Componentwise max(0, lower - x, x - upper).
Vec2 bound_violation(const Vec2& x, const StateBounds& bounds);

/// Economic cost plus the violation penalty v'v + 1e5 * 1'v.
double realized_stage_cost(const PlantConstants& k, const Vec2& x, const Vec2& u, const StateBounds& bounds,
                           const Disturbance& d);

/// Stochastic plant: holds the true state and the disturbance RNG.
class Environment {
 public:
  struct Step {
    Vec2 x_next;
    double cost;
    Disturbance disturbance;
  };

  Environment(PlantConstants consts, Vec2 x0, std::uint64_t seed, double Ts = 1.0, int substeps = 10,
              StateBounds bounds = {});

  /// Applies u for one sampling period under a freshly sampled disturbance.
  Step step(const Vec2& u);

  const Vec2& state() const { return x_; }
  void reset(const Vec2& x0) { x_ = x0; }

 private:
  PlantConstants k_;
  Vec2 x_;
  Rng rng_;
  double Ts_;
  int substeps_;
  StateBounds bounds_;
};

}  // namespace rtirl
