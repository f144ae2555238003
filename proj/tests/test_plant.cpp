#include "rtirl/plant.hpp"

#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace rtirl;

namespace {

const Vec2 kXs{25.0, 49.74};
const Vec2 kUs{191.71, 215.89};

// Steady-state chain evaluated independently in double precision from the
// printed model equations and the constants file.
struct HandChain {
  double T2 = 84.178984, T3 = 80.21818, T100 = 119.484998, UA1 = 9.6, Q100 = 338.9377344;
  double F4 = 8.000323262337663, F2 = 1.9996767376623374, Q200 = 307.991998782653;
  double F5 = 7.9997921761728055, F100 = 9.260593836065574;
  double rhs_X2 = 0.0004040779220780166, rhs_P2 = 0.0001327715412142716;
  double stage_cost = 6210.567039922357;
};

Vec2 fd_column(const std::function<Vec2(double)>& f, double h) { return (f(h) - f(-h)) / (2.0 * h); }

}  // namespace

TEST_CASE("algebraic outputs at the steady state match the hand-evaluated chain") {
  const PlantConstants k;
  const AlgebraicOutputs o = algebraic_outputs(k, kXs, kUs, k.nominal());
  const HandChain h;
  CHECK(o.T2 == doctest::Approx(h.T2).epsilon(1e-13));
  CHECK(o.T3 == doctest::Approx(h.T3).epsilon(1e-13));
  CHECK(o.T100 == doctest::Approx(h.T100).epsilon(1e-13));
  CHECK(o.UA1 == doctest::Approx(h.UA1).epsilon(1e-13));
  CHECK(o.Q100 == doctest::Approx(h.Q100).epsilon(1e-13));
  CHECK(o.F4 == doctest::Approx(h.F4).epsilon(1e-13));
  CHECK(o.F2 == doctest::Approx(h.F2).epsilon(1e-12));
  CHECK(o.Q200 == doctest::Approx(h.Q200).epsilon(1e-13));
  CHECK(o.F5 == doctest::Approx(h.F5).epsilon(1e-13));
  CHECK(o.F100 == doctest::Approx(h.F100).epsilon(1e-13));
}

TEST_CASE("algebraic identities hold exactly") {
  const PlantConstants k;
  const AlgebraicOutputs o = algebraic_outputs(k, kXs, kUs, k.nominal());
  CHECK(o.F4 == k.F1_nom - o.F2);
  CHECK(o.Q200 == doctest::Approx(k.lambda * o.F5).epsilon(1e-15));
  CHECK(o.F100 == doctest::Approx(o.Q100 / k.lambda_s).epsilon(1e-15));
}

TEST_CASE("steady-state gate on the ODE right-hand side") {
  const PlantConstants k;
  const Vec2 r = ode_rhs(k, kXs, kUs, k.nominal());
  const HandChain h;
  CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-1);
  CHECK(r(0) == doctest::Approx(h.rhs_X2).epsilon(1e-8));
  CHECK(r(1) == doctest::Approx(h.rhs_P2).epsilon(1e-8));
}

TEST_CASE("doubling M halves the X2 derivative") {
  PlantConstants k;
  const Vec2 x(26.0, 50.0), u(200.0, 210.0);
  const Vec2 r1 = ode_rhs(k, x, u, k.nominal());
  k.M *= 2.0;
  const Vec2 r2 = ode_rhs(k, x, u, k.nominal());
  CHECK(r2(0) == doctest::Approx(0.5 * r1(0)).epsilon(1e-14));
  CHECK(r2(1) == r1(1));
}

TEST_CASE("ODE Jacobian matches central differences") {
  const PlantConstants k;
  Rng rng(3);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const Vec2 x(24.0 + 4.0 * u01(rng), 45.0 + 10.0 * u01(rng));
    const Vec2 u(150.0 + 100.0 * u01(rng), 150.0 + 100.0 * u01(rng));
    const Disturbance d = sample_disturbance(k, rng);
    const RhsJacobian J = ode_rhs_jacobian(k, x, u, d);
    for (int j = 0; j < 2; ++j) {
      const Vec2 cx = fd_column([&](double h) { Vec2 xx = x; xx(j) += h; return ode_rhs(k, xx, u, d); }, 1e-6);
      const Vec2 cu = fd_column([&](double h) { Vec2 uu = u; uu(j) += h; return ode_rhs(k, x, uu, d); }, 1e-6);
      for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(J.dx(i, j) - cx(i)) <= 1e-5 * std::max(1.0, std::abs(cx(i))));
        CHECK(std::abs(J.du(i, j) - cu(i)) <= 1e-5 * std::max(1.0, std::abs(cu(i))));
      }
    }
  }
}

TEST_CASE("integrate_step: tiny Ts returns x") {
  const PlantConstants k;
  const Vec2 x(26.0, 51.0);
  const Vec2 x1 = integrate_step(k, x, kUs, k.nominal(), 1e-12, 10);
  CHECK((x1 - x).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("integrate_step: steady state maps to itself") {
  const PlantConstants k;
  const Vec2 x1 = integrate_step(k, kXs, kUs, k.nominal(), 1.0, 10);
  CHECK((x1 - kXs).lpNorm<Eigen::Infinity>() <= 1e-3);
}

TEST_CASE("integrate_step: substep halving changes the result by less than 1e-8") {
  const PlantConstants k;
  const Vec2 a = integrate_step(k, kXs, kUs, k.nominal(), 1.0, 10);
  const Vec2 b = integrate_step(k, kXs, kUs, k.nominal(), 1.0, 20);
  CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("property: RK4 global error shrinks about 16x when substeps double") {
  const PlantConstants k;
  const Vec2 x0(27.0, 47.0), u(230.0, 180.0);
  auto trajectory = [&](double Ts, int substeps) {
    Vec2 x = x0;
    for (int i = 0; i < 10; ++i) x = integrate_step(k, x, u, k.nominal(), Ts, substeps);
    return x;
  };
  // Coarse substeps so the truncation error dominates rounding.
  const double Ts = 4.0;
  const Vec2 ref = trajectory(Ts, 512);
  const double e1 = (trajectory(Ts, 2) - ref).norm();
  const double e2 = (trajectory(Ts, 4) - ref).norm();
  const double ratio = e1 / e2;
  CHECK(ratio >= 16.0 * 0.8);
  CHECK(ratio <= 16.0 * 1.2);
}

TEST_CASE("step sensitivity matches central differences of integrate_step") {
  const PlantConstants k;
  const Vec2 x(26.0, 48.0), u(210.0, 230.0);
  const StepSensitivity s = integrate_step_sens(k, x, u, k.nominal(), 1.0, 10);
  CHECK(s.x_next == integrate_step(k, x, u, k.nominal(), 1.0, 10));
  for (int j = 0; j < 2; ++j) {
    const Vec2 cx = fd_column(
        [&](double h) { Vec2 xx = x; xx(j) += h; return integrate_step(k, xx, u, k.nominal(), 1.0, 10); }, 1e-6);
    const Vec2 cu = fd_column(
        [&](double h) { Vec2 uu = u; uu(j) += h; return integrate_step(k, x, uu, k.nominal(), 1.0, 10); }, 1e-6);
    for (int i = 0; i < 2; ++i) {
      CHECK(s.dx(i, j) == doctest::Approx(cx(i)).epsilon(1e-6).scale(1.0));
      CHECK(s.du(i, j) == doctest::Approx(cu(i)).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("disturbances: zero-width intervals give the nominal values") {
  PlantConstants k;
  k.dX1 = k.dF1 = k.dT1 = k.dT200 = 0.0;
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Disturbance d = sample_disturbance(k, rng);
    CHECK(d.X1 == k.X1_nom);
    CHECK(d.F1 == k.F1_nom);
    CHECK(d.T1 == k.T1_nom);
    CHECK(d.T200 == k.T200_nom);
  }
}

TEST_CASE("disturbances: range and mean over 1e5 draws") {
  const PlantConstants k;
  Rng rng(12345);
  const int n = 100000;
  double lo[4] = {1e300, 1e300, 1e300, 1e300}, hi[4] = {-1e300, -1e300, -1e300, -1e300}, sum[4] = {0, 0, 0, 0};
  for (int i = 0; i < n; ++i) {
    const Disturbance d = sample_disturbance(k, rng);
    const double v[4] = {d.X1, d.F1, d.T1, d.T200};
    for (int j = 0; j < 4; ++j) {
      lo[j] = std::min(lo[j], v[j]);
      hi[j] = std::max(hi[j], v[j]);
      sum[j] += v[j];
    }
  }
  const double nom[4] = {k.X1_nom, k.F1_nom, k.T1_nom, k.T200_nom};
  const double half[4] = {k.dX1, k.dF1, k.dT1, k.dT200};
  for (int j = 0; j < 4; ++j) {
    CHECK(lo[j] >= nom[j] - half[j]);
    CHECK(hi[j] <= nom[j] + half[j]);
    CHECK(std::abs(sum[j] / n - nom[j]) <= 0.01 * nom[j]);
  }
}

TEST_CASE("realized stage cost") {
  const PlantConstants k;
  const StateBounds bounds;
  SUBCASE("steady state equals the hand-evaluated economic cost") {
    CHECK(realized_stage_cost(k, kXs, kUs, bounds, k.nominal()) == doctest::Approx(HandChain{}.stage_cost).epsilon(1e-13));
  }
  SUBCASE("interior state carries no penalty") {
    const Vec2 x(30.0, 50.0);
    CHECK(realized_stage_cost(k, x, kUs, bounds, k.nominal()) == economic_cost(k, x, kUs, k.nominal()));
    CHECK(bound_violation(x, bounds) == Vec2::Zero());
  }
  SUBCASE("X2 = 24 adds 1e5 + 1") {
    const Vec2 x(24.0, 50.0);
    const double extra = realized_stage_cost(k, x, kUs, bounds, k.nominal()) - economic_cost(k, x, kUs, k.nominal());
    CHECK(extra == doctest::Approx(1e5 + 1.0).epsilon(1e-12));
    CHECK(bound_violation(x, bounds) == Vec2(1.0, 0.0));
  }
}

TEST_CASE("environment step is a pure function of the state, control and seed") {
  const PlantConstants k;
  Environment a(k, kXs, 99), b(k, kXs, 99);
  for (int i = 0; i < 50; ++i) {
    const Environment::Step sa = a.step(kUs), sb = b.step(kUs);
    CHECK(sa.x_next == sb.x_next);
    CHECK(sa.cost == sb.cost);
  }
}

TEST_CASE("environment step integrates the sampled disturbance") {
  const PlantConstants k;
  Environment env(k, kXs, 5);
  const Vec2 x0 = env.state();
  const Environment::Step s = env.step(kUs);
  CHECK(s.x_next == integrate_step(k, x0, kUs, s.disturbance, 1.0, 10));
  CHECK(s.cost == realized_stage_cost(k, x0, kUs, StateBounds{}, s.disturbance));
  CHECK(env.state() == s.x_next);
}

TEST_CASE("constants file round trip and validation") {
  const PlantConstants k = PlantConstants::load(std::string(RTIRL_DATA_DIR) + "/evaporator_constants.json");
  CHECK(k.M == 20.0);
  CHECK(k.UA2 == 6.84);
  const auto path = std::filesystem::temp_directory_path() / "rtirl_constants_roundtrip.json";
  k.save(path.string());
  const PlantConstants k2 = PlantConstants::load(path.string());
  CHECK(k2.lambda_s == k.lambda_s);
  CHECK(k2.dT200 == k.dT200);

  PlantConstants bad = k;
  bad.M = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  std::ofstream(path) << "{\"M\": 20.0}";
  CHECK_THROWS_AS(PlantConstants::load(path.string()), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("non-finite model evaluations raise") {
  const PlantConstants k;
  const Vec2 x(std::nan(""), 50.0);
  CHECK_THROWS_AS(ode_rhs(k, x, kUs, k.nominal()), NonFiniteError);
}
