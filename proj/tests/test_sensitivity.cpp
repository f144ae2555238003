#include "rtirl/checks.hpp"
#include "rtirl/sensitivity.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace rtirl;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Sample {
  ThetaVector theta;
  Vec2 s;
  Vec2 a;
  PrimalDual lin;
  RtiContext ctx_q, ctx_v;
  RtiOutput out_q, out_v;
};

// Random (theta, s, a) whose Q- and V-mode QPs are strictly complementary.
Sample draw_sample(const OcpSpec& spec, Rng& rng) {
  const OperatingBox box;
  std::uniform_real_distribution<double> du(-40.0, 40.0);
  for (;;) {
    Sample x;
    x.theta = random_test_theta(spec, rng);
    x.s = box.sample(rng);
    x.a = (spec.u_s + Vec2(du(rng), du(rng))).cwiseMax(spec.u_lb).cwiseMin(spec.u_ub);
    x.lin = shift(sqp_solve_full(x.theta, spec, x.s, std::nullopt).y);
    x.ctx_q = prepare(x.theta, spec, x.lin, RtiMode::Q);
    x.ctx_v = prepare(x.theta, spec, x.lin, RtiMode::V);
    x.out_q = feedback(x.ctx_q, x.s, x.a);
    x.out_v = feedback(x.ctx_v, x.s);
    if (!qp_is_degenerate(x.ctx_q, x.out_q) && !qp_is_degenerate(x.ctx_v, x.out_v)) return x;
  }
}

double q_value(const ThetaVector& th, const OcpSpec& spec, const PrimalDual& lin, const Vec2& s, const Vec2& a) {
  return feedback(prepare(th, spec, lin, RtiMode::Q), s, a).value;
}

RtiOutput v_out(const ThetaVector& th, const OcpSpec& spec, const PrimalDual& lin, const Vec2& s) {
  return feedback(prepare(th, spec, lin, RtiMode::V), s);
}

}  // namespace

TEST_CASE("fd_check on a quadratic is exact up to rounding") {
  MatrixXd A(3, 3);
  A << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  const VectorXd b = VectorXd::LinSpaced(3, -1.0, 1.0);
  auto f = [&](const VectorXd& x) { return 0.5 * x.dot(A * x) + b.dot(x); };
  const VectorXd x = VectorXd::LinSpaced(3, 0.3, 2.0);
  const FdReport r = fd_check(std::function<double(const VectorXd&)>(f), x, VectorXd(A * x + b), 1e-3);
  CHECK(r.max_rel_err <= 1e-10);
  CHECK(r.entries.size() == 3);
}

TEST_CASE("fd_check on sin matches the cosine") {
  auto f = [](const VectorXd& x) { return std::sin(x(0)) + std::sin(2.0 * x(1)); };
  VectorXd x(2);
  x << 0.4, -1.1;
  VectorXd g(2);
  g << std::cos(0.4), 2.0 * std::cos(-2.2);
  CHECK(fd_check(std::function<double(const VectorXd&)>(f), x, g, 1e-5).max_rel_err <= 1e-8);
}

TEST_CASE("fd_check flags a wrong gradient") {
  auto f = [](const VectorXd& x) { return x.squaredNorm(); };
  const VectorXd x = VectorXd::Ones(2);
  const VectorXd wrong = VectorXd::Constant(2, 3.0);
  const FdReport r = fd_check(std::function<double(const VectorXd&)>(f), x, wrong, 1e-6, 1.0, {"p", "q"});
  CHECK(r.max_rel_err > 0.3);
  CHECK(r.entries[1].name == "q");
}

TEST_CASE("dQ/dc_lambda and dV/dc_lambda are one, dpi/dc_lambda is zero") {
  const OcpSpec spec;
  Rng rng(1);
  const Sample x = draw_sample(spec, rng);
  CHECK(grad_q_theta(x.ctx_q, x.out_q)(ThetaVector::Offsets::c_lambda) == 1.0);
  CHECK(grad_v_theta(x.ctx_v, x.out_v)(ThetaVector::Offsets::c_lambda) == 1.0);
  CHECK(grad_policy_theta(x.ctx_v, x.out_v).col(ThetaVector::Offsets::c_lambda).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("sensitivities match central differences with the linearization frozen") {
  const OcpSpec spec;
  Rng rng(2);
  for (int t = 0; t < 8; ++t) {
    const Sample x = draw_sample(spec, rng);
    const ThetaVector::Packed p0 = x.theta.pack();
    auto fq = [&](const VectorXd& p) { return q_value(ThetaVector::unpack(p), spec, x.lin, x.s, x.a); };
    auto fv = [&](const VectorXd& p) { return v_out(ThetaVector::unpack(p), spec, x.lin, x.s).value; };
    auto fpi = [&](const VectorXd& p) { return VectorXd(v_out(ThetaVector::unpack(p), spec, x.lin, x.s).u0); };
    auto fa = [&](const VectorXd& a) { return q_value(x.theta, spec, x.lin, x.s, Vec2(a)); };

    const FdReport rq = fd_check(std::function<double(const VectorXd&)>(fq), p0,
                                 VectorXd(grad_q_theta(x.ctx_q, x.out_q)), 1e-4);
    const FdReport rv = fd_check(std::function<double(const VectorXd&)>(fv), p0,
                                 VectorXd(grad_v_theta(x.ctx_v, x.out_v)), 1e-4);
    const FdReport rp = fd_check(fpi, p0, MatrixXd(grad_policy_theta(x.ctx_v, x.out_v)), 1e-4);
    const FdReport ra = fd_check(std::function<double(const VectorXd&)>(fa), VectorXd(x.a),
                                 VectorXd(grad_q_action(x.out_q)), 1e-4);
    CHECK(rq.max_rel_err <= 1e-5);
    CHECK(rv.max_rel_err <= 1e-5);
    CHECK(rp.max_rel_err <= 1e-5);
    CHECK(ra.max_rel_err <= 1e-5);
  }
}

TEST_CASE("grad_v_theta equals grad_q_theta at the greedy action") {
  const OcpSpec spec;
  Rng rng(3);
  Sample x;
  RtiOutput q;
  do {
    x = draw_sample(spec, rng);
    q = feedback(x.ctx_q, x.s, x.out_v.u0);
  } while (qp_is_degenerate(x.ctx_q, q));
  const ThetaVector::Packed gq = grad_q_theta(x.ctx_q, q);
  const ThetaVector::Packed gv = grad_v_theta(x.ctx_v, x.out_v);
  CHECK((gq - gv).lpNorm<Eigen::Infinity>() <= 1e-6 * std::max(1.0, gv.lpNorm<Eigen::Infinity>()));
  CHECK(grad_q_action(q).lpNorm<Eigen::Infinity>() <= 1e-6 * std::max(1.0, gv.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("policy is invariant under uniform scaling of the tracking cost") {
  const OcpSpec spec;
  Rng rng(4);
  for (int t = 0; t < 5; ++t) {
    Sample x = draw_sample(spec, rng);
    ThetaVector th = x.theta;
    th.c_f.setZero();
    x.ctx_v = prepare(th, spec, x.lin, RtiMode::V);
    x.out_v = feedback(x.ctx_v, x.s);
    if (qp_is_degenerate(x.ctx_v, x.out_v)) continue;
    ThetaVector dir = ThetaVector::unpack(ThetaVector::Packed::Zero());
    dir.B_vf = th.B_vf;
    dir.b_vf = th.b_vf;
    dir.B_l = th.B_l;
    dir.b_l = th.b_l;
    dir.x_l.setZero();
    dir.x_u.setZero();
    const Vec2 d = grad_policy_theta(x.ctx_v, x.out_v) * dir.pack();
    // Slack costs are not scaled, so invariance needs zero planned slacks.
    double slack = 0.0;
    for (int k = 0; k <= spec.N; ++k) slack = std::max(slack, x.out_v.y_qp.z.sigma(k).lpNorm<Eigen::Infinity>());
    if (slack > 1e-9) continue;
    CHECK(d.lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("moving the action against dQ/da lowers Q") {
  const OcpSpec spec;
  Rng rng(5);
  for (int t = 0; t < 5; ++t) {
    const Sample x = draw_sample(spec, rng);
    const Vec2 g = grad_q_action(x.out_q);
    if (g.norm() < 1e-6) continue;
    const Vec2 a2 = x.a - 1e-3 * g / g.norm();
    CHECK(q_value(x.theta, spec, x.lin, x.s, a2) < x.out_q.value);
  }
}

TEST_CASE("QP solution Jacobian matches differences of the primal step") {
  const OcpSpec spec;
  Rng rng(6);
  const Sample x = draw_sample(spec, rng);
  const MatrixXd J = qp_solution_theta_jacobian(x.ctx_v, x.out_v);
  const int nz = OcpLayout(spec.N).num_z();
  auto f = [&](const VectorXd& p) { return VectorXd(v_out(ThetaVector::unpack(p), spec, x.lin, x.s).dz); };
  const FdReport r = fd_check(f, x.theta.pack(), J.topRows(nz), 1e-4);
  CHECK(r.max_rel_err <= 1e-5);
}

TEST_CASE("weakly active constraints are detected") {
  const OcpSpec spec;
  const ThetaVector th = naive_theta(spec);
  // From the steady state the tracking optimum sits on X2 = x_l with zero multiplier.
  const RtiContext ctx = prepare(th, spec, PrimalDual::cold_start(spec), RtiMode::V);
  const RtiOutput out = feedback(ctx, spec.x_s);
  REQUIRE(qp_is_degenerate(ctx, out));
  CHECK_THROWS_AS(grad_policy_theta(ctx, out), StrictComplementarityViolated);
}

TEST_CASE("mode mismatch is rejected") {
  const OcpSpec spec;
  Rng rng(7);
  const Sample x = draw_sample(spec, rng);
  CHECK_THROWS_AS(grad_q_theta(x.ctx_v, x.out_v), std::invalid_argument);
  CHECK_THROWS_AS(grad_v_theta(x.ctx_q, x.out_q), std::invalid_argument);
}
