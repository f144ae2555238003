#include "rtirl/errors.hpp"
#include "rtirl/format.hpp"
#include "rtirl/theta.hpp"

#include "doctest.h"

#include <clocale>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>

using namespace rtirl;
using Eigen::MatrixXd;

namespace {

MatrixXd random_symmetric(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(i, j) = m(j, i) = nd(rng);
  return m;
}

ThetaVector random_theta(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  ThetaVector::Packed p;
  for (int i = 0; i < ThetaVector::kSize; ++i) p(i) = nd(rng) * std::pow(10.0, nd(rng));
  return ThetaVector::unpack(p);
}

}  // namespace

TEST_CASE("format_double round-trips and ignores the locale") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 1000; ++i) {
    const double v = nd(rng) * std::pow(10.0, 20.0 * nd(rng));
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1e5) == "100000");
  CHECK_THROWS_AS(parse_double("1.5x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_double(""), std::invalid_argument);
  if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8") != nullptr) {
    CHECK(format_double(1.5) == "1.5");
    CHECK(parse_double("2.25") == 2.25);
    std::setlocale(LC_NUMERIC, "C");
  }
}

TEST_CASE("pack and unpack are inverse") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const ThetaVector th = random_theta(rng);
    CHECK(ThetaVector::unpack(th.pack()).pack() == th.pack());
  }
}

TEST_CASE("packed offsets point at the documented blocks") {
  ThetaVector th;
  th.B_lambda << 1, 2, 2, 3;
  th.c_lambda = 7.0;
  th.B_l(0, 3) = th.B_l(3, 0) = 9.0;
  th.c_f << 4.0, 5.0;
  const ThetaVector::Packed p = th.pack();
  CHECK(p(ThetaVector::Offsets::B_lambda + 1) == 2.0);
  CHECK(p(ThetaVector::Offsets::c_lambda) == 7.0);
  CHECK(p(ThetaVector::Offsets::B_l + 3) == 9.0);
  CHECK(p(ThetaVector::Offsets::c_f + 1) == 5.0);
  CHECK(p(ThetaVector::Offsets::x_u) == 100.0);
  const auto& names = ThetaVector::names();
  CHECK(names[ThetaVector::Offsets::c_lambda] == "c_lambda");
  CHECK(names[ThetaVector::Offsets::B_l + 3] == "B_l_14");
  CHECK(names[ThetaVector::Offsets::x_u + 1] == "x_u_2");
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
}

TEST_CASE("validate enforces the invariants") {
  ThetaVector th = ThetaVector::naive(6210.0);
  CHECK_NOTHROW(th.validate());
  ThetaVector a = th;
  a.B_l(0, 0) = -1.0;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  ThetaVector b = th;
  b.x_l(1) = b.x_u(1);
  CHECK_THROWS_AS(b.validate(), std::invalid_argument);
  ThetaVector c = th;
  c.c_f(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  ThetaVector d = th;
  d.B_vf(0, 1) = 0.5;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  ThetaVector e = th;
  e.B_lambda = -Eigen::Matrix2d::Identity();  // indefinite initial cost is allowed
  CHECK_NOTHROW(e.validate());
}

TEST_CASE("naive parameter") {
  const ThetaVector th = ThetaVector::naive(6210.5);
  CHECK(th.B_l == Eigen::Matrix4d::Identity());
  CHECK(th.B_vf == Eigen::Matrix2d::Identity());
  CHECK(th.c_lambda == 6210.5);
  CHECK(th.B_lambda == Eigen::Matrix2d::Zero());
  CHECK(th.c_f == Eigen::Vector2d::Zero());
  CHECK(th.x_l == Eigen::Vector2d(25.0, 40.0));
  CHECK(th.x_u == Eigen::Vector2d(100.0, 80.0));
}

TEST_CASE("projection: already positive definite is unchanged") {
  const ThetaVector th = ThetaVector::naive(1.0);
  CHECK(project_theta(th) == th);
}

TEST_CASE("projection: diag(-1, 2) clips to diag(1e-6, 2)") {
  ThetaVector th;
  th.B_vf << -1.0, 0.0, 0.0, 2.0;
  const ThetaVector p = project_theta(th);
  CHECK(p.B_vf(0, 0) == doctest::Approx(1e-6).epsilon(1e-9));
  CHECK(p.B_vf(1, 1) == doctest::Approx(2.0));
  CHECK(p.B_vf(0, 1) == 0.0);
}

TEST_CASE("property: projection satisfies the optimality conditions of the nearest floored matrix") {
  // P minimizes |P - B|_F over P >= eps I iff P >= eps I, P - B >= 0 and
  // <P - B, P - eps I> = 0.
  std::mt19937_64 rng(3);
  const double eps = 1e-6;
  for (int t = 0; t < 200; ++t) {
    const int n = (t % 2 == 0) ? 2 : 4;
    const MatrixXd B = random_symmetric(rng, n, 2.0);
    const MatrixXd P = clip_spectrum(B, eps);
    const MatrixXd I = MatrixXd::Identity(n, n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es_p(P - eps * I), es_d(P - B);
    CHECK(es_p.eigenvalues().minCoeff() >= -1e-12);
    CHECK(es_d.eigenvalues().minCoeff() >= -1e-12);
    CHECK(std::abs(((P - B).cwiseProduct(P - eps * I)).sum()) <= 1e-10 * (1.0 + B.squaredNorm()));
    CHECK((P - P.transpose()).norm() == 0.0);
  }
}

TEST_CASE("property: projection is idempotent and only touches B_l and B_vf") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    ThetaVector th = random_theta(rng);
    th.B_l = random_symmetric(rng, 4, 1.0);
    th.B_vf = random_symmetric(rng, 2, 1.0);
    const ThetaVector p = project_theta(th);
    CHECK(project_theta(p) == p);
    CHECK(p.B_lambda == th.B_lambda);
    CHECK(p.c_lambda == th.c_lambda);
    CHECK(p.b_l == th.b_l);
    CHECK(p.c_f == th.c_f);
    CHECK(p.x_l == th.x_l);
  }
}

TEST_CASE("snapshot text round trip is exact") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    ThetaVector th = random_theta(rng);
    CHECK(theta_from_text(theta_to_text(th)) == th);
  }
  const auto path = std::filesystem::temp_directory_path() / "rtirl_theta_roundtrip.txt";
  const ThetaVector th = random_theta(rng);
  save_theta(th, path.string());
  CHECK(load_theta(path.string()) == th);
  std::filesystem::remove(path);
}

TEST_CASE("snapshot parser rejects malformed input") {
  const std::string good = theta_to_text(ThetaVector::naive(1.0));
  CHECK_THROWS_AS(theta_from_text("c_lambda 1\n"), ConfigError);
  CHECK_THROWS_AS(theta_from_text(good + "c_lambda 2\n"), ConfigError);
  CHECK_THROWS_AS(theta_from_text(good + "bogus 2\n"), ConfigError);
  std::string bad_value = good;
  bad_value.replace(bad_value.find("c_lambda 1"), 10, "c_lambda 1z");
  CHECK_THROWS_AS(theta_from_text(bad_value), ConfigError);
  CHECK_THROWS_AS(load_theta("/nonexistent/theta.txt"), ConfigError);
}
