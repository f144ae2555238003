#include "rtirl/theta.hpp"

#include "rtirl/errors.hpp"
#include "rtirl/format.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rtirl {

namespace {

template <int N>
void pack_sym(const Eigen::Matrix<double, N, N>& m, ThetaVector::Packed& v, int off) {
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) v(off++) = m(i, j);
}

template <int N>
Eigen::Matrix<double, N, N> unpack_sym(const ThetaVector::Packed& v, int off) {
  Eigen::Matrix<double, N, N> m;
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) m(i, j) = m(j, i) = v(off++);
  return m;
}

std::array<std::string, ThetaVector::kSize> make_names() {
  std::array<std::string, ThetaVector::kSize> n;
  int k = 0;
  auto sym = [&](const char* base, int dim) {
    for (int i = 1; i <= dim; ++i)
      for (int j = i; j <= dim; ++j) n[k++] = std::string(base) + "_" + std::to_string(i) + std::to_string(j);
  };
  auto vec = [&](const char* base, int dim) {
    for (int i = 1; i <= dim; ++i) n[k++] = std::string(base) + "_" + std::to_string(i);
  };
  sym("B_lambda", 2);
  vec("b_lambda", 2);
  n[k++] = "c_lambda";
  sym("B_vf", 2);
  vec("b_vf", 2);
  sym("B_l", 4);
  vec("b_l", 4);
  vec("c_f", 2);
  vec("x_l", 2);
  vec("x_u", 2);
  return n;
}

}  // namespace

ThetaVector::Packed ThetaVector::pack() const {
  Packed v;
  pack_sym<2>(B_lambda, v, Offsets::B_lambda);
  v.segment<2>(Offsets::b_lambda) = b_lambda;
  v(Offsets::c_lambda) = c_lambda;
  pack_sym<2>(B_vf, v, Offsets::B_vf);
  v.segment<2>(Offsets::b_vf) = b_vf;
  pack_sym<4>(B_l, v, Offsets::B_l);
  v.segment<4>(Offsets::b_l) = b_l;
  v.segment<2>(Offsets::c_f) = c_f;
  v.segment<2>(Offsets::x_l) = x_l;
  v.segment<2>(Offsets::x_u) = x_u;
  return v;
}

ThetaVector ThetaVector::unpack(const Packed& v) {
  ThetaVector t;
  t.B_lambda = unpack_sym<2>(v, Offsets::B_lambda);
  t.b_lambda = v.segment<2>(Offsets::b_lambda);
  t.c_lambda = v(Offsets::c_lambda);
  t.B_vf = unpack_sym<2>(v, Offsets::B_vf);
  t.b_vf = v.segment<2>(Offsets::b_vf);
  t.B_l = unpack_sym<4>(v, Offsets::B_l);
  t.b_l = v.segment<4>(Offsets::b_l);
  t.c_f = v.segment<2>(Offsets::c_f);
  t.x_l = v.segment<2>(Offsets::x_l);
  t.x_u = v.segment<2>(Offsets::x_u);
  return t;
}

const std::array<std::string, ThetaVector::kSize>& ThetaVector::names() {
  static const auto n = make_names();
  return n;
}

void ThetaVector::validate(double eps) const {
  if (!pack().allFinite()) throw std::invalid_argument("theta has non-finite entries");
  auto symmetric = [](const auto& m) { return (m - m.transpose()).cwiseAbs().maxCoeff() == 0.0; };
  if (!symmetric(B_lambda) || !symmetric(B_vf) || !symmetric(B_l))
    throw std::invalid_argument("theta Hessian blocks must be symmetric");
  // Allow rounding slack below the floor, projections land exactly on it.
  const double floor = eps * (1.0 - 1e-6) - 1e-12;
  if (Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(B_vf).eigenvalues().minCoeff() < floor)
    throw std::invalid_argument("theta B_vf is not positive definite");
  if (Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(B_l).eigenvalues().minCoeff() < floor)
    throw std::invalid_argument("theta B_l is not positive definite");
  if (!(x_l.array() < x_u.array()).all()) throw std::invalid_argument("theta requires x_l < x_u");
}

ThetaVector ThetaVector::naive(double steady_state_cost) {
  ThetaVector t;
  t.c_lambda = steady_state_cost;
  return t;
}

Eigen::MatrixXd clip_spectrum(const Eigen::MatrixXd& m, double eps) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(eps);
  Eigen::MatrixXd out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  out = (0.5 * (out + out.transpose())).eval();
  // Reconstruction rounding scales with the largest eigenvalue; lift it back to the floor.
  for (int it = 0; it < 4; ++it) {
    const double low = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(out, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (low >= eps) break;
    out.diagonal().array() += (eps - low) + 4.0 * std::numeric_limits<double>::epsilon() * lam.maxCoeff();
  }
  return out;
}

ThetaVector project_theta(const ThetaVector& raw, double eps) {
  ThetaVector t = raw;
  // Already-feasible symmetric blocks are returned bit-for-bit.
  auto project = [eps](const auto& m) {
    using M = std::decay_t<decltype(m)>;
    if ((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0) {
      Eigen::SelfAdjointEigenSolver<M> es(m, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() >= eps * (1.0 - 1e-9)) return M(m);
    }
    return M(clip_spectrum(m, eps));
  };
  t.B_vf = project(raw.B_vf);
  t.B_l = project(raw.B_l);
  t.B_lambda = 0.5 * (raw.B_lambda + raw.B_lambda.transpose());
  return t;
}

std::string theta_to_text(const ThetaVector& theta) {
  std::ostringstream os;
  os << "# rtirl theta v1\n";
  const auto v = theta.pack();
  const auto& names = ThetaVector::names();
  for (int i = 0; i < ThetaVector::kSize; ++i) os << names[i] << " " << format_double(v(i)) << "\n";
  return os.str();
}

ThetaVector theta_from_text(std::string_view text) {
  ThetaVector::Packed v;
  std::array<bool, ThetaVector::kSize> seen{};
  const auto& names = ThetaVector::names();
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw ConfigError("theta snapshot line " + std::to_string(lineno) + ": expected 'name value'");
    const std::string name = line.substr(0, sp);
    int idx = -1;
    for (int i = 0; i < ThetaVector::kSize; ++i)
      if (names[i] == name) idx = i;
    if (idx < 0) throw ConfigError("theta snapshot: unknown field '" + name + "'");
    if (seen[idx]) throw ConfigError("theta snapshot: duplicate field '" + name + "'");
    try {
      v(idx) = parse_double(std::string_view(line).substr(sp + 1));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("theta snapshot field '" + name + "': " + e.what());
    }
    seen[idx] = true;
  }
  for (int i = 0; i < ThetaVector::kSize; ++i)
    if (!seen[i]) throw ConfigError("theta snapshot: missing field '" + names[i] + "'");
  return ThetaVector::unpack(v);
}

void save_theta(const ThetaVector& theta, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write theta snapshot: " + path);
  os << theta_to_text(theta);
}

ThetaVector load_theta(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open theta snapshot: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return theta_from_text(ss.str());
}

}  // namespace rtirl
