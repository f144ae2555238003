#include "rtirl/oracles.hpp"

#include <limits>

namespace rtirl::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::optional<EnumeratedQp> enumerate_active_sets(const QpProblem& p, double tol) {
  const int n = p.num_vars();
  const int me = p.num_eq();
  const int mi = p.num_ineq();
  if (mi > 20) return std::nullopt;

  std::optional<EnumeratedQp> best;
  int checked = 0;
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < mi; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const int ma = static_cast<int>(act.size());
    if (me + ma > n) continue;

    // [H  -C'] [z ]   [-g]
    // [C   0 ] [nu] = [-c]   with C = [Aeq; Ain(act)], nu = [-lam; mu]
    const int m = me + ma;
    MatrixXd C(m, n);
    VectorXd c(m);
    if (me > 0) {
      C.topRows(me) = p.Aeq;
      c.head(me) = p.beq;
    }
    for (int k = 0; k < ma; ++k) {
      C.row(me + k) = p.Ain.row(act[k]);
      c(me + k) = p.bin(act[k]);
    }
    MatrixXd K = MatrixXd::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = p.H;
    K.topRightCorner(n, m) = -C.transpose();
    K.bottomLeftCorner(m, n) = C;
    VectorXd rhs(n + m);
    rhs.head(n) = -p.g;
    rhs.tail(m) = -c;

    Eigen::FullPivLU<MatrixXd> lu(K);
    if (lu.rank() < n + m) continue;
    const VectorXd sol = lu.solve(rhs);
    ++checked;

    const VectorXd z = sol.head(n);
    const VectorXd mu = sol.tail(ma);
    if (ma > 0 && mu.minCoeff() < -tol) continue;
    if (mi > 0 && (p.Ain * z + p.bin).minCoeff() < -tol) continue;

    const double obj = p.objective(z);
    if (!best || obj < best->objective) best = EnumeratedQp{z, obj, 0};
  }
  if (best) best->candidates_checked = checked;
  return best;
}

QpProblem random_convex_qp(std::mt19937_64& rng, int n, int me, int mi) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto randn = [&](int r, int c) {
    MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = normal(rng);
    return m;
  };

  QpProblem p(n, me, mi);
  const MatrixXd M = randn(n, n);
  p.H = M.transpose() * M + 0.1 * MatrixXd::Identity(n, n);
  p.g = 3.0 * randn(n, 1);
  const VectorXd interior = randn(n, 1);
  if (me > 0) {
    p.Aeq = randn(me, n);
    p.beq = -p.Aeq * interior;
  }
  if (mi > 0) {
    p.Ain = randn(mi, n);
    for (int i = 0; i < mi; ++i) p.bin(i) = -p.Ain.row(i).dot(interior) + unif(rng);
  }
  return p;
}

}  // namespace rtirl::oracle
