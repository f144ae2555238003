#include "rtirl/qp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace rtirl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

QpProblem::QpProblem(int n, int me, int mi)
    : H(MatrixXd::Zero(n, n)),
      g(VectorXd::Zero(n)),
      Aeq(MatrixXd::Zero(me, n)),
      beq(VectorXd::Zero(me)),
      Ain(MatrixXd::Zero(mi, n)),
      bin(VectorXd::Zero(mi)) {}

double QpProblem::objective(const VectorXd& z) const {
  return 0.5 * z.dot(H * z) + g.dot(z);
}

double KktResiduals::max() const {
  return std::max({stationarity, equality, inequality, dual_sign, complementarity});
}

KktResiduals qp_kkt_residuals(const QpProblem& p, const QpSolution& s) {
  KktResiduals r;
  VectorXd grad = p.H * s.z + p.g;
  if (p.num_eq() > 0) grad += p.Aeq.transpose() * s.lam_eq;
  if (p.num_ineq() > 0) grad -= p.Ain.transpose() * s.mu_in;
  r.stationarity = grad.lpNorm<Eigen::Infinity>();
  if (p.num_eq() > 0) r.equality = (p.Aeq * s.z + p.beq).lpNorm<Eigen::Infinity>();
  if (p.num_ineq() > 0) {
    const VectorXd slack = p.Ain * s.z + p.bin;
    r.inequality = std::max(0.0, -slack.minCoeff());
    r.dual_sign = std::max(0.0, -s.mu_in.minCoeff());
    r.complementarity = slack.cwiseProduct(s.mu_in).lpNorm<Eigen::Infinity>();
  }
  return r;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_dimensions(const QpProblem& p) {
  const auto n = p.g.size();
  auto bad = [](const char* what) { throw QpInvalid(std::string("QP dimension mismatch: ") + what); };
  if (p.H.rows() != n || p.H.cols() != n) bad("H");
  if (p.Aeq.rows() != p.beq.size() || (p.Aeq.rows() > 0 && p.Aeq.cols() != n)) bad("Aeq/beq");
  if (p.Ain.rows() != p.bin.size() || (p.Ain.rows() > 0 && p.Ain.cols() != n)) bad("Ain/bin");
  if (!p.H.allFinite() || !p.g.allFinite() || !p.Aeq.allFinite() || !p.beq.allFinite() ||
      !p.Ain.allFinite() || !p.bin.allFinite())
    throw QpInvalid("QP data contains non-finite entries");
}

double hypot_stable(double a, double b) { return std::hypot(a, b); }

// Working set factorization of the dual method: J J' = G^-1 after the
// rotations, R upper triangular with N = J(:, 0:iq) R(0:iq, 0:iq) for the
// active normals N.
class WorkingSet {
 public:
  WorkingSet(MatrixXd J, int n) : J_(std::move(J)), R_(MatrixXd::Zero(n, n)), n_(n) {}

  int size() const { return iq_; }

  VectorXd project(const VectorXd& np) const { return J_.transpose() * np; }

  // Primal step direction for the constraint with projected normal d.
  VectorXd primal_direction(const VectorXd& d) const {
    if (iq_ >= n_) return VectorXd::Zero(n_);
    return J_.rightCols(n_ - iq_) * d.tail(n_ - iq_);
  }

  // Dual step direction r = R^-1 d(0:iq).
  VectorXd dual_direction(const VectorXd& d) const {
    if (iq_ == 0) return VectorXd();
    return R_.topLeftCorner(iq_, iq_).triangularView<Eigen::Upper>().solve(d.head(iq_));
  }

  // Appends a constraint with projected normal d. Returns false when the
  // normal is linearly dependent on the current working set.
  bool add(VectorXd d) {
    for (int j = n_ - 1; j >= iq_ + 1; --j) {
      double cc = d(j - 1);
      double ss = d(j);
      const double h = hypot_stable(cc, ss);
      if (h == 0.0) continue;
      d(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d(j - 1) = -h;
      } else {
        d(j - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j - 1);
        const double t2 = J_(k, j);
        J_(k, j - 1) = t1 * cc + t2 * ss;
        J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    ++iq_;
    R_.col(iq_ - 1).head(iq_) = d.head(iq_);
    if (std::abs(d(iq_ - 1)) <= kEps * r_norm_) return false;
    r_norm_ = std::max(r_norm_, std::abs(d(iq_ - 1)));
    return true;
  }

  // Removes the working-set entry at position qq and restores triangularity.
  void remove(int qq) {
    for (int i = qq; i < iq_ - 1; ++i) R_.col(i) = R_.col(i + 1);
    R_.col(iq_ - 1).setZero();
    --iq_;
    for (int j = qq; j < iq_; ++j) {
      double cc = R_(j, j);
      double ss = R_(j + 1, j);
      const double h = hypot_stable(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < iq_; ++k) {
        const double t1 = R_(j, k);
        const double t2 = R_(j + 1, k);
        R_(j, k) = t1 * cc + t2 * ss;
        R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
      }
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j);
        const double t2 = J_(k, j + 1);
        J_(k, j) = t1 * cc + t2 * ss;
        J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

  // Drops the last entry without touching J (used to undo a failed add).
  void pop_last() {
    R_.col(iq_ - 1).setZero();
    --iq_;
  }

 private:
  MatrixXd J_;
  MatrixXd R_;
  int n_;
  int iq_ = 0;
  double r_norm_ = 1.0;
};

// Returns the Cholesky factor of a positive definite matrix equivalent to H
// on the feasible set, together with the matching gradient.
Eigen::LLT<MatrixXd> convexify(const QpProblem& p, MatrixXd& G, VectorXd& g0) {
  G = p.H;
  g0 = p.g;
  Eigen::LLT<MatrixXd> llt(G);
  if (llt.info() == Eigen::Success) return llt;

  const int n = p.num_vars();
  const int me = p.num_eq();
  if (me == 0) throw QpNonConvex("QP Hessian is not positive definite");

  // Reduced Hessian on null(Aeq).
  Eigen::ColPivHouseholderQR<MatrixXd> qr(p.Aeq.transpose());
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, n);
  if (me < n) {
    MatrixXd Z = Q.rightCols(n - me);
    MatrixXd reduced = Z.transpose() * p.H * Z;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(reduced, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, p.H.cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() <= 1e-12 * scale)
      throw QpNonConvex("QP reduced Hessian is not positive definite");
  }

  const MatrixXd AtA = p.Aeq.transpose() * p.Aeq;
  const VectorXd Atb = p.Aeq.transpose() * p.beq;
  double rho = std::max(1.0, p.H.cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 20; ++attempt, rho *= 10.0) {
    G = p.H + rho * AtA;
    llt.compute(G);
    if (llt.info() == Eigen::Success) {
      g0 = p.g + rho * Atb;
      return llt;
    }
  }
  throw QpNonConvex("QP Hessian could not be convexified on the equality null space");
}

// Direct solve of the equality-constrained KKT system on the final working
// set. Returns false when the result is not better or leaves the feasible set.
bool polish_solution(const QpProblem& p, QpSolution& sol) {
  const int n = p.num_vars();
  const int me = p.num_eq();
  const int na = static_cast<int>(sol.active_set.size());
  const int dim = n + me + na;
  MatrixXd K = MatrixXd::Zero(dim, dim);
  VectorXd rhs(dim);
  K.topLeftCorner(n, n) = p.H;
  rhs.head(n) = -p.g;
  if (me > 0) {
    K.block(0, n, n, me) = p.Aeq.transpose();
    K.block(n, 0, me, n) = p.Aeq;
    rhs.segment(n, me) = -p.beq;
  }
  for (int j = 0; j < na; ++j) {
    const int i = sol.active_set[static_cast<std::size_t>(j)];
    K.block(0, n + me + j, n, 1) = -p.Ain.row(i).transpose();
    K.block(n + me + j, 0, 1, n) = p.Ain.row(i);
    rhs(n + me + j) = -p.bin(i);
  }
  const Eigen::PartialPivLU<MatrixXd> lu(K);
  VectorXd w = lu.solve(rhs);
  w += lu.solve(rhs - K * w);
  if (!w.allFinite()) return false;

  QpSolution cand = sol;
  cand.z = w.head(n);
  cand.lam_eq = w.segment(n, me);
  cand.mu_in.setZero();
  for (int j = 0; j < na; ++j) cand.mu_in(sol.active_set[static_cast<std::size_t>(j)]) = w(n + me + j);
  if (p.num_ineq() > 0 && (cand.mu_in.minCoeff() < 0.0 || (p.Ain * cand.z + p.bin).minCoeff() < -1e-9))
    return false;
  const KktResiduals before = qp_kkt_residuals(p, sol);
  const KktResiduals after = qp_kkt_residuals(p, cand);
  if (!(after.max() <= before.max())) return false;
  sol = std::move(cand);
  return true;
}

}  // namespace

QpSolution solve_qp(const QpProblem& p, const QpOptions& opts) {
  check_dimensions(p);
  const int n = p.num_vars();
  const int me = p.num_eq();
  const int mi = p.num_ineq();
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : 10 * (n + me + mi);

  if (me > n) throw QpInvalid("more equality constraints than variables");
  if (me > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(p.Aeq);
    if (qr.rank() < me) throw QpInvalid("equality constraints are not full row rank");
  }

  MatrixXd G;
  VectorXd g0;
  Eigen::LLT<MatrixXd> llt = convexify(p, G, g0);

  // J = L^-T so that J J' = G^-1.
  const MatrixXd Linv = llt.matrixL().solve(MatrixXd::Identity(n, n));
  WorkingSet ws(Linv.transpose(), n);

  VectorXd x = -llt.solve(g0);
  // active[k] >= 0: inequality index; active[k] < 0: equality -(i+1).
  std::vector<int> active;
  active.reserve(n);
  VectorXd u = VectorXd::Zero(n + 1);

  for (int i = 0; i < me; ++i) {
    const VectorXd np = p.Aeq.row(i).transpose();
    const VectorXd d = ws.project(np);
    const VectorXd z = ws.primal_direction(d);
    const VectorXd r = ws.dual_direction(d);
    const double ztn = z.dot(np);
    double t2 = 0.0;
    if (std::abs(ztn) > kEps * std::max(1.0, d.squaredNorm()))
      t2 = -(np.dot(x) + p.beq(i)) / ztn;
    x += t2 * z;
    const int iq = ws.size();
    u(iq) = t2;
    if (iq > 0) u.head(iq) -= t2 * r;
    active.push_back(-(i + 1));
    if (!ws.add(d)) throw QpInvalid("equality constraints are linearly dependent");
  }

  std::vector<char> in_active(mi, 0);
  const VectorXd row_norm = mi > 0 ? VectorXd(p.Ain.cwiseAbs().rowwise().sum()) : VectorXd();

  auto violation_tol = [&](int i) {
    return 1e3 * kEps * (1.0 + std::abs(p.bin(i)) + row_norm(i) * x.lpNorm<Eigen::Infinity>());
  };

  int iter = 0;
  while (true) {
    // Step 1: most violated inactive inequality.
    int ip = -1;
    double s_min = 0.0;
    for (int i = 0; i < mi; ++i) {
      if (in_active[i]) continue;
      const double si = p.Ain.row(i).dot(x) + p.bin(i);
      if (si < -violation_tol(i) && (ip < 0 || si < s_min)) {
        ip = i;
        s_min = si;
      }
    }
    if (ip < 0) break;

    const VectorXd np = p.Ain.row(ip).transpose();
    double u_new = 0.0;

    // Step 2: move towards satisfying constraint ip.
    while (true) {
      if (++iter > max_iter)
        throw QpIterationLimit("QP iteration limit reached (" + std::to_string(max_iter) + ")");

      const int iq = ws.size();
      const VectorXd d = ws.project(np);
      const VectorXd z = ws.primal_direction(d);
      const VectorXd r = ws.dual_direction(d);

      // Partial (dual) step length; equalities never leave the working set.
      double t1 = kInf;
      int block_pos = -1;
      for (int k = 0; k < iq; ++k) {
        if (active[k] < 0 || r(k) <= 0.0) continue;
        const double ratio = u(k) / r(k);
        if (ratio < t1 || (ratio == t1 && active[k] < active[block_pos])) {
          t1 = ratio;
          block_pos = k;
        }
      }

      // Full (primal) step length.
      double t2 = kInf;
      const double d_tail = iq < n ? d.tail(n - iq).norm() : 0.0;
      if (d_tail > 1e-11 * d.norm()) {
        const double si = np.dot(x) + p.bin(ip);
        t2 = -si / z.dot(np);
        if (t2 < 0.0) t2 = 0.0;
      }

      const double t = std::min(t1, t2);
      if (t == kInf)
        throw QpInfeasible("QP is infeasible (constraint " + std::to_string(ip) + " cannot be satisfied)");

      if (t2 == kInf) {
        // Dual step only: drop the blocking constraint and retry.
        if (iq > 0) u.head(iq) -= t * r;
        u_new += t;
        const int l = active[block_pos];
        in_active[l] = 0;
        ws.remove(block_pos);
        active.erase(active.begin() + block_pos);
        for (int k = block_pos; k < static_cast<int>(active.size()); ++k) u(k) = u(k + 1);
        continue;
      }

      x += t * z;
      if (iq > 0) u.head(iq) -= t * r;
      u_new += t;

      if (t == t2) {
        u(iq) = u_new;
        active.push_back(ip);
        if (!ws.add(d)) {
          // Numerically dependent: the constraint is already implied.
          ws.pop_last();
          active.pop_back();
          throw QpInfeasible("QP degenerate: dependent constraint " + std::to_string(ip) +
                             " cannot be added");
        }
        in_active[ip] = 1;
        break;
      }

      // Partial step: drop the blocking constraint and continue with ip.
      const int l = active[block_pos];
      in_active[l] = 0;
      ws.remove(block_pos);
      active.erase(active.begin() + block_pos);
      for (int k = block_pos; k < static_cast<int>(active.size()); ++k) u(k) = u(k + 1);
    }
  }

  QpSolution sol;
  sol.z = std::move(x);
  sol.lam_eq = VectorXd::Zero(me);
  sol.mu_in = VectorXd::Zero(mi);
  for (std::size_t k = 0; k < active.size(); ++k) {
    const int idx = active[k];
    if (idx < 0) {
      sol.lam_eq(-idx - 1) = -u(static_cast<Eigen::Index>(k));
    } else {
      sol.mu_in(idx) = std::max(0.0, u(static_cast<Eigen::Index>(k)));
      sol.active_set.push_back(idx);
    }
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  if (opts.polish) polish_solution(p, sol);
  sol.objective = p.objective(sol.z);
  sol.iterations = iter;
  return sol;
}

void dump_qp(const QpProblem& p, const std::string& path, const std::string& note) {
  std::ofstream os(path);
  if (!os) return;
  os << std::setprecision(17);
  if (!note.empty()) os << "# " << note << "\n";
  os << "# n " << p.num_vars() << " me " << p.num_eq() << " mi " << p.num_ineq() << "\n";
  const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
  auto block = [&](const char* name, const auto& m) {
    os << "[" << name << "] " << m.rows() << " " << m.cols() << "\n";
    if (m.size() > 0) os << m.format(fmt) << "\n";
  };
  block("H", p.H);
  block("g", p.g.transpose());
  block("Aeq", p.Aeq);
  block("beq", p.beq.transpose());
  block("Ain", p.Ain);
  block("bin", p.bin.transpose());
}

}  // namespace rtirl
