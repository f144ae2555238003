#pragma once

// Independent reference solvers used by the test suites and the `check`
// command. Nothing in the core library depends on these.

#include "rtirl/qp.hpp"

#include <optional>
#include <random>

namespace rtirl::oracle {

struct EnumeratedQp {
  Eigen::VectorXd z;
  double objective = 0.0;
  int candidates_checked = 0;
};

/// Solves a small strictly convex QP by enumerating every subset of
/// inequalities as equalities, solving each KKT system and keeping the best
/// primal- and dual-feasible candidate. Returns nullopt when none qualifies.
std::optional<EnumeratedQp> enumerate_active_sets(const QpProblem& p, double tol = 1e-9);

/// Random strictly convex, feasible QP with a known interior point.
QpProblem random_convex_qp(std::mt19937_64& rng, int n, int me, int mi);

}  // namespace rtirl::oracle
