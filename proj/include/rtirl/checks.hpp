#pragma once

// Self-check suites shared by the `check` command and the acceptance tests.

#include "rtirl/rti.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rtirl {

struct CheckResult {
  std::string suite;
  bool passed = false;
  double max_error = 0.0;
  double threshold = 0.0;
  int samples = 0;
  std::string detail;
};

/// Box of initial states used for randomized checks.
struct OperatingBox {
  Vec2 lower{24.0, 45.0};
  Vec2 upper{28.0, 55.0};

  Vec2 sample(Rng& rng) const;
};

/// Random convex QPs (n <= 6, mi <= 10) against active-set enumeration.
CheckResult check_qp_oracle(int n_problems = 200, std::uint64_t seed = 1, double tol = 1e-8);

/// Analytic grad_theta Q, grad_theta V, grad_theta pi and grad_a Q against
/// central differences with the linearization point frozen. Samples whose QP
/// is degenerate, or whose active set changes within the difference stencil,
/// are redrawn.
CheckResult check_sensitivity(const OcpSpec& spec, int n_samples = 50, std::uint64_t seed = 2, double tol = 1e-5);

/// Nominal one-step prediction from (x_s, u_s) returns to x_s within tol.
CheckResult check_steady_state(const OcpSpec& spec, double tol = 1e-3);

/// Full SQP from the steady-state guess converges to kkt_error <= tol within
/// max_iter QPs, and at the fixed point the RTI-level grad_theta Q equals the
/// Lagrangian gradient of the nonlinear problem within grad_tol (relative).
CheckResult check_sqp(const OcpSpec& spec, int n_states = 20, std::uint64_t seed = 3, double tol = 1e-8,
                      int max_iter = 10, double grad_tol = 1e-7);

/// Theta drawn around the naive guess with small random perturbations of
/// every block, used by the randomized checks.
ThetaVector random_test_theta(const OcpSpec& spec, Rng& rng);

/// Names accepted by run_checks: "qp", "sensitivity", "steady_state", "sqp".
const std::vector<std::string>& check_suite_names();

/// Runs one suite by name, or all of them for an empty name.
std::vector<CheckResult> run_checks(const OcpSpec& spec, const std::string& only = {}, std::uint64_t seed = 0);

}  // namespace rtirl
