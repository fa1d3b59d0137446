#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>

namespace simgap {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

std::string to_string(LpStatus status);

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
  Eigen::VectorXd x;
  /// Simplex multipliers y = c_B^T B^{-1} of the equality rows (standard form only).
  Eigen::VectorXd duals;
  std::size_t iterations = 0;
};

/// min c^T x  s.t.  A x = b, x >= 0.
struct StandardLp {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
};

/// min c^T x  s.t.  G x <= h, x free.
struct InequalityLp {
  Eigen::MatrixXd g;
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

enum class PricingRule {
  bland,
  /// Most negative reduced cost, switching to Bland's rule for the rest of the
  /// phase after a run of degenerate pivots.
  dantzig_then_bland,
};

struct SimplexOptions {
  std::size_t max_iterations = 200'000;
  double cost_tol = 1e-12;
  double pivot_tol = 1e-10;
  double feasibility_tol = 1e-9;
  PricingRule pricing = PricingRule::dantzig_then_bland;
  std::size_t degenerate_run = 50;
};

/// Two-phase dense tableau simplex.
LpResult simplex(const StandardLp& lp, const SimplexOptions& options = {});

/// Solves the inequality-form LP through its dual
///   min h^T y  s.t.  G^T y = -c, y >= 0,
/// recovering x from the dual's simplex multipliers. Suited to instances with
/// many more constraints than variables.
LpResult solve_inequality_lp(const InequalityLp& lp, const SimplexOptions& options = {});

/// Reference solver by vertex enumeration: every n-subset of constraints
/// (plus |x_j| <= box rows) is solved and the best feasible vertex kept.
/// Unboundedness is detected by doubling the box. Intended for small
/// instances (a few variables, a few dozen constraints).
LpResult lp_oracle(const InequalityLp& lp, double box = 1e6);

}  // namespace simgap
