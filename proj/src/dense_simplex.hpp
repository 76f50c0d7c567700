#ifndef PACVERIFY_DENSE_SIMPLEX_HPP
#define PACVERIFY_DENSE_SIMPLEX_HPP

#include <Eigen/Dense>

namespace pacverify::detail {

// min c^T x  s.t.  A x = b, x >= 0. A is dense with few rows and many columns.
struct StandardFormLp {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
};

enum class SimplexStatus { optimal, infeasible, unbounded, iteration_limit };

struct SimplexResult {
  SimplexStatus status = SimplexStatus::optimal;
  Eigen::VectorXd x;
  Eigen::VectorXd duals;  // y with A^T y <= c at optimality
  double objective = 0.0;
  long iterations = 0;
};

struct SimplexOptions {
  long max_iterations = 0;  // 0 picks a size-based limit
  int refactor_interval = 64;
  double optimality_tol = 1e-10;
  double feasibility_tol = 1e-10;
  double pivot_tol = 1e-9;
  double perturbation = 1e-7;  // relative right-hand-side shift
};

// Two-phase revised simplex with an explicit basis inverse. Pricing is
// normalized Dantzig with a Bland fallback after stalled degenerate pivots;
// the ratio test is Harris two-pass.
SimplexResult solve_standard_form(const StandardFormLp& lp, const SimplexOptions& options = {});

}  // namespace pacverify::detail

#endif  // PACVERIFY_DENSE_SIMPLEX_HPP
