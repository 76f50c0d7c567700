#ifndef PACVERIFY_SCENARIO_SOLVER_HPP
#define PACVERIFY_SCENARIO_SOLVER_HPP

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "pacverify/model_runtime.hpp"

namespace pacverify {

struct CoefficientBounds {
  double lower = -100.0;
  double upper = 100.0;
};

/// One minimax affine fit over sampled constraints.
///
/// `design` holds only the free columns (column k corresponds to template
/// index free_idx[k], index 0 being the intercept). `offset` carries the
/// per-sample contribution of the fixed coefficients; leave it empty when
/// nothing is fixed. The fitted residual of sample s is
///   design.row(s) · c_free + offset(s) - targets(s).
struct ChebyshevFitProblem {
  Eigen::MatrixXd design;
  Eigen::VectorXd targets;
  Eigen::VectorXd offset;
  std::vector<std::size_t> free_idx;
  Eigen::VectorXd fixed_coeffs;  // full template vector; free entries are ignored
  CoefficientBounds bounds;

  void validate() const;
};

enum class FitStatus { optimal, infeasible, numeric_failure };

struct FitResult {
  Eigen::VectorXd coefficients;  // full template vector, fixed values merged in
  double margin = 0.0;           // max |residual|
  FitStatus status = FitStatus::optimal;
  bool tie_break_applied = false;
};

struct LpOptions {
  // Among optimal fits, return the one with the smallest L2 norm of the free
  // coefficients.
  bool tie_break = true;
};

FitResult solve_chebyshev_lp(const ChebyshevFitProblem& problem, const LpOptions& options = {});

// Minimum-norm least-squares solution of design · c ≈ targets.
Eigen::VectorXd least_squares_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets);

// Max over samples and components of |c_i · (1, x) - truth(s, i)|.
// `components[i]` has length m+1; `truth` is samples × components.
double max_abs_residual(const std::vector<Eigen::VectorXd>& components,
                        const Eigen::MatrixXd& samples, const Eigen::MatrixXd& truth);

// Same, with the truth obtained by querying the oracle on `samples`.
double residual_margin(const std::vector<Eigen::VectorXd>& components,
                       const Eigen::MatrixXd& samples, Oracle& oracle, int label,
                       ScoreMode mode = ScoreMode::targeted);

// Evaluates an affine template (intercept first) at each row of `samples`.
Eigen::VectorXd evaluate_affine(const Eigen::VectorXd& coefficients, const Eigen::MatrixXd& samples);

}  // namespace pacverify

#endif  // PACVERIFY_SCENARIO_SOLVER_HPP
