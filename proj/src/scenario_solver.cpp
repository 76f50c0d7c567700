#include "pacverify/scenario_solver.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "dense_simplex.hpp"
#include "min_norm_qp.hpp"
#include "pacverify/error.hpp"

namespace pacverify {

namespace {

Eigen::Index template_length(const ChebyshevFitProblem& p) {
  return p.fixed_coeffs.size() > 0 ? p.fixed_coeffs.size() : p.design.cols();
}

Eigen::VectorXd adjusted_targets(const ChebyshevFitProblem& p) {
  if (p.offset.size() == 0) return p.targets;
  return p.targets - p.offset;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

Eigen::VectorXd clamp_bounds(Eigen::VectorXd c, const CoefficientBounds& b) {
  return c.cwiseMax(b.lower).cwiseMin(b.upper);
}

}  // namespace

void ChebyshevFitProblem::validate() const {
  const Eigen::Index samples = design.rows();
  if (samples < 1) throw DimensionError("Chebyshev fit needs at least one sample");
  if (targets.size() != samples) throw DimensionError("targets length does not match the design");
  if (offset.size() != 0 && offset.size() != samples) {
    throw DimensionError("offset length does not match the design");
  }
  if (free_idx.empty()) throw ParameterError("Chebyshev fit has no free coefficients");
  if (static_cast<Eigen::Index>(free_idx.size()) != design.cols()) {
    throw DimensionError("design has " + std::to_string(design.cols()) + " columns for " +
                         std::to_string(free_idx.size()) + " free coefficients");
  }
  const Eigen::Index len = template_length(*this);
  std::set<std::size_t> seen;
  for (std::size_t idx : free_idx) {
    if (static_cast<Eigen::Index>(idx) >= len) {
      throw DimensionError("free index " + std::to_string(idx) + " outside the template");
    }
    if (!seen.insert(idx).second) throw ParameterError("duplicate free index");
  }
  if (fixed_coeffs.size() == 0 && static_cast<Eigen::Index>(free_idx.size()) != len) {
    throw DimensionError("fixed coefficients are required when not every index is free");
  }
  if (!(bounds.lower <= bounds.upper)) throw ParameterError("coefficient bounds have L > U");
  if (!design.allFinite() || !targets.allFinite() || (offset.size() && !offset.allFinite()) ||
      (fixed_coeffs.size() && !fixed_coeffs.allFinite())) {
    throw ParameterError("Chebyshev fit data contains non-finite values");
  }
}

FitResult solve_chebyshev_lp(const ChebyshevFitProblem& problem, const LpOptions& options) {
  problem.validate();
  const Eigen::Index K = problem.design.rows();
  const Eigen::Index f = problem.design.cols();
  const Eigen::Index p = f + 1;
  const Eigen::VectorXd y = adjusted_targets(problem);
  const CoefficientBounds& bounds = problem.bounds;

  // Dual of  min λ  s.t.  ±(a_s·c - y_s) <= λ,  L <= c <= U,
  // with one row per primal variable (c, λ) and one column per constraint.
  detail::StandardFormLp lp;
  lp.A.resize(p, 2 * K + 2 * f);
  lp.c.resize(2 * K + 2 * f);
  lp.A.topLeftCorner(f, K) = problem.design.transpose();
  lp.A.block(0, K, f, K) = -problem.design.transpose();
  lp.A.row(f).head(2 * K).setConstant(-1.0);
  lp.c.head(K) = y;
  lp.c.segment(K, K) = -y;
  lp.A.rightCols(2 * f).setZero();
  for (Eigen::Index j = 0; j < f; ++j) {
    lp.A(j, 2 * K + j) = 1.0;
    lp.A(j, 2 * K + f + j) = -1.0;
  }
  lp.c.segment(2 * K, f).setConstant(bounds.upper);
  lp.c.tail(f).setConstant(-bounds.lower);
  lp.b = Eigen::VectorXd::Zero(p);
  lp.b(f) = -1.0;

  FitResult result;
  result.coefficients = problem.fixed_coeffs.size() > 0 ? problem.fixed_coeffs
                                                        : Eigen::VectorXd::Zero(f);
  const detail::SimplexResult sol = detail::solve_standard_form(lp);
  if (sol.status == detail::SimplexStatus::infeasible) {
    result.status = FitStatus::infeasible;
    return result;
  }
  if (sol.status != detail::SimplexStatus::optimal) {
    result.status = FitStatus::numeric_failure;
    return result;
  }

  Eigen::VectorXd free = clamp_bounds(sol.duals.head(f), bounds);
  double margin = max_abs(problem.design * free - y);

  if (options.tie_break) {
    const double slab = margin + 1e-11 * (1.0 + margin);
    Eigen::MatrixXd C(2 * K + 2 * f, f);
    Eigen::VectorXd d(2 * K + 2 * f);
    C.topRows(K) = -problem.design;
    d.head(K) = -(y.array() + slab);
    C.middleRows(K, K) = problem.design;
    d.segment(K, K) = y.array() - slab;
    C.middleRows(2 * K, f) = Eigen::MatrixXd::Identity(f, f);
    d.segment(2 * K, f).setConstant(bounds.lower);
    C.bottomRows(f) = -Eigen::MatrixXd::Identity(f, f);
    d.tail(f).setConstant(-bounds.upper);
    const detail::MinNormResult qp = detail::min_norm_point(C, d);
    if (qp.converged) {
      const Eigen::VectorXd candidate = clamp_bounds(qp.x, bounds);
      const double candidate_margin = max_abs(problem.design * candidate - y);
      if (candidate_margin <= margin + 1e-8 * (1.0 + margin)) {
        free = candidate;
        margin = candidate_margin;
        result.tie_break_applied = true;
      }
    }
  }

  for (Eigen::Index k = 0; k < f; ++k) {
    result.coefficients(static_cast<Eigen::Index>(problem.free_idx[k])) = free(k);
  }
  result.margin = margin;
  result.status = FitStatus::optimal;
  return result;
}

Eigen::VectorXd least_squares_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets) {
  if (design.rows() != targets.size()) throw DimensionError("targets length does not match the design");
  if (design.rows() == 0 || design.cols() == 0) throw DimensionError("least squares on an empty design");
  if (!design.allFinite() || !targets.allFinite()) {
    throw ParameterError("least squares data contains non-finite values");
  }
  constexpr Eigen::Index kDirectLimit = 256;
  const Eigen::Index rows = design.rows();
  const Eigen::Index cols = design.cols();
  if (std::min(rows, cols) > kDirectLimit) {
    // Gram system on the smaller side; min-norm when rows < cols.
    if (rows >= cols) {
      Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(cols, cols);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
      if (llt.info() == Eigen::Success && llt.rcond() > 1e-10) {
        return llt.solve(design.transpose() * targets);
      }
    } else {
      Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(rows, rows);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(design);
      Eigen::LLT<Eigen::MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
      if (llt.info() == Eigen::Success && llt.rcond() > 1e-10) {
        return design.transpose() * llt.solve(targets);
      }
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  return cod.solve(targets);
}

Eigen::VectorXd evaluate_affine(const Eigen::VectorXd& coefficients, const Eigen::MatrixXd& samples) {
  if (coefficients.size() != samples.cols() + 1) {
    throw DimensionError("affine template has " + std::to_string(coefficients.size()) +
                         " coefficients for inputs of dimension " + std::to_string(samples.cols()));
  }
  Eigen::VectorXd values = samples * coefficients.tail(samples.cols());
  values.array() += coefficients(0);
  return values;
}

double max_abs_residual(const std::vector<Eigen::VectorXd>& components, const Eigen::MatrixXd& samples,
                        const Eigen::MatrixXd& truth) {
  if (samples.rows() == 0) throw ParameterError("residual margin over an empty sample set");
  if (truth.rows() != samples.rows() || truth.cols() != static_cast<Eigen::Index>(components.size())) {
    throw DimensionError("truth matrix does not match samples × components");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const Eigen::VectorXd residual = evaluate_affine(components[i], samples) - truth.col(i);
    worst = std::max(worst, residual.lpNorm<Eigen::Infinity>());
  }
  return worst;
}

double residual_margin(const std::vector<Eigen::VectorXd>& components, const Eigen::MatrixXd& samples,
                       Oracle& oracle, int label, ScoreMode mode) {
  if (samples.rows() == 0) throw ParameterError("residual margin over an empty sample set");
  const Eigen::MatrixXd truth = score_targets(oracle.forward_batch(samples), label, mode);
  return max_abs_residual(components, samples, truth);
}

}  // namespace pacverify
