#include "dense_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "pacverify/error.hpp"

namespace pacverify::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class RevisedSimplex {
 public:
  RevisedSimplex(const StandardFormLp& lp, const SimplexOptions& options)
      : options_(options), rows_(lp.A.rows()), cols_(lp.A.cols()) {
    row_sign_ = Eigen::VectorXd::Ones(rows_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (lp.b(i) < 0) row_sign_(i) = -1.0;
    }
    A_ = row_sign_.asDiagonal() * lp.A;
    b_exact_ = row_sign_.cwiseProduct(lp.b);
    // Fixed pseudo-random right-hand-side shifts break the heavy degeneracy
    // of Chebyshev duals; they are removed before the result is read.
    b_ = b_exact_;
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      h ^= h >> 31;
      h *= 0xbf58476d1ce4e5b9ULL;
      h ^= h >> 29;
      const double u = 0.5 + 0.5 * static_cast<double>(h >> 11) * 0x1.0p-53;
      b_(i) += options.perturbation * (1.0 + std::abs(b_(i))) * u;
    }
    cost_ = lp.c;
    col_norm_.resize(cols_);
    for (Eigen::Index j = 0; j < cols_; ++j) col_norm_(j) = std::max(A_.col(j).norm(), 1e-12);
    basis_.resize(static_cast<std::size_t>(rows_));
    is_basic_.assign(static_cast<std::size_t>(cols_), false);
    for (Eigen::Index i = 0; i < rows_; ++i) basis_[i] = cols_ + i;  // artificials
    binv_ = Eigen::MatrixXd::Identity(rows_, rows_);
    xb_ = b_;
    max_iter_ = options.max_iterations > 0 ? options.max_iterations
                                           : std::max<long>(20000, 20 * (rows_ + cols_));
  }

  SimplexResult solve() {
    SimplexResult result;
    // Phase 1: minimize the sum of artificials.
    Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(cols_);
    SimplexStatus st = iterate(phase1_cost, /*artificial_cost=*/1.0, result.iterations);
    if (st == SimplexStatus::iteration_limit) {
      result.status = st;
      return result;
    }
    double infeasibility = 0.0;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (basis_[i] >= cols_) infeasibility += std::max(0.0, xb_(i));
    }
    const double scale = 1.0 + b_.lpNorm<Eigen::Infinity>();
    if (infeasibility > 1e-8 * scale) {
      result.status = SimplexStatus::infeasible;
      return result;
    }
    drive_out_artificials();

    st = iterate(cost_, /*artificial_cost=*/0.0, result.iterations);
    if (st == SimplexStatus::optimal) {
      b_ = b_exact_;
      refactor();
      st = dual_cleanup(result.iterations);
    }
    result.status = st;
    if (st != SimplexStatus::optimal) return result;

    refactor();
    result.x = Eigen::VectorXd::Zero(cols_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (basis_[i] < cols_) result.x(basis_[i]) = std::max(0.0, xb_(i));
    }
    Eigen::VectorXd cb = basis_costs(cost_, 0.0);
    Eigen::VectorXd y = binv_.transpose() * cb;
    result.duals = row_sign_.cwiseProduct(y);
    result.objective = cost_.dot(result.x);
    return result;
  }

 private:
  Eigen::VectorXd basis_costs(const Eigen::VectorXd& cost, double artificial_cost) const {
    Eigen::VectorXd cb(rows_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      cb(i) = basis_[i] < cols_ ? cost(basis_[i]) : artificial_cost;
    }
    return cb;
  }

  Eigen::VectorXd column(Eigen::Index j) const {
    if (j < cols_) return A_.col(j);
    return Eigen::VectorXd::Unit(rows_, j - cols_);
  }

  void refactor() {
    Eigen::MatrixXd B(rows_, rows_);
    for (Eigen::Index i = 0; i < rows_; ++i) B.col(i) = column(basis_[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    binv_ = lu.inverse();
    xb_ = binv_ * b_;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (xb_(i) < 0.0 && xb_(i) > -options_.feasibility_tol * 100) xb_(i) = 0.0;
    }
  }

  void pivot(Eigen::Index r, Eigen::Index q, const Eigen::VectorXd& alpha) {
    const double theta = std::max(0.0, xb_(r) / alpha(r));
    xb_ -= theta * alpha;
    xb_(r) = theta;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (xb_(i) < 0.0) xb_(i) = 0.0;
    }
    const Eigen::RowVectorXd pivot_row = binv_.row(r) / alpha(r);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (i != r && alpha(i) != 0.0) binv_.row(i) -= alpha(i) * pivot_row;
    }
    binv_.row(r) = pivot_row;
    if (basis_[r] < cols_) is_basic_[basis_[r]] = false;
    basis_[r] = q;
    if (q < cols_) is_basic_[q] = true;
  }

  SimplexStatus iterate(const Eigen::VectorXd& cost, double artificial_cost, long& iterations) {
    const double opt_tol = options_.optimality_tol * std::max(1.0, cost.lpNorm<Eigen::Infinity>());
    bool bland = false;
    int stalled = 0;
    long since_refactor = 0;
    for (;;) {
      if (iterations >= max_iter_) return SimplexStatus::iteration_limit;
      if (since_refactor >= options_.refactor_interval) {
        refactor();
        since_refactor = 0;
      }
      const Eigen::VectorXd y = binv_.transpose() * basis_costs(cost, artificial_cost);
      const Eigen::VectorXd reduced = cost - A_.transpose() * y;

      Eigen::Index entering = -1;
      double best = 0.0;
      for (Eigen::Index j = 0; j < cols_; ++j) {
        if (is_basic_[j] || reduced(j) >= -opt_tol) continue;
        if (bland) {
          entering = j;
          break;
        }
        const double score = reduced(j) / col_norm_(j);
        if (score < best) {
          best = score;
          entering = j;
        }
      }
      if (entering < 0) return SimplexStatus::optimal;

      const Eigen::VectorXd alpha = binv_ * A_.col(entering);
      Eigen::Index leaving = -1;
      if (bland) {
        double best_ratio = kInf;
        for (Eigen::Index i = 0; i < rows_; ++i) {
          if (alpha(i) > options_.pivot_tol) best_ratio = std::min(best_ratio, xb_(i) / alpha(i));
        }
        for (Eigen::Index i = 0; i < rows_; ++i) {
          if (alpha(i) <= options_.pivot_tol) continue;
          if (xb_(i) / alpha(i) > best_ratio + 1e-12 * (1.0 + best_ratio)) continue;
          if (leaving < 0 || basis_[i] < basis_[leaving]) leaving = i;
        }
      } else {
        double bound = kInf;
        for (Eigen::Index i = 0; i < rows_; ++i) {
          if (alpha(i) > options_.pivot_tol) {
            bound = std::min(bound, (xb_(i) + options_.feasibility_tol) / alpha(i));
          }
        }
        double largest = 0.0;
        for (Eigen::Index i = 0; i < rows_; ++i) {
          if (alpha(i) > options_.pivot_tol && xb_(i) / alpha(i) <= bound && alpha(i) > largest) {
            largest = alpha(i);
            leaving = i;
          }
        }
      }
      if (leaving < 0) return SimplexStatus::unbounded;

      const double step = std::max(0.0, xb_(leaving) / alpha(leaving));
      pivot(leaving, entering, alpha);
      ++iterations;
      ++since_refactor;
      if (step <= options_.feasibility_tol) {
        if (++stalled > 50) bland = true;
      } else {
        stalled = 0;
        bland = false;
      }
    }
  }

  // Dual simplex from a dual-feasible basis until x_B >= 0 again.
  SimplexStatus dual_cleanup(long& iterations) {
    const double tol = options_.feasibility_tol * (1.0 + b_.lpNorm<Eigen::Infinity>());
    long since_refactor = 0;
    for (;;) {
      if (iterations >= max_iter_) return SimplexStatus::iteration_limit;
      if (since_refactor >= options_.refactor_interval) {
        refactor();
        since_refactor = 0;
      }
      Eigen::Index r = -1;
      double worst = -tol;
      for (Eigen::Index i = 0; i < rows_; ++i) {
        if (basis_[i] < cols_ && xb_(i) < worst) {
          worst = xb_(i);
          r = i;
        }
      }
      if (r < 0) {
        for (Eigen::Index i = 0; i < rows_; ++i) xb_(i) = std::max(0.0, xb_(i));
        return SimplexStatus::optimal;
      }
      const Eigen::VectorXd y = binv_.transpose() * basis_costs(cost_, 0.0);
      const Eigen::VectorXd reduced = cost_ - A_.transpose() * y;
      const Eigen::RowVectorXd row = binv_.row(r) * A_;
      Eigen::Index q = -1;
      double best_ratio = kInf;
      double best_pivot = 0.0;
      for (Eigen::Index j = 0; j < cols_; ++j) {
        if (is_basic_[j] || row(j) >= -options_.pivot_tol) continue;
        const double ratio = std::max(0.0, reduced(j)) / -row(j);
        if (ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && -row(j) > best_pivot)) {
          best_ratio = std::min(best_ratio, ratio);
          best_pivot = -row(j);
          q = j;
        }
      }
      if (q < 0) return SimplexStatus::infeasible;
      const Eigen::VectorXd alpha = binv_ * A_.col(q);
      const double theta = xb_(r) / alpha(r);
      xb_ -= theta * alpha;
      xb_(r) = theta;
      const Eigen::RowVectorXd pivot_row = binv_.row(r) / alpha(r);
      for (Eigen::Index i = 0; i < rows_; ++i) {
        if (i != r && alpha(i) != 0.0) binv_.row(i) -= alpha(i) * pivot_row;
      }
      binv_.row(r) = pivot_row;
      if (basis_[r] < cols_) is_basic_[basis_[r]] = false;
      basis_[r] = q;
      is_basic_[q] = true;
      ++iterations;
      ++since_refactor;
    }
  }

  // Replace zero-valued artificials left in the basis by structural columns.
  // A row with no usable structural column is redundant; its artificial stays
  // basic at zero and can never grow since no entering column touches the row.
  void drive_out_artificials() {
    for (Eigen::Index r = 0; r < rows_; ++r) {
      if (basis_[r] < cols_) continue;
      const Eigen::RowVectorXd row = binv_.row(r) * A_;
      Eigen::Index best = -1;
      double best_abs = 1e-9 * std::max(1.0, row.lpNorm<Eigen::Infinity>());
      for (Eigen::Index j = 0; j < cols_; ++j) {
        if (is_basic_[j]) continue;
        if (std::abs(row(j)) > best_abs) {
          best_abs = std::abs(row(j));
          best = j;
        }
      }
      if (best < 0) continue;
      const Eigen::VectorXd alpha = binv_ * A_.col(best);
      // Degenerate pivot: xb_(r) is (numerically) zero, sign of alpha irrelevant.
      xb_(r) = 0.0;
      const Eigen::RowVectorXd pivot_row = binv_.row(r) / alpha(r);
      for (Eigen::Index i = 0; i < rows_; ++i) {
        if (i != r) binv_.row(i) -= alpha(i) * pivot_row;
      }
      binv_.row(r) = pivot_row;
      basis_[r] = best;
      is_basic_[best] = true;
    }
    refactor();
  }

  SimplexOptions options_;
  Eigen::Index rows_;
  Eigen::Index cols_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  Eigen::VectorXd b_exact_;
  Eigen::VectorXd cost_;
  Eigen::VectorXd row_sign_;
  Eigen::VectorXd col_norm_;
  std::vector<Eigen::Index> basis_;
  std::vector<bool> is_basic_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
  long max_iter_;
};

}  // namespace

SimplexResult solve_standard_form(const StandardFormLp& lp, const SimplexOptions& options) {
  if (lp.A.rows() != lp.b.size() || lp.A.cols() != lp.c.size()) {
    throw DimensionError("standard-form LP has inconsistent dimensions");
  }
  RevisedSimplex solver(lp, options);
  return solver.solve();
}

}  // namespace pacverify::detail
