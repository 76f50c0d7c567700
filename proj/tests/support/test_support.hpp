#ifndef PACVERIFY_TEST_SUPPORT_HPP
#define PACVERIFY_TEST_SUPPORT_HPP

#include <cstdint>
#include <memory>
#include <random>

#include <Eigen/Dense>

#include "pacverify/model_runtime.hpp"
#include "pacverify/sampler.hpp"
#include "pacverify/scenario_solver.hpp"

namespace pacverify::fixtures {

// f(x) = W x + b, so every score difference is affine.
class AffineOracle final : public Oracle {
 public:
  AffineOracle(Eigen::MatrixXd w, Eigen::VectorXd b);
  const Eigen::MatrixXd& weights() const { return w_; }
  const Eigen::VectorXd& bias() const { return b_; }

 protected:
  Eigen::MatrixXd evaluate_rows(const Eigen::MatrixXd& points) override;

 private:
  Eigen::MatrixXd w_;
  Eigen::VectorXd b_;
};

// Oracle that throws OracleError on every query.
class FailingOracle final : public Oracle {
 public:
  FailingOracle(int m, int n) : Oracle(m, n) {}

 protected:
  Eigen::MatrixXd evaluate_rows(const Eigen::MatrixXd&) override;
};

ClassifierModel toy_model();
// Dense ReLU network with the given layer widths, weights ~ N(0, 1/fan_in).
ClassifierModel random_mlp(const std::vector<int>& widths, std::uint64_t seed);

// Exhaustive Chebyshev optimum: every vertex of {(c, λ)} defined by
// f+1 active constraints is tried. Small instances only.
double vertex_enumeration_optimum(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                                  const CoefficientBounds& bounds);

// Max of c0 + c·x over the 2^m vertices of the region's sampling box.
double box_vertex_max(const Eigen::VectorXd& coefficients, const NormBallRegion& region);


}  // namespace pacverify::fixtures

#endif  // PACVERIFY_TEST_SUPPORT_HPP
