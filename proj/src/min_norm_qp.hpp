#ifndef PACVERIFY_MIN_NORM_QP_HPP
#define PACVERIFY_MIN_NORM_QP_HPP

#include <Eigen/Dense>

namespace pacverify::detail {

struct MinNormResult {
  bool converged = false;
  Eigen::VectorXd x;
  long iterations = 0;
};

// min ½‖x‖²  s.t.  C x >= d, by the Goldfarb–Idnani dual active-set method.
// With an identity Hessian the unconstrained start is x = 0 and the factor J
// starts as the identity.
MinNormResult min_norm_point(const Eigen::MatrixXd& C, const Eigen::VectorXd& d);

}  // namespace pacverify::detail

#endif  // PACVERIFY_MIN_NORM_QP_HPP
