#include "test_support.hpp"

#include <algorithm>
#include <limits>

#include "pacverify/error.hpp"

namespace pacverify::fixtures {

AffineOracle::AffineOracle(Eigen::MatrixXd w, Eigen::VectorXd b)
    : Oracle(static_cast<int>(w.cols()), static_cast<int>(w.rows())), w_(std::move(w)), b_(std::move(b)) {}

Eigen::MatrixXd AffineOracle::evaluate_rows(const Eigen::MatrixXd& points) {
  Eigen::MatrixXd out = points * w_.transpose();
  out.rowwise() += b_.transpose();
  return out;
}

Eigen::MatrixXd FailingOracle::evaluate_rows(const Eigen::MatrixXd&) { throw OracleError("oracle is down"); }

ClassifierModel toy_model() {
  DenseLayer hidden{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2), Activation::relu};
  hidden.weights << 3, -10, 5, -4;
  hidden.bias << -9, -10;
  DenseLayer out{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2), Activation::identity};
  out.weights << 3, 1, 9, 7;
  out.bias << 14, -10;
  return ClassifierModel(2, {hidden, out});
}

ClassifierModel random_mlp(const std::vector<int>& widths, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t i = 1; i < widths.size(); ++i) {
    std::normal_distribution<double> w(0.0, 1.0 / std::sqrt(static_cast<double>(widths[i - 1])));
    std::normal_distribution<double> b(0.0, 0.1);
    DenseLayer layer{Eigen::MatrixXd(widths[i], widths[i - 1]), Eigen::VectorXd(widths[i]),
                     i + 1 == widths.size() ? Activation::identity : Activation::relu};
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = w(gen);
      layer.bias(r) = b(gen);
    }
    layers.push_back(std::move(layer));
  }
  return ClassifierModel(widths.front(), std::move(layers));
}

double vertex_enumeration_optimum(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                                  const CoefficientBounds& bounds) {
  const Eigen::Index K = design.rows();
  const Eigen::Index f = design.cols();
  const Eigen::Index n = f + 1;  // (c, λ)
  // Constraints G z <= h.
  Eigen::MatrixXd G(2 * K + 2 * f, n);
  Eigen::VectorXd h(2 * K + 2 * f);
  G.setZero();
  for (Eigen::Index s = 0; s < K; ++s) {
    G.row(s).head(f) = design.row(s);
    G(s, f) = -1.0;
    h(s) = targets(s);
    G.row(K + s).head(f) = -design.row(s);
    G(K + s, f) = -1.0;
    h(K + s) = -targets(s);
  }
  for (Eigen::Index j = 0; j < f; ++j) {
    G(2 * K + j, j) = 1.0;
    h(2 * K + j) = bounds.upper;
    G(2 * K + f + j, j) = -1.0;
    h(2 * K + f + j) = -bounds.lower;
  }
  const Eigen::Index rows = G.rows();
  double combos = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) combos = combos * static_cast<double>(rows - i) / static_cast<double>(i + 1);
  if (combos > 5e6) throw ParameterError("vertex enumeration size guard exceeded");
  double best = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) pick[static_cast<std::size_t>(i)] = i;
  while (true) {
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      A.row(i) = G.row(pick[static_cast<std::size_t>(i)]);
      b(i) = h(pick[static_cast<std::size_t>(i)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.isInvertible()) {
      const Eigen::VectorXd z = lu.solve(b);
      const double slack = ((G * z - h).array()).maxCoeff();
      if (slack <= 1e-9 * (1.0 + h.lpNorm<Eigen::Infinity>())) best = std::min(best, z(f));
    }
    // Next combination.
    Eigen::Index i = n - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == rows - n + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 1; j < n; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

double box_vertex_max(const Eigen::VectorXd& c, const NormBallRegion& region) {
  const Box box = region.sampling_box();
  const int m = region.dim();
  if (m > 20) throw ParameterError("vertex enumeration limited to m <= 20");
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd vertex(m);
  for (std::uint64_t mask = 0; mask < (1ULL << m); ++mask) {
    for (int j = 0; j < m; ++j) vertex(j) = ((mask >> j) & 1) ? box.hi(j) : box.lo(j);
    best = std::max(best, c(0) + c.tail(m).dot(vertex));
  }
  return best;
}

}  // namespace pacverify::fixtures
