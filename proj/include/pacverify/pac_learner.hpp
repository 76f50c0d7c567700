#ifndef PACVERIFY_PAC_LEARNER_HPP
#define PACVERIFY_PAC_LEARNER_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "pacverify/model_runtime.hpp"
#include "pacverify/sampler.hpp"
#include "pacverify/scenario_solver.hpp"

namespace pacverify {

/// Coarse-to-fine grouping of an image-shaped input for stepwise splitting.
///
/// Inputs are laid out channel-major: pixel (c, row, col) is input index
/// c*height*width + row*width + col. The initial partition is a
/// grid_rows × grid_cols tiling; when the image does not divide evenly the
/// last row/column of grids absorbs the remainder.
struct SplitConfig {
  int height = 0;
  int width = 0;
  int channels = 1;
  int grid_rows = 1;
  int grid_cols = 1;
  int iterations = 1;          // number of group-fit rounds
  long samples_per_iter = 2000;
  double top_fraction = 0.25;  // share of grids refined after each round
  bool lp_group_fits = false;  // group rounds use OLS unless set

  void validate(int input_dim) const;
};

struct LearnerConfig {
  double eta = 0.001;
  double epsilon = 0.01;
  long k1 = 2000;
  long k2 = 8000;
  long kappa = 32;
  CoefficientBounds bounds;
  ScoreMode mode = ScoreMode::targeted;
  long ols_threshold = 1024;  // phase 1 switches to OLS above this many free coefficients
  std::optional<SplitConfig> splitting;
  std::uint64_t master_seed = 0;
  long margin_samples = 0;  // 0 = the minimum count for (epsilon, eta)
  int threads = 1;

  void validate(int input_dim) const;
  long effective_margin_samples() const;
};

struct SplitRound {
  long free_groups = 0;   // groups fitted in this round
  long fixed_pixels = 0;  // pixels whose coefficient is settled after it
  double fit_residual = 0.0;
};

struct ComponentFit {
  int label = -1;  // output index, -1 for the untargeted component
  Eigen::VectorXd coefficients;
  std::vector<std::size_t> key_features;  // free indices in phase 2; stepwise fits index (intercept, final groups)
  bool phase1_ols = false;
  double phase1_residual = 0.0;
  double phase2_margin = 0.0;
  long samples = 0;  // oracle queries spent on this component
  std::vector<SplitRound> rounds;
};

struct Provenance {
  std::uint64_t master_seed = 0;
  long phase1_samples = 0;  // per component
  long phase2_samples = 0;  // per component
  long split_samples = 0;   // per component, all rounds
  long margin_samples = 0;
  long components = 0;
  double margin_epsilon = 0.0;  // error rate certified by the margin step
  long total_samples() const {
    return components * (phase1_samples + phase2_samples + split_samples) + margin_samples;
  }
};

/// Affine surrogate Δ̃ of the score difference on a region, with the margin λ
/// such that |Δ̃ - Δ| <= λ holds with probability 1-ε at confidence 1-η.
struct AffinePacModel {
  NormBallRegion region;
  int label = 0;
  ScoreMode mode = ScoreMode::targeted;
  std::vector<int> component_labels;
  std::vector<Eigen::VectorXd> components;  // each over (1, x_1, ..., x_m)
  double margin = 0.0;
  double eta = 0.0;
  double epsilon = 0.0;
  Provenance provenance;
  std::vector<ComponentFit> fits;

  bool epsilon_exceeded() const { return provenance.margin_epsilon > epsilon; }
  bool vacuous() const { return provenance.margin_epsilon > 1.0; }
};

// Indices of the `count` largest |coefficients|; equal magnitudes favor the
// lower index. The result is in ranking order.
std::vector<std::size_t> top_magnitude_indices(const Eigen::VectorXd& coefficients, std::size_t count);

// Two-phase focused fit of one component (`component` is an output index, or
// -1 for the untargeted score difference).
ComponentFit learn_component(Oracle& oracle, const NormBallRegion& region, int label, int component,
                             const LearnerConfig& config);

// Component-based learning followed by the resampled global margin.
AffinePacModel learn_pac_model(Oracle& oracle, const NormBallRegion& region, int label,
                               const LearnerConfig& config);

// Planned oracle queries of learn_pac_model for an oracle with `output_dim` outputs.
long planned_queries(const LearnerConfig& config, int input_dim, int output_dim);

struct Grid {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;

  bool operator==(const Grid&) const = default;
};
using GridPartition = std::vector<Grid>;

GridPartition initial_partition(int height, int width, int grid_rows, int grid_cols);
// Quadrants with ceiling first halves; a side of 1 is not split.
GridPartition split_grid(const Grid& grid);

// L2 norm of each grid's channel coefficients. `group_coeffs` is grids × channels.
std::vector<double> group_significance(const Eigen::MatrixXd& group_coeffs,
                                       const GridPartition& partition);

struct Refinement {
  GridPartition children;           // split pieces of the selected grids
  GridPartition retained;           // unselected grids, to be fixed
  std::vector<std::size_t> selected;  // indices into the input partition
};

Refinement refine_partition(const GridPartition& partition, const std::vector<double>& scores,
                            double top_fraction);

// Stepwise-splitting component fit. Requires config.splitting.
ComponentFit learn_component_stepwise(Oracle& oracle, const NormBallRegion& region, int label,
                                      int component, const LearnerConfig& config);

// learn_pac_model with every component learned by stepwise splitting.
AffinePacModel stepwise_split_learn(Oracle& oracle, const NormBallRegion& region, int label,
                                    const LearnerConfig& config);

}  // namespace pacverify

#endif  // PACVERIFY_PAC_LEARNER_HPP
