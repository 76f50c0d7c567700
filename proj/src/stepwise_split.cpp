#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "learner_detail.hpp"
#include "pacverify/error.hpp"
#include "pacverify/pac_learner.hpp"

namespace pacverify {

GridPartition initial_partition(int height, int width, int grid_rows, int grid_cols) {
  if (height < 1 || width < 1) throw ParameterError("image sides must be positive");
  if (grid_rows < 1 || grid_cols < 1 || grid_rows > height || grid_cols > width) {
    throw ParameterError("grid counts must lie in [1, image side]");
  }
  const int bh = height / grid_rows;
  const int bw = width / grid_cols;
  GridPartition out;
  out.reserve(static_cast<std::size_t>(grid_rows) * grid_cols);
  for (int i = 0; i < grid_rows; ++i) {
    const int h = i + 1 == grid_rows ? height - bh * (grid_rows - 1) : bh;
    for (int j = 0; j < grid_cols; ++j) {
      const int w = j + 1 == grid_cols ? width - bw * (grid_cols - 1) : bw;
      out.push_back(Grid{i * bh, j * bw, h, w});
    }
  }
  return out;
}

GridPartition split_grid(const Grid& g) {
  if (g.height < 1 || g.width < 1) throw ParameterError("grid with an empty side");
  std::vector<std::pair<int, int>> rows{{g.row, g.height}};
  std::vector<std::pair<int, int>> cols{{g.col, g.width}};
  if (g.height >= 2) {
    const int h1 = (g.height + 1) / 2;
    rows = {{g.row, h1}, {g.row + h1, g.height - h1}};
  }
  if (g.width >= 2) {
    const int w1 = (g.width + 1) / 2;
    cols = {{g.col, w1}, {g.col + w1, g.width - w1}};
  }
  GridPartition out;
  for (const auto& [r, h] : rows) {
    for (const auto& [c, w] : cols) out.push_back(Grid{r, c, h, w});
  }
  return out;
}

std::vector<double> group_significance(const Eigen::MatrixXd& group_coeffs, const GridPartition& partition) {
  if (group_coeffs.rows() != static_cast<Eigen::Index>(partition.size())) {
    throw DimensionError("group coefficients have " + std::to_string(group_coeffs.rows()) + " rows for " +
                         std::to_string(partition.size()) + " grids");
  }
  if (group_coeffs.cols() < 1) throw DimensionError("group coefficients need at least one channel");
  std::vector<double> scores(partition.size());
  for (Eigen::Index k = 0; k < group_coeffs.rows(); ++k) {
    scores[static_cast<std::size_t>(k)] = group_coeffs.row(k).norm();
  }
  return scores;
}

Refinement refine_partition(const GridPartition& partition, const std::vector<double>& scores,
                            double top_fraction) {
  if (partition.empty()) throw ParameterError("cannot refine an empty partition");
  if (scores.size() != partition.size()) throw DimensionError("one score per grid is required");
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw ParameterError("top_fraction must lie in (0, 1]");
  const std::size_t n = partition.size();
  const auto want = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(n) - 1e-9));
  const std::size_t count = std::clamp<std::size_t>(want, 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Refinement out;
  out.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));

  std::vector<char> chosen(n, 0);
  for (std::size_t k : out.selected) chosen[k] = 1;
  bool split_any = false;
  for (std::size_t k = 0; k < n; ++k) {
    if (!chosen[k]) {
      out.retained.push_back(partition[k]);
      continue;
    }
    const GridPartition pieces = split_grid(partition[k]);
    split_any = split_any || pieces.size() > 1;
    out.children.insert(out.children.end(), pieces.begin(), pieces.end());
  }
  if (!split_any) throw ParameterError("none of the selected grids can be split");
  return out;
}

namespace {

constexpr Eigen::Index kChunk = 1024;

struct Groups {
  std::vector<std::vector<Eigen::Index>> pixels;  // input indices per (grid, channel)
};

Groups build_groups(const GridPartition& partition, const SplitConfig& s) {
  Groups g;
  for (const Grid& grid : partition) {
    for (int ch = 0; ch < s.channels; ++ch) {
      std::vector<Eigen::Index> members;
      members.reserve(static_cast<std::size_t>(grid.height) * grid.width);
      for (int r = grid.row; r < grid.row + grid.height; ++r) {
        for (int c = grid.col; c < grid.col + grid.width; ++c) {
          members.push_back((static_cast<Eigen::Index>(ch) * s.height + r) * s.width + c);
        }
      }
      g.pixels.push_back(std::move(members));
    }
  }
  return g;
}

// Sum of member pixels for every group, one column per group.
Eigen::MatrixXd group_sums(const Eigen::MatrixXd& x, const Groups& groups) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(groups.pixels.size()));
  for (std::size_t k = 0; k < groups.pixels.size(); ++k) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.rows());
    for (Eigen::Index p : groups.pixels[k]) acc += x.col(p);
    out.col(static_cast<Eigen::Index>(k)) = acc;
  }
  return out;
}

bool can_split(const GridPartition& partition, const std::vector<double>& scores, double top_fraction) {
  try {
    refine_partition(partition, scores, top_fraction);
    return true;
  } catch (const ParameterError&) {
    return false;
  }
}

}  // namespace

ComponentFit detail::learn_stepwise_slot(Oracle& oracle, const NormBallRegion& region, int label,
                                         int component, std::size_t slot, const LearnerConfig& config) {
  const SplitConfig& s = *config.splitting;
  const int m = region.dim();
  const Box box = region.sampling_box();
  const Eigen::VectorXd mid = (box.lo + box.hi) / 2.0;
  const Eigen::VectorXd half = (box.hi - box.lo) / 2.0;

  ComponentFit fit;
  fit.label = component;
  Eigen::VectorXd pixel = Eigen::VectorXd::Zero(m);  // settled per-pixel coefficients
  long fixed_pixels = 0;
  GridPartition active = initial_partition(s.height, s.width, s.grid_rows, s.grid_cols);
  double intercept = 0.0;
  Eigen::VectorXd group_coef;
  Groups groups;

  for (int round = 0; round < s.iterations; ++round) {
    groups = build_groups(active, s);
    const auto G = static_cast<Eigen::Index>(groups.pixels.size());
    const UniformStream stream(component_key(config, slot, StreamPurpose::split_round, round), box);

    // Normalize each group-sum column by its box midpoint and spread.
    Eigen::VectorXd shift(G), scale(G);
    for (Eigen::Index k = 0; k < G; ++k) {
      double a = 0.0, b = 0.0;
      for (Eigen::Index p : groups.pixels[static_cast<std::size_t>(k)]) {
        a += mid(p);
        b += half(p) * half(p);
      }
      shift(k) = a;
      scale(k) = b > 0.0 ? std::sqrt(b) : 1.0;
    }

    const Eigen::Index S = s.samples_per_iter;
    Eigen::MatrixXd design(S, G + 1);
    Eigen::VectorXd target(S);
    design.col(0).setOnes();
    for (Eigen::Index first = 0; first < S; first += kChunk) {
      const Eigen::Index count = std::min<Eigen::Index>(kChunk, S - first);
      const Eigen::MatrixXd x = stream.rows(static_cast<std::uint64_t>(first), count);
      target.segment(first, count) = draw_targets(oracle, x, label, component) - x * pixel;
      design.block(first, 1, count, G) = group_sums(x, groups);
    }
    fit.samples += S;

    Eigen::VectorXd coef(G + 1);
    if (s.lp_group_fits) {
      ChebyshevFitProblem p;
      p.design = design;
      p.targets = target;
      p.free_idx.resize(static_cast<std::size_t>(G + 1));
      std::iota(p.free_idx.begin(), p.free_idx.end(), std::size_t{0});
      p.bounds = config.bounds;
      coef = checked_lp(p).coefficients;
    } else {
      Eigen::MatrixXd scaled = design;
      for (Eigen::Index k = 0; k < G; ++k) {
        scaled.col(k + 1) = (design.col(k + 1).array() - shift(k)) / scale(k);
      }
      const Eigen::VectorXd z = least_squares_fit(scaled, target);
      coef.tail(G) = z.tail(G).cwiseQuotient(scale);
      coef(0) = z(0) - coef.tail(G).dot(shift);
    }
    intercept = coef(0);
    group_coef = coef.tail(G);

    SplitRound info;
    info.free_groups = static_cast<long>(G);
    info.fit_residual = (design * coef - target).lpNorm<Eigen::Infinity>();

    if (round + 1 < s.iterations) {
      const Eigen::MatrixXd per_grid =
          Eigen::Map<const Eigen::MatrixXd>(group_coef.data(), s.channels, static_cast<Eigen::Index>(active.size()))
              .transpose();
      const std::vector<double> scores = group_significance(per_grid, active);
      if (!can_split(active, scores, s.top_fraction)) {
        info.fixed_pixels = fixed_pixels;
        fit.rounds.push_back(info);
        break;
      }
      const Refinement ref = refine_partition(active, scores, s.top_fraction);
      std::vector<char> chosen(active.size(), 0);
      for (std::size_t k : ref.selected) chosen[k] = 1;
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (chosen[k]) continue;
        for (int ch = 0; ch < s.channels; ++ch) {
          const std::size_t gi = k * static_cast<std::size_t>(s.channels) + ch;
          for (Eigen::Index p : groups.pixels[gi]) pixel(p) = group_coef(static_cast<Eigen::Index>(gi));
          fixed_pixels += static_cast<long>(groups.pixels[gi].size());
        }
      }
      active = ref.children;
    }
    info.fixed_pixels = fixed_pixels;
    fit.rounds.push_back(info);
  }

  // Focused LP over the intercept and the remaining groups.
  const auto G = static_cast<Eigen::Index>(groups.pixels.size());
  Eigen::VectorXd candidate(G + 1);
  candidate(0) = intercept;
  candidate.tail(G) = group_coef;
  std::vector<std::size_t> free = top_magnitude_indices(candidate, static_cast<std::size_t>(config.kappa));
  std::sort(free.begin(), free.end());
  std::vector<char> is_free(static_cast<std::size_t>(G + 1), 0);
  for (std::size_t j : free) is_free[j] = 1;

  // Pixels of unselected groups keep their last group coefficient.
  Eigen::VectorXd settled = pixel;
  for (Eigen::Index k = 0; k < G; ++k) {
    if (is_free[static_cast<std::size_t>(k + 1)]) continue;
    for (Eigen::Index p : groups.pixels[static_cast<std::size_t>(k)]) settled(p) = group_coef(k);
  }
  const double fixed_intercept = is_free[0] ? 0.0 : intercept;

  const UniformStream s2(component_key(config, slot, StreamPurpose::phase2, 0), box);
  ChebyshevFitProblem p;
  p.design.resize(config.k2, static_cast<Eigen::Index>(free.size()));
  p.targets.resize(config.k2);
  p.offset.resize(config.k2);
  Groups chosen_groups;
  for (std::size_t j : free) {
    if (j > 0) chosen_groups.pixels.push_back(groups.pixels[j - 1]);
  }
  for (Eigen::Index first = 0; first < config.k2; first += kChunk) {
    const Eigen::Index count = std::min<Eigen::Index>(kChunk, config.k2 - first);
    const Eigen::MatrixXd x = s2.rows(static_cast<std::uint64_t>(first), count);
    p.targets.segment(first, count) = draw_targets(oracle, x, label, component);
    p.offset.segment(first, count) = (x * settled).array() + fixed_intercept;
    const Eigen::MatrixXd sums = group_sums(x, chosen_groups);
    Eigen::Index col = 0, gcol = 0;
    for (std::size_t j : free) {
      if (j == 0) {
        p.design.block(first, col, count, 1).setOnes();
      } else {
        p.design.block(first, col, count, 1) = sums.col(gcol++);
      }
      ++col;
    }
  }
  fit.samples += config.k2;
  p.free_idx = free;
  p.fixed_coeffs = candidate;
  p.bounds = config.bounds;
  const FitResult r = checked_lp(p);
  fit.phase2_margin = r.margin;

  fit.coefficients.resize(m + 1);
  fit.coefficients(0) = r.coefficients(0);
  fit.coefficients.tail(m) = settled;
  for (std::size_t j : free) {
    if (j == 0) continue;
    for (Eigen::Index px : groups.pixels[j - 1]) fit.coefficients(px + 1) = r.coefficients(static_cast<Eigen::Index>(j));
  }
  fit.key_features = free;
  return fit;
}

ComponentFit learn_component_stepwise(Oracle& oracle, const NormBallRegion& region, int label, int component,
                                      const LearnerConfig& config) {
  if (!config.splitting) throw ParameterError("stepwise splitting needs a split configuration");
  if (label < 0 || label >= oracle.output_dim()) throw ParameterError("label outside the oracle's outputs");
  if (region.dim() != oracle.input_dim()) throw DimensionError("region dimension does not match the oracle");
  config.validate(region.dim());
  const std::vector<int> labels = component_labels(oracle.output_dim(), label, config.mode);
  return detail::learn_stepwise_slot(oracle, region, label, component, detail::slot_of(labels, component), config);
}

}  // namespace pacverify
