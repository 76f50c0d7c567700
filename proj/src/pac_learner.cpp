#include "pacverify/pac_learner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "learner_detail.hpp"
#include "pacverify/error.hpp"

namespace pacverify {

namespace detail {

Eigen::VectorXd component_target(const Eigen::MatrixXd& outputs, int label, int component) {
  if (component < 0) return score_targets(outputs, label, ScoreMode::untargeted).col(0);
  return outputs.col(component) - outputs.col(label);
}

std::uint64_t component_key(const LearnerConfig& config, std::size_t slot, StreamPurpose purpose,
                            std::uint64_t index) {
  return stream_key(mix_seed(config.master_seed, 0x636f6d70ULL + slot), purpose, index);
}

Eigen::VectorXd draw_targets(Oracle& oracle, const Eigen::MatrixXd& points, int label, int component) {
  return component_target(oracle.forward_batch(points), label, component);
}

FitResult checked_lp(const ChebyshevFitProblem& problem) {
  FitResult fit = solve_chebyshev_lp(problem);
  if (fit.status == FitStatus::infeasible) {
    throw SolverError("scenario LP infeasible under the coefficient bounds");
  }
  if (fit.status != FitStatus::optimal) throw SolverError("scenario LP did not converge");
  return fit;
}

std::size_t slot_of(const std::vector<int>& labels, int component) {
  auto it = std::find(labels.begin(), labels.end(), component);
  if (it == labels.end()) throw ParameterError("component " + std::to_string(component) + " is not valid for the label");
  return static_cast<std::size_t>(it - labels.begin());
}

}  // namespace detail

namespace {

constexpr Eigen::Index kChunk = 1024;

void check_label(const Oracle& oracle, int label) {
  if (label < 0 || label >= oracle.output_dim()) {
    throw ParameterError("label " + std::to_string(label) + " outside [0, " +
                         std::to_string(oracle.output_dim()) + ")");
  }
  if (oracle.output_dim() < 2) throw ParameterError("the oracle needs at least two outputs");
}

void check_region(const Oracle& oracle, const NormBallRegion& region) {
  if (region.dim() != oracle.input_dim()) {
    throw DimensionError("region has dimension " + std::to_string(region.dim()) + ", oracle expects " +
                         std::to_string(oracle.input_dim()));
  }
}

}  // namespace

void SplitConfig::validate(int input_dim) const {
  if (height < 1 || width < 1) throw ParameterError("split image height and width must be positive");
  if (channels < 1) throw ParameterError("split channels must be positive");
  if (static_cast<long>(channels) * height * width != input_dim) {
    throw DimensionError("split shape " + std::to_string(channels) + "x" + std::to_string(height) + "x" +
                         std::to_string(width) + " does not match input dimension " +
                         std::to_string(input_dim));
  }
  if (grid_rows < 1 || grid_cols < 1 || grid_rows > height || grid_cols > width) {
    throw ParameterError("initial grid counts must lie in [1, image side]");
  }
  if (iterations < 1) throw ParameterError("split iterations must be at least 1");
  if (samples_per_iter < 1) throw ParameterError("split samples per iteration must be at least 1");
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw ParameterError("top_fraction must lie in (0, 1]");
}

void LearnerConfig::validate(int input_dim) const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ParameterError("epsilon must lie in (0, 1]");
  if (!(eta > 0.0 && eta < 1.0)) throw ParameterError("eta must lie in (0, 1)");
  if (k1 < 1 || k2 < 1) throw ParameterError("K1 and K2 must be at least 1");
  if (kappa < 1) throw ParameterError("kappa must be at least 1");
  const long budget = max_key_features(k2, epsilon, eta);
  if (kappa > budget) {
    throw ParameterError("kappa " + std::to_string(kappa) + " exceeds the " + std::to_string(budget) +
                         " key features K2=" + std::to_string(k2) + " supports");
  }
  if (!(bounds.lower <= bounds.upper)) throw ParameterError("coefficient bounds have L > U");
  if (ols_threshold < 1) throw ParameterError("ols_threshold must be at least 1");
  if (margin_samples < 0) throw ParameterError("margin sample count must be nonnegative");
  if (threads < 1) throw ParameterError("threads must be at least 1");
  if (input_dim < 1) throw DimensionError("input dimension must be positive");
  if (splitting) splitting->validate(input_dim);
}

long LearnerConfig::effective_margin_samples() const {
  return margin_samples > 0 ? margin_samples : required_samples_margin(epsilon, eta);
}

std::vector<std::size_t> top_magnitude_indices(const Eigen::VectorXd& coefficients, std::size_t count) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(coefficients.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  count = std::min(count, idx.size());
  auto before = [&](std::size_t a, std::size_t b) {
    const double fa = std::abs(coefficients(static_cast<Eigen::Index>(a)));
    const double fb = std::abs(coefficients(static_cast<Eigen::Index>(b)));
    return fa > fb || (fa == fb && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(), before);
  idx.resize(count);
  return idx;
}

ComponentFit detail::learn_component_slot(Oracle& oracle, const NormBallRegion& region, int label,
                                          int component, std::size_t slot, const LearnerConfig& config) {
  const int m = region.dim();
  const Box box = region.sampling_box();
  ComponentFit fit;
  fit.label = component;

  // Phase 1: every coefficient free.
  const UniformStream s1(component_key(config, slot, StreamPurpose::phase1, 0), box);
  const Eigen::MatrixXd x1 = s1.rows(0, config.k1);
  const Eigen::VectorXd y1 = draw_targets(oracle, x1, label, component);
  fit.samples += config.k1;

  Eigen::VectorXd c1(m + 1);
  if (m + 1 > config.ols_threshold) {
    // Least squares in box-normalized coordinates, mapped back afterwards.
    fit.phase1_ols = true;
    const Eigen::VectorXd mid = (box.lo + box.hi) / 2.0;
    Eigen::VectorXd half = (box.hi - box.lo) / 2.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (half(j) <= 0.0) half(j) = 1.0;
    }
    Eigen::MatrixXd design(x1.rows(), m + 1);
    design.col(0).setOnes();
    design.rightCols(m) = (x1.rowwise() - mid.transpose()).array().rowwise() / half.transpose().array();
    const Eigen::VectorXd z = least_squares_fit(design, y1);
    c1.tail(m) = z.tail(m).cwiseQuotient(half);
    c1(0) = z(0) - c1.tail(m).dot(mid);
    fit.phase1_residual = (evaluate_affine(c1, x1) - y1).lpNorm<Eigen::Infinity>();
  } else {
    ChebyshevFitProblem p;
    p.design.resize(x1.rows(), m + 1);
    p.design.col(0).setOnes();
    p.design.rightCols(m) = x1;
    p.targets = y1;
    p.free_idx.resize(static_cast<std::size_t>(m + 1));
    std::iota(p.free_idx.begin(), p.free_idx.end(), std::size_t{0});
    p.bounds = config.bounds;
    const FitResult r = checked_lp(p);
    c1 = r.coefficients;
    fit.phase1_residual = r.margin;
  }

  // Phase 2: fresh samples, only the key features free.
  fit.key_features = top_magnitude_indices(c1, static_cast<std::size_t>(config.kappa));
  std::vector<std::size_t> free = fit.key_features;
  std::sort(free.begin(), free.end());
  std::vector<char> is_free(static_cast<std::size_t>(m + 1), 0);
  for (std::size_t j : free) is_free[j] = 1;
  Eigen::VectorXd fixed_part = c1;
  for (std::size_t j : free) fixed_part(static_cast<Eigen::Index>(j)) = 0.0;
  const bool any_fixed = free.size() < static_cast<std::size_t>(m + 1);

  const UniformStream s2(component_key(config, slot, StreamPurpose::phase2, 0), box);
  ChebyshevFitProblem p;
  p.design.resize(config.k2, static_cast<Eigen::Index>(free.size()));
  p.targets.resize(config.k2);
  if (any_fixed) p.offset.resize(config.k2);
  for (Eigen::Index first = 0; first < config.k2; first += kChunk) {
    const Eigen::Index count = std::min<Eigen::Index>(kChunk, config.k2 - first);
    const Eigen::MatrixXd x = s2.rows(static_cast<std::uint64_t>(first), count);
    p.targets.segment(first, count) = draw_targets(oracle, x, label, component);
    for (std::size_t k = 0; k < free.size(); ++k) {
      const Eigen::Index col = static_cast<Eigen::Index>(k);
      if (free[k] == 0) {
        p.design.block(first, col, count, 1).setOnes();
      } else {
        p.design.block(first, col, count, 1) = x.col(static_cast<Eigen::Index>(free[k]) - 1);
      }
    }
    if (any_fixed) p.offset.segment(first, count) = evaluate_affine(fixed_part, x);
  }
  fit.samples += config.k2;
  p.free_idx = free;
  p.fixed_coeffs = c1;
  p.bounds = config.bounds;
  const FitResult r2 = checked_lp(p);
  fit.coefficients = r2.coefficients;
  fit.phase2_margin = r2.margin;
  return fit;
}

ComponentFit learn_component(Oracle& oracle, const NormBallRegion& region, int label, int component,
                             const LearnerConfig& config) {
  check_label(oracle, label);
  check_region(oracle, region);
  config.validate(region.dim());
  const std::vector<int> labels = component_labels(oracle.output_dim(), label, config.mode);
  return detail::learn_component_slot(oracle, region, label, component, detail::slot_of(labels, component),
                                      config);
}

AffinePacModel detail::learn_model(Oracle& oracle, const NormBallRegion& region, int label,
                                   const LearnerConfig& config, bool stepwise) {
  check_label(oracle, label);
  check_region(oracle, region);
  config.validate(region.dim());
  if (stepwise && !config.splitting) throw ParameterError("stepwise splitting needs a split configuration");
  const Box box = region.sampling_box();

  const std::vector<int> labels = component_labels(oracle.output_dim(), label, config.mode);
  std::vector<ComponentFit> fits(labels.size());
  std::vector<std::exception_ptr> failures(labels.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < labels.size(); i = next++) {
      try {
        fits[i] = stepwise ? learn_stepwise_slot(oracle, region, label, labels[i], i, config)
                           : learn_component_slot(oracle, region, label, labels[i], i, config);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), labels.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  AffinePacModel model{region, label, config.mode, labels, {}, 0.0, config.eta, config.epsilon, {}, {}};
  for (const auto& f : fits) model.components.push_back(f.coefficients);

  // Global margin on fresh samples.
  const long km = config.effective_margin_samples();
  const UniformStream sm(stream_key(config.master_seed, StreamPurpose::margin, 0), box);
  double lambda = 0.0;
  for (Eigen::Index first = 0; first < km; first += kChunk) {
    const Eigen::Index count = std::min<Eigen::Index>(kChunk, km - first);
    const Eigen::MatrixXd x = sm.rows(static_cast<std::uint64_t>(first), count);
    lambda = std::max(lambda, residual_margin(model.components, x, oracle, label, config.mode));
  }
  model.margin = lambda;

  Provenance& prov = model.provenance;
  prov.master_seed = config.master_seed;
  prov.components = static_cast<long>(labels.size());
  prov.margin_samples = km;
  if (stepwise) {
    prov.split_samples = static_cast<long>(config.splitting->iterations) * config.splitting->samples_per_iter;
  } else {
    prov.phase1_samples = config.k1;
  }
  prov.phase2_samples = config.k2;
  prov.margin_epsilon = achieved_epsilon(km, config.eta, 1);
  model.fits = std::move(fits);
  return model;
}

AffinePacModel learn_pac_model(Oracle& oracle, const NormBallRegion& region, int label,
                               const LearnerConfig& config) {
  return detail::learn_model(oracle, region, label, config, config.splitting.has_value());
}

AffinePacModel stepwise_split_learn(Oracle& oracle, const NormBallRegion& region, int label,
                                    const LearnerConfig& config) {
  return detail::learn_model(oracle, region, label, config, true);
}

long planned_queries(const LearnerConfig& config, int input_dim, int output_dim) {
  config.validate(input_dim);
  if (output_dim < 2) throw ParameterError("the oracle needs at least two outputs");
  const long components = config.mode == ScoreMode::untargeted ? 1 : output_dim - 1;
  const long per = config.splitting
                       ? static_cast<long>(config.splitting->iterations) * config.splitting->samples_per_iter
                       : config.k1;
  return components * (per + config.k2) + config.effective_margin_samples();
}

}  // namespace pacverify
