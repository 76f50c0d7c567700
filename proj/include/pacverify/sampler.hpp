#ifndef PACVERIFY_SAMPLER_HPP
#define PACVERIFY_SAMPLER_HPP

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

namespace pacverify {

struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

/// Closed L-infinity ball B(center, radius), optionally intersected with a
/// per-dimension clip box describing the valid input domain.
class NormBallRegion {
 public:
  NormBallRegion(Eigen::VectorXd center, double radius, std::optional<Box> clip = std::nullopt);

  const Eigen::VectorXd& center() const { return center_; }
  double radius() const { return radius_; }
  const std::optional<Box>& clip() const { return clip_; }
  int dim() const { return static_cast<int>(center_.size()); }

  // The axis-aligned box ball ∩ clip. Throws ParameterError when it is empty.
  Box sampling_box() const;
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  Eigen::VectorXd center_;
  double radius_;
  std::optional<Box> clip_;
};

// Builds a clip box with the same [lo, hi] for every dimension.
Box uniform_box(int dim, double lo, double hi);

/// Purpose tags that separate the independent sample streams of one run.
enum class StreamPurpose : std::uint64_t {
  user = 0,
  phase1 = 1,
  phase2 = 2,
  margin = 3,
  split_round = 4,
  baseline = 5,
  evaluation = 6,
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t stream_key(std::uint64_t master_seed, StreamPurpose purpose, std::uint64_t index);

/// Counter-based uniform stream over a box: row k depends only on (key, k).
/// Any chunking of the rows reproduces the same points.
class UniformStream {
 public:
  UniformStream(std::uint64_t key, Box box);

  Eigen::MatrixXd rows(std::uint64_t first, Eigen::Index count) const;
  std::uint64_t key() const { return key_; }
  const Box& box() const { return box_; }

 private:
  std::uint64_t key_;
  Box box_;
};

struct SampleBatch {
  Eigen::MatrixXd points;  // K × m
  std::uint64_t seed = 0;
  NormBallRegion region;
};

SampleBatch uniform_sample(const NormBallRegion& region, long count, std::uint64_t seed);

// Sample counts that make the scenario bound hold.
long required_samples_full(double epsilon, double eta, long input_dim, long output_dim);
long required_samples_margin(double epsilon, double eta);
long max_key_features(long phase2_samples, double epsilon, double eta);
// Error rate certified by K samples for a program with `decision_vars` variables.
// Values above 1 mean the guarantee is vacuous; callers flag it.
double achieved_epsilon(long samples, double eta, long decision_vars);

}  // namespace pacverify

#endif  // PACVERIFY_SAMPLER_HPP
