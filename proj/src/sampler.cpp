#include "pacverify/sampler.hpp"

#include <cmath>
#include <string>

#include "pacverify/error.hpp"

namespace pacverify {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Values within this distance of an integer round to it; formula inputs such
// as eta = exp(-1) otherwise land one ulp on the wrong side.
constexpr double kIntegerSlack = 1e-9;

long ceil_count(double v) { return static_cast<long>(std::ceil(v - kIntegerSlack)); }

void check_epsilon_eta(double epsilon, double eta) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw ParameterError("epsilon must lie in (0, 1], got " + std::to_string(epsilon));
  }
  if (!(eta > 0.0 && eta < 1.0)) {
    throw ParameterError("eta must lie in (0, 1), got " + std::to_string(eta));
  }
}

}  // namespace

NormBallRegion::NormBallRegion(Eigen::VectorXd center, double radius, std::optional<Box> clip)
    : center_(std::move(center)), radius_(radius), clip_(std::move(clip)) {
  if (center_.size() == 0) throw DimensionError("region center is empty");
  if (!center_.allFinite()) throw ParameterError("region center is not finite");
  if (!(radius_ > 0.0) || !std::isfinite(radius_)) {
    throw ParameterError("radius must be positive and finite");
  }
  if (clip_) {
    if (clip_->lo.size() != center_.size() || clip_->hi.size() != center_.size()) {
      throw DimensionError("clip box dimension does not match the center");
    }
    if ((clip_->lo.array() > clip_->hi.array()).any()) {
      throw ParameterError("clip box has lo > hi");
    }
  }
}

Box NormBallRegion::sampling_box() const {
  Box box{center_.array() - radius_, center_.array() + radius_};
  if (clip_) {
    box.lo = box.lo.cwiseMax(clip_->lo);
    box.hi = box.hi.cwiseMin(clip_->hi);
    if ((box.lo.array() > box.hi.array()).any()) {
      throw ParameterError("ball and clip box do not intersect");
    }
  }
  return box;
}

bool NormBallRegion::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != center_.size()) return false;
  // Same arithmetic as sampling_box, so its corners count as inside.
  if ((x.array() < center_.array() - radius_).any() || (x.array() > center_.array() + radius_).any()) {
    return false;
  }
  if (clip_ && ((x.array() < clip_->lo.array()).any() || (x.array() > clip_->hi.array()).any())) {
    return false;
  }
  return true;
}

Box uniform_box(int dim, double lo, double hi) {
  return Box{Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi)};
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(a + kGolden) ^ (b * kGolden + 0x632be59bd9b4e019ULL));
}

std::uint64_t stream_key(std::uint64_t master_seed, StreamPurpose purpose, std::uint64_t index) {
  return mix_seed(mix_seed(master_seed, static_cast<std::uint64_t>(purpose)), index);
}

UniformStream::UniformStream(std::uint64_t key, Box box) : key_(key), box_(std::move(box)) {}

Eigen::MatrixXd UniformStream::rows(std::uint64_t first, Eigen::Index count) const {
  const Eigen::Index m = box_.lo.size();
  const Eigen::VectorXd width = box_.hi - box_.lo;
  Eigen::MatrixXd out(count, m);
  for (Eigen::Index r = 0; r < count; ++r) {
    std::uint64_t state = mix_seed(key_, first + static_cast<std::uint64_t>(r));
    for (Eigen::Index j = 0; j < m; ++j) {
      state += kGolden;
      double u = to_unit(splitmix(state));
      // lo + u*width can round past hi for tiny widths; clamp keeps the box exact.
      out(r, j) = std::min(box_.lo(j) + u * width(j), box_.hi(j));
    }
  }
  return out;
}

SampleBatch uniform_sample(const NormBallRegion& region, long count, std::uint64_t seed) {
  if (count < 1) throw ParameterError("sample count must be at least 1");
  UniformStream stream(stream_key(seed, StreamPurpose::user, 0), region.sampling_box());
  return SampleBatch{stream.rows(0, count), seed, region};
}

long required_samples_full(double epsilon, double eta, long input_dim, long output_dim) {
  check_epsilon_eta(epsilon, eta);
  if (input_dim < 1) throw ParameterError("input dimension must be at least 1");
  if (output_dim < 2) throw ParameterError("output dimension must be at least 2");
  const double vars = static_cast<double>(input_dim + 1) * static_cast<double>(output_dim - 1) + 1.0;
  return ceil_count(2.0 / epsilon * (std::log(1.0 / eta) + vars));
}

long required_samples_margin(double epsilon, double eta) {
  check_epsilon_eta(epsilon, eta);
  return ceil_count(2.0 / epsilon * (std::log(1.0 / eta) + 1.0));
}

long max_key_features(long phase2_samples, double epsilon, double eta) {
  check_epsilon_eta(epsilon, eta);
  if (phase2_samples < 1) throw ParameterError("phase-2 sample count must be at least 1");
  const double bound =
      static_cast<double>(phase2_samples) * epsilon / 2.0 - std::log(1.0 / eta) - 1.0;
  const long kappa = static_cast<long>(std::floor(bound + kIntegerSlack));
  if (kappa < 1) {
    throw ParameterError(std::to_string(phase2_samples) +
                         " phase-2 samples cannot support any key feature");
  }
  return kappa;
}

double achieved_epsilon(long samples, double eta, long decision_vars) {
  if (samples < 1) throw ParameterError("sample count must be at least 1");
  if (decision_vars < 1) throw ParameterError("decision variable count must be at least 1");
  if (!(eta > 0.0 && eta < 1.0)) throw ParameterError("eta must lie in (0, 1)");
  return 2.0 / static_cast<double>(samples) *
         (std::log(1.0 / eta) + static_cast<double>(decision_vars));
}

}  // namespace pacverify
