#ifndef PACVERIFY_ANALYZER_HPP
#define PACVERIFY_ANALYZER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pacverify/model_runtime.hpp"
#include "pacverify/pac_learner.hpp"
#include "pacverify/sampler.hpp"

namespace pacverify {

enum class Verdict { pac_model_robust, not_verified };
const char* to_string(Verdict v);

struct BallExtreme {
  Eigen::VectorXd point;
  double value = 0.0;
};

// Maximizer of c0 + c·x over the region: x_j at the upper end when c_j > 0,
// otherwise the lower end (zero slopes included), within the clip box.
BallExtreme maximize_affine_on_ball(const Eigen::VectorXd& coefficients, const NormBallRegion& region);
BallExtreme minimize_affine_on_ball(const Eigen::VectorXd& coefficients, const NormBallRegion& region);

struct ComponentCheck {
  int label = -1;             // output index, -1 untargeted
  Eigen::VectorXd max_point;  // untargeted: the minimizer of Δ̃_u
  double max_value = 0.0;     // targeted Δ̃_i(x̆)+λ; untargeted λ-min Δ̃_u
  bool candidate = false;     // max_value >= 0
  bool validated = false;     // oracle confirms the point leaves the label
  std::optional<double> true_value;  // Δ_i (or Δ_u) at max_point, once queried
};

struct Candidate {
  Eigen::VectorXd point;
  int component = -1;
  bool validated = false;
  double true_value = 0.0;
};

struct RobustnessReport {
  Verdict verdict = Verdict::not_verified;
  int label = 0;
  ScoreMode mode = ScoreMode::targeted;
  std::vector<ComponentCheck> components;
  std::vector<Candidate> candidates;
  double margin = 0.0;
  double eta = 0.0;
  double epsilon = 0.0;
  std::uint64_t query_count = 0;
  double seconds = 0.0;
  std::vector<std::string> flags;
};

RobustnessReport check_pac_model_robustness(const AffinePacModel& model);

// Queries every component's extreme point. A point is validated when the
// true Δ_i >= 0 (untargeted: Δ_u <= 0).
std::vector<Candidate> extract_and_validate_candidates(const AffinePacModel& model, Oracle& oracle);

struct PipelineConfig {
  LearnerConfig learner;
  std::optional<int> label;  // defaults to classify(center)
  bool validate_candidates = true;
};

struct PipelineResult {
  AffinePacModel model;
  RobustnessReport report;
};

// Learn + check + validate on one region.
PipelineResult verify_region(Oracle& oracle, const NormBallRegion& region, const PipelineConfig& config);

struct RadiusScale {
  enum class Kind { int8, continuous };
  Kind kind = Kind::int8;
  double tolerance = 1.0 / 255.0;  // continuous step

  static RadiusScale int8_steps() { return {}; }
  static RadiusScale continuous_steps(double tolerance) { return {Kind::continuous, tolerance}; }
  void validate() const;
};

struct RadiusProbe {
  double radius = 0.0;  // actual ball radius
  Verdict verdict = Verdict::not_verified;
  std::string error;    // set when the pipeline failed; counts as not verified
};

struct RadiusResult {
  double radius = 0.0;        // on the search scale (int8: steps out of 255)
  double actual_radius = 0.0; // same value as a ball radius
  RadiusScale scale;
  bool found = false;         // false: the sentinel below r_lo was returned
  std::vector<RadiusProbe> verified_at;
};

// Monotone bisection for the largest robust point of the scale between r_lo
// and r_hi (both in scale units). r_lo = 0 is taken as robust without a probe.
RadiusResult bisect_radius(double r_lo, double r_hi, const RadiusScale& scale,
                           const std::function<RadiusProbe(double radius)>& probe);

// Each probe runs the full pipeline with its seed mixed from the radius.
RadiusResult max_robust_radius(Oracle& oracle, const Eigen::VectorXd& center, const std::optional<Box>& clip,
                               const PipelineConfig& config, double r_lo, double r_hi,
                               const RadiusScale& scale = {});

struct RateEntry {
  Verdict verdict = Verdict::not_verified;
  int label = -1;
  double margin = 0.0;
  std::string error;
};

struct RateResult {
  double rate = 0.0;
  std::vector<RateEntry> entries;
};

// Per-input seeds are mixed from the master seed and the input index.
RateResult robustness_rate(Oracle& oracle, const std::vector<Eigen::VectorXd>& inputs, double radius,
                           const std::optional<Box>& clip, const PipelineConfig& config);

struct BaselineResult {
  bool robust = true;
  long samples = 0;
  std::optional<Eigen::VectorXd> witness;
  int witness_label = -1;
};

long baseline_sample_count(double epsilon, double eta);
BaselineResult baseline_pac_sample_check(Oracle& oracle, const NormBallRegion& region, int label, double epsilon,
                                         double eta, std::uint64_t seed = 0);

// (2rL/(2rL-δ))^m · Π_i(1 - min_j|a_ji|/L) · ε. `components` are full
// templates; their intercepts are ignored. Diagnostic only.
double adversarial_mass_bound(const std::vector<Eigen::VectorXd>& components, double delta, double lipschitz,
                              double radius, double epsilon);
// δ is the largest per-component max value of the report.
double adversarial_mass_bound(const AffinePacModel& model, const RobustnessReport& report, double lipschitz);

}  // namespace pacverify

#endif  // PACVERIFY_ANALYZER_HPP
