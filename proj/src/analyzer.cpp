#include "pacverify/analyzer.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "learner_detail.hpp"
#include "pacverify/error.hpp"

namespace pacverify {

const char* to_string(Verdict v) {
  return v == Verdict::pac_model_robust ? "pac_model_robust" : "not_verified";
}

namespace {

void check_template(const Eigen::VectorXd& c, const NormBallRegion& region) {
  if (c.size() != region.dim() + 1) {
    throw DimensionError("affine template has " + std::to_string(c.size()) + " coefficients for a region of dimension " +
                         std::to_string(region.dim()));
  }
}

BallExtreme extreme(const Eigen::VectorXd& c, const NormBallRegion& region, bool maximize) {
  check_template(c, region);
  const Box box = region.sampling_box();
  BallExtreme out;
  out.point.resize(region.dim());
  for (Eigen::Index j = 0; j < region.dim(); ++j) {
    const double slope = c(j + 1);
    const bool up = maximize ? slope > 0.0 : slope < 0.0;
    out.point(j) = up ? box.hi(j) : box.lo(j);
  }
  out.value = c(0) + c.tail(region.dim()).dot(out.point);
  return out;
}

}  // namespace

BallExtreme maximize_affine_on_ball(const Eigen::VectorXd& coefficients, const NormBallRegion& region) {
  return extreme(coefficients, region, true);
}

BallExtreme minimize_affine_on_ball(const Eigen::VectorXd& coefficients, const NormBallRegion& region) {
  return extreme(coefficients, region, false);
}

RobustnessReport check_pac_model_robustness(const AffinePacModel& model) {
  if (model.components.empty()) throw ParameterError("PAC model has no components");
  if (!(model.margin >= 0.0)) throw ParameterError("PAC model margin must be nonnegative");
  RobustnessReport r;
  r.label = model.label;
  r.mode = model.mode;
  r.margin = model.margin;
  r.eta = model.eta;
  r.epsilon = model.epsilon;
  bool robust = true;
  for (std::size_t i = 0; i < model.components.size(); ++i) {
    ComponentCheck cc;
    cc.label = i < model.component_labels.size() ? model.component_labels[i] : -1;
    if (model.mode == ScoreMode::untargeted) {
      const BallExtreme e = minimize_affine_on_ball(model.components[i], model.region);
      cc.max_point = e.point;
      cc.max_value = model.margin - e.value;
    } else {
      const BallExtreme e = maximize_affine_on_ball(model.components[i], model.region);
      cc.max_point = e.point;
      cc.max_value = e.value + model.margin;
    }
    cc.candidate = !(cc.max_value < 0.0);
    robust = robust && !cc.candidate;
    r.components.push_back(std::move(cc));
  }
  r.verdict = robust ? Verdict::pac_model_robust : Verdict::not_verified;
  if (model.epsilon_exceeded()) r.flags.emplace_back("epsilon_exceeds_requested");
  if (model.vacuous()) r.flags.emplace_back("vacuous_epsilon");
  return r;
}

std::vector<Candidate> extract_and_validate_candidates(const AffinePacModel& model, Oracle& oracle) {
  const RobustnessReport r = check_pac_model_robustness(model);
  if (r.components.empty()) return {};
  Eigen::MatrixXd points(static_cast<Eigen::Index>(r.components.size()), model.region.dim());
  for (std::size_t i = 0; i < r.components.size(); ++i) {
    points.row(static_cast<Eigen::Index>(i)) = r.components[i].max_point.transpose();
  }
  const Eigen::MatrixXd outputs = oracle.forward_batch(points);
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < r.components.size(); ++i) {
    Candidate c;
    c.point = r.components[i].max_point;
    c.component = r.components[i].label;
    const Eigen::MatrixXd row = outputs.row(static_cast<Eigen::Index>(i));
    c.true_value = detail::component_target(row, model.label, c.component)(0);
    c.validated = model.mode == ScoreMode::untargeted ? c.true_value <= 0.0 : c.true_value >= 0.0;
    out.push_back(std::move(c));
  }
  return out;
}

PipelineResult verify_region(Oracle& oracle, const NormBallRegion& region, const PipelineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t q0 = oracle.query_count();
  if (region.dim() != oracle.input_dim()) {
    throw DimensionError("center has dimension " + std::to_string(region.dim()) + ", oracle expects " +
                         std::to_string(oracle.input_dim()));
  }
  const Eigen::VectorXd& center = region.center();
  const int label = config.label ? *config.label
                                 : classify(oracle, std::span<const double>(center.data(), center.size()));
  AffinePacModel model = learn_pac_model(oracle, region, label, config.learner);
  RobustnessReport report = check_pac_model_robustness(model);
  if (config.validate_candidates) {
    const std::vector<Candidate> cands = extract_and_validate_candidates(model, oracle);
    for (std::size_t i = 0; i < cands.size(); ++i) {
      report.components[i].validated = cands[i].validated;
      report.components[i].true_value = cands[i].true_value;
      if (report.components[i].candidate) report.candidates.push_back(cands[i]);
    }
  }
  report.query_count = oracle.query_count() - q0;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(report)};
}

void RadiusScale::validate() const {
  if (kind == Kind::continuous && !(tolerance > 0.0 && std::isfinite(tolerance))) {
    throw ParameterError("continuous radius tolerance must be positive");
  }
}

RadiusResult bisect_radius(double r_lo, double r_hi, const RadiusScale& scale,
                           const std::function<RadiusProbe(double)>& probe) {
  scale.validate();
  if (!(r_lo >= 0.0) || !(r_lo < r_hi) || !std::isfinite(r_hi)) {
    throw ParameterError("radius search needs 0 <= r_lo < r_hi");
  }
  // Scale point k (0..N) sits at r_lo + k*step on the search scale.
  long n = 0;
  double step = 0.0;
  if (scale.kind == RadiusScale::Kind::int8) {
    if (std::abs(r_lo - std::round(r_lo)) > 1e-9 || std::abs(r_hi - std::round(r_hi)) > 1e-9) {
      throw ParameterError("int8 radius bounds must be whole steps");
    }
    r_lo = std::round(r_lo);
    r_hi = std::round(r_hi);
    if (r_hi > 255.0) throw ParameterError("int8 radius bounds must lie in [0, 255]");
    step = 1.0;
    n = static_cast<long>(r_hi - r_lo);
  } else {
    step = scale.tolerance;
    n = static_cast<long>(std::ceil((r_hi - r_lo) / step - 1e-9));
  }
  auto value = [&](long k) { return k < 0 ? r_lo - step : std::min(r_hi, r_lo + static_cast<double>(k) * step); };
  auto actual = [&](double v) { return scale.kind == RadiusScale::Kind::int8 ? v / 255.0 : v; };

  RadiusResult out;
  out.scale = scale;
  long lo = r_lo == 0.0 ? 0 : -1;  // known robust (or sentinel)
  long hi = n + 1;                 // known not robust
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    RadiusProbe p = probe(actual(value(mid)));
    const bool ok = p.verdict == Verdict::pac_model_robust && p.error.empty();
    out.verified_at.push_back(std::move(p));
    if (ok) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.found = lo >= 0;
  out.radius = value(lo);
  out.actual_radius = actual(out.radius);
  return out;
}

RadiusResult max_robust_radius(Oracle& oracle, const Eigen::VectorXd& center, const std::optional<Box>& clip,
                               const PipelineConfig& config, double r_lo, double r_hi, const RadiusScale& scale) {
  auto probe = [&](double radius) {
    RadiusProbe p;
    p.radius = radius;
    PipelineConfig cfg = config;
    cfg.learner.master_seed = mix_seed(config.learner.master_seed, std::bit_cast<std::uint64_t>(radius));
    try {
      p.verdict = verify_region(oracle, NormBallRegion(center, radius, clip), cfg).report.verdict;
    } catch (const OracleError&) {
      throw;
    } catch (const Error& e) {
      p.verdict = Verdict::not_verified;
      p.error = e.what();
    }
    return p;
  };
  return bisect_radius(r_lo, r_hi, scale, probe);
}

RateResult robustness_rate(Oracle& oracle, const std::vector<Eigen::VectorXd>& inputs, double radius,
                           const std::optional<Box>& clip, const PipelineConfig& config) {
  if (inputs.empty()) throw ParameterError("robustness rate needs a nonempty dataset");
  RateResult out;
  out.entries.resize(inputs.size());
  std::vector<std::exception_ptr> fatal(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      RateEntry& e = out.entries[i];
      PipelineConfig cfg = config;
      cfg.learner.master_seed = mix_seed(config.learner.master_seed, i);
      cfg.learner.threads = 1;
      try {
        const PipelineResult r = verify_region(oracle, NormBallRegion(inputs[i], radius, clip), cfg);
        e.verdict = r.report.verdict;
        e.label = r.report.label;
        e.margin = r.report.margin;
      } catch (const OracleError&) {
        fatal[i] = std::current_exception();
      } catch (const Error& err) {
        e.verdict = Verdict::not_verified;
        e.error = err.what();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, config.learner.threads)),
                                                    inputs.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : fatal) {
    if (f) std::rethrow_exception(f);
  }
  long robust = 0;
  for (const auto& e : out.entries) robust += e.verdict == Verdict::pac_model_robust;
  out.rate = static_cast<double>(robust) / static_cast<double>(inputs.size());
  return out;
}

long baseline_sample_count(double epsilon, double eta) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ParameterError("epsilon must lie in (0, 1]");
  if (!(eta > 0.0 && eta < 1.0)) throw ParameterError("eta must lie in (0, 1)");
  if (epsilon >= 1.0) return 1;
  const double k = std::log(1.0 / eta) / -std::log1p(-epsilon);
  return std::max(1L, static_cast<long>(std::ceil(k - 1e-9)));
}

BaselineResult baseline_pac_sample_check(Oracle& oracle, const NormBallRegion& region, int label, double epsilon,
                                         double eta, std::uint64_t seed) {
  if (region.dim() != oracle.input_dim()) throw DimensionError("region dimension does not match the oracle");
  if (label < 0 || label >= oracle.output_dim()) throw ParameterError("label outside the oracle's outputs");
  BaselineResult out;
  out.samples = baseline_sample_count(epsilon, eta);
  const UniformStream stream(stream_key(seed, StreamPurpose::baseline, 0), region.sampling_box());
  constexpr long kChunk = 1024;
  for (long first = 0; first < out.samples; first += kChunk) {
    const long count = std::min(kChunk, out.samples - first);
    const Eigen::MatrixXd x = stream.rows(static_cast<std::uint64_t>(first), count);
    const Eigen::MatrixXd y = oracle.forward_batch(x);
    for (Eigen::Index k = 0; k < y.rows(); ++k) {
      const Eigen::VectorXd row = y.row(k).transpose();
      const int got = argmax_label(std::span<const double>(row.data(), row.size()));
      if (got != label) {
        out.robust = false;
        out.witness = x.row(k).transpose();
        out.witness_label = got;
        return out;
      }
    }
  }
  return out;
}

double adversarial_mass_bound(const std::vector<Eigen::VectorXd>& components, double delta, double lipschitz,
                              double radius, double epsilon) {
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) throw ParameterError("Lipschitz constant must be positive");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ParameterError("radius must be positive");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ParameterError("epsilon must lie in (0, 1]");
  if (!std::isfinite(delta)) throw ParameterError("delta must be finite");
  if (components.empty()) throw ParameterError("bound needs at least one component");
  const Eigen::Index m = components.front().size() - 1;
  if (m < 1) throw DimensionError("components need at least one slope");
  for (const auto& c : components) {
    if (c.size() != m + 1) throw DimensionError("components have different lengths");
  }
  const double span = 2.0 * radius * lipschitz;
  if (!(span > delta)) throw ParameterError("bound requires 2rL > delta");

  // Overflow is screened in log space; the value itself is the direct product.
  const double ratio = span / (span - delta);
  double log_bound = static_cast<double>(m) * (std::log(span) - std::log(span - delta)) + std::log(epsilon);
  double product = 1.0;
  for (Eigen::Index i = 1; i <= m; ++i) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& c : components) lo = std::min(lo, std::abs(c(i)));
    if (lo > lipschitz) {
      throw ParameterError("min_j |a_ji| exceeds the Lipschitz constant in dimension " + std::to_string(i - 1));
    }
    if (lo == lipschitz) return 0.0;
    log_bound += std::log1p(-lo / lipschitz);
    product *= 1.0 - lo / lipschitz;
  }
  if (!(log_bound < std::log(std::numeric_limits<double>::max()))) {
    throw ParameterError("bound overflows; delta is too close to 2rL");
  }
  const double bound = std::pow(ratio, static_cast<double>(m)) * product * epsilon;
  if (bound > 0.0 && std::isfinite(bound)) return bound;
  return std::exp(log_bound);
}

double adversarial_mass_bound(const AffinePacModel& model, const RobustnessReport& report, double lipschitz) {
  if (report.components.empty()) throw ParameterError("report has no components");
  double delta = -std::numeric_limits<double>::infinity();
  for (const auto& c : report.components) delta = std::max(delta, c.max_value);
  return adversarial_mass_bound(model.components, delta, lipschitz, model.region.radius(), model.epsilon);
}

}  // namespace pacverify
