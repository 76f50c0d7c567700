#include "pacverify/cli.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "pacverify/analyzer.hpp"
#include "pacverify/error.hpp"
#include "pacverify/model_runtime.hpp"
#include "pacverify/report.hpp"
#include "pacverify/sampler.hpp"

namespace pacverify {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string model;
  std::string oracle_cmd;
  std::string center;
  std::string center_file;
  std::string image;
  std::string clip;
  bool no_clip = false;
  double eps = 0.01;
  double eta = 0.001;
  long k1 = 2000;
  long k2 = 8000;
  long kappa = 32;
  double coeff_bound = 100.0;
  std::uint64_t seed = 0;
  int threads = 1;
  bool untargeted = false;
  std::string out;
  int label = -1;
  long ols_threshold = 1024;
  long k_margin = 0;
  std::string split;
  int split_iters = 1;
  long split_samples = 2000;
  double split_top = 0.25;
  bool record_time = false;
  bool coefficients = false;
  bool no_validate = false;
  double radius = 0.0;
  double int8_radius = 0.0;
  double r_lo = 0.0;
  double r_hi = 0.0;
  std::string scale = "int8";
  std::string dataset;
  double lipschitz = 0.0;
  long m = 0;
  long n = 0;
  long calc_k2 = 0;
  long calc_k = 0;
  long calc_vars = 0;
};

// Whether a flag was given on the parsed subcommand.
bool given(const CLI::App& sub, const std::string& name) {
  const CLI::Option* opt = sub.get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

using Seen = CLI::App;

class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    double v = 0.0;
    const char* b = token.data();
    const char* e = b + token.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || !std::isfinite(v)) {
      throw UsageError(what + ": cannot parse number '" + token + "'");
    }
    out.push_back(v);
    token.clear();
  };
  for (char ch : text) {
    if (ch == ',' || ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == ';') {
      flush();
    } else {
      token += ch;
    }
  }
  flush();
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// .bin: raw bytes scaled by 1/255; anything else: numbers separated by
// commas or whitespace.
Eigen::VectorXd load_center_file(const fs::path& path) {
  const std::string data = read_file(path);
  if (path.extension() == ".bin") {
    Eigen::VectorXd v(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      v(static_cast<Eigen::Index>(i)) = static_cast<unsigned char>(data[i]) / 255.0;
    }
    return v;
  }
  return to_vector(parse_numbers(data, path.string()));
}

std::vector<Eigen::VectorXd> load_dataset(const std::string& where) {
  std::vector<Eigen::VectorXd> out;
  const fs::path path(where);
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(load_center_file(f));
  } else {
    std::istringstream lines(read_file(path));
    std::string line;
    while (std::getline(lines, line)) {
      const std::vector<double> v = parse_numbers(line, where);
      if (!v.empty()) out.push_back(to_vector(v));
    }
  }
  if (out.empty()) throw UsageError("dataset " + where + " has no inputs");
  return out;
}

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;
};

std::vector<int> parse_dims(const std::string& text, const std::string& what) {
  std::vector<int> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size() || v < 1) {
      throw UsageError(what + ": expected positive integers separated by 'x', got '" + text + "'");
    }
    dims.push_back(v);
  }
  return dims;
}

std::optional<Shape> parse_image(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const std::vector<int> d = parse_dims(text, "--image");
  if (d.size() != 3) throw UsageError("--image expects CxHxW");
  return Shape{d[0], d[1], d[2]};
}

std::unique_ptr<Oracle> open_oracle(const Options& o) {
  if (!o.model.empty() && !o.oracle_cmd.empty()) throw UsageError("give either --model or --oracle-cmd, not both");
  if (!o.model.empty()) return std::make_unique<ModelOracle>(load_model(o.model));
  if (!o.oracle_cmd.empty()) return ProcessOracle::spawn(o.oracle_cmd);
  throw UsageError("one of --model or --oracle-cmd is required");
}

std::optional<Box> make_clip(const Options& o, int dim, const std::optional<Shape>& shape) {
  if (o.no_clip) return std::nullopt;
  if (!o.clip.empty()) {
    const std::vector<double> v = parse_numbers(o.clip, "--clip");
    if (v.size() != 2 || !(v[0] <= v[1])) throw UsageError("--clip expects lo,hi with lo <= hi");
    return uniform_box(dim, v[0], v[1]);
  }
  if (shape) return uniform_box(dim, 0.0, 1.0);
  return std::nullopt;
}

LearnerConfig learner_config(const Options& o, const std::optional<Shape>& shape) {
  LearnerConfig c;
  c.epsilon = o.eps;
  c.eta = o.eta;
  c.k1 = o.k1;
  c.k2 = o.k2;
  c.kappa = o.kappa;
  if (!(o.coeff_bound > 0.0)) throw UsageError("--coeff-bound must be positive");
  c.bounds = {-o.coeff_bound, o.coeff_bound};
  c.mode = o.untargeted ? ScoreMode::untargeted : ScoreMode::targeted;
  c.ols_threshold = o.ols_threshold;
  c.margin_samples = o.k_margin;
  c.master_seed = o.seed;
  c.threads = o.threads;
  if (!o.split.empty()) {
    if (!shape) throw UsageError("--split needs --image");
    const std::vector<int> g = parse_dims(o.split, "--split");
    if (g.size() != 2) throw UsageError("--split expects ROWSxCOLS grid counts");
    SplitConfig s;
    s.channels = shape->channels;
    s.height = shape->height;
    s.width = shape->width;
    s.grid_rows = g[0];
    s.grid_cols = g[1];
    s.iterations = o.split_iters;
    s.samples_per_iter = o.split_samples;
    s.top_fraction = o.split_top;
    c.splitting = s;
  }
  return c;
}

Json config_json(const Options& o, const std::string& task) {
  Json c{{"task", task}};
  if (task == "calc") {
    c["eps"] = o.eps;
    c["eta"] = o.eta;
    c["m"] = o.m;
    c["n"] = o.n;
    return c;
  }
  c["model"] = o.model.empty() ? Json(nullptr) : Json(o.model);
  c["oracle_cmd"] = o.oracle_cmd.empty() ? Json(nullptr) : Json(o.oracle_cmd);
  c["eps"] = o.eps;
  c["eta"] = o.eta;
  c["k1"] = o.k1;
  c["k2"] = o.k2;
  c["kappa"] = o.kappa;
  c["coeff_bound"] = o.coeff_bound;
  c["seed"] = o.seed;
  c["untargeted"] = o.untargeted;
  c["ols_threshold"] = o.ols_threshold;
  c["k_margin"] = o.k_margin;
  c["image"] = o.image.empty() ? Json(nullptr) : Json(o.image);
  c["clip"] = o.no_clip ? Json("none") : (o.clip.empty() ? Json(nullptr) : Json(o.clip));
  if (!o.split.empty()) {
    c["split"] = Json{{"grid", o.split}, {"iterations", o.split_iters}, {"samples", o.split_samples},
                      {"top_fraction", o.split_top}};
  }
  return c;
}

Eigen::VectorXd resolve_center(const Options& o) {
  if (!o.center.empty() && !o.center_file.empty()) throw UsageError("give either --center or --center-file");
  if (!o.center.empty()) return to_vector(parse_numbers(o.center, "--center"));
  if (!o.center_file.empty()) return load_center_file(o.center_file);
  throw UsageError("one of --center or --center-file is required");
}

double resolve_radius(const Options& o, const Seen& seen) {
  const bool a = given(seen, "--radius");
  const bool b = given(seen, "--int8-radius");
  if (a == b) throw UsageError("give exactly one of --radius or --int8-radius");
  const double r = a ? o.radius : o.int8_radius / 255.0;
  if (!(r > 0.0) || !std::isfinite(r)) throw UsageError("radius must be positive");
  return r;
}

PipelineConfig pipeline_config(const Options& o, const Seen& seen, const std::optional<Shape>& shape) {
  PipelineConfig p;
  p.learner = learner_config(o, shape);
  if (given(seen, "--label")) p.label = o.label;
  p.validate_candidates = !o.no_validate;
  return p;
}

void check_shape(const std::optional<Shape>& shape, int dim) {
  if (shape && static_cast<long>(shape->channels) * shape->height * shape->width != dim) {
    throw UsageError("--image shape does not match the oracle input dimension " + std::to_string(dim));
  }
}

bool vacuous_margin(const LearnerConfig& c) {
  return achieved_epsilon(c.effective_margin_samples(), c.eta, 1) > 1.0;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Outcome {
  Json report;
  std::string summary;
  bool vacuous = false;
};

Outcome run_verify(const Options& o, const Seen& seen, bool with_bound) {
  const auto shape = parse_image(o.image);
  auto oracle = open_oracle(o);
  const Eigen::VectorXd center = resolve_center(o);
  if (center.size() != oracle->input_dim()) {
    throw DimensionError("center has " + std::to_string(center.size()) + " values, oracle expects " +
                         std::to_string(oracle->input_dim()));
  }
  check_shape(shape, oracle->input_dim());
  const double radius = resolve_radius(o, seen);
  const PipelineConfig cfg = pipeline_config(o, seen, shape);
  const NormBallRegion region(center, radius, make_clip(o, oracle->input_dim(), shape));
  const PipelineResult result = verify_region(*oracle, region, cfg);

  Outcome out;
  out.report = robustness_json(result, o.coefficients);
  out.report["task"] = with_bound ? "bound" : "verify";
  out.report["config"] = config_json(o, with_bound ? "bound" : "verify");
  out.report["config"]["radius"] = radius;
  out.report["seconds"] = o.record_time ? Json(result.report.seconds) : Json(nullptr);
  out.vacuous = result.model.vacuous();
  out.summary = std::string(with_bound ? "bound" : "verify") + ": " + to_string(result.report.verdict) +
                " label=" + std::to_string(result.report.label) + " margin=" + fmt(result.report.margin) +
                " queries=" + std::to_string(result.report.query_count);
  if (with_bound) {
    if (!given(seen, "--lipschitz")) throw UsageError("bound needs --lipschitz");
    const double bound = adversarial_mass_bound(result.model, result.report, o.lipschitz);
    double delta = -std::numeric_limits<double>::infinity();
    for (const auto& c : result.report.components) delta = std::max(delta, c.max_value);
    out.report["bound"] = Json{{"value", bound},
                               {"delta", delta},
                               {"lipschitz", o.lipschitz},
                               {"note", "diagnostic - appendix derivation"}};
    out.report["config"]["lipschitz"] = o.lipschitz;
    out.summary += " bound=" + fmt(bound) + " (diagnostic)";
  }
  return out;
}

RadiusScale parse_scale(const std::string& s) {
  if (s == "int8") return RadiusScale::int8_steps();
  if (s.rfind("cont:", 0) == 0) {
    const std::vector<double> v = parse_numbers(s.substr(5), "--scale");
    if (v.size() != 1 || !(v[0] > 0.0)) throw UsageError("--scale cont:<tol> needs a positive tolerance");
    return RadiusScale::continuous_steps(v[0]);
  }
  throw UsageError("--scale must be int8 or cont:<tol>");
}

Outcome run_radius(const Options& o, const Seen& seen) {
  const auto shape = parse_image(o.image);
  auto oracle = open_oracle(o);
  const Eigen::VectorXd center = resolve_center(o);
  if (center.size() != oracle->input_dim()) throw DimensionError("center length does not match the oracle");
  check_shape(shape, oracle->input_dim());
  const RadiusScale scale = parse_scale(o.scale);
  if (!given(seen, "--r-hi")) throw UsageError("radius needs --r-hi");
  const PipelineConfig cfg = pipeline_config(o, seen, shape);
  const auto clip = make_clip(o, oracle->input_dim(), shape);
  const std::uint64_t q0 = oracle->query_count();
  const auto start = std::chrono::steady_clock::now();

  std::map<double, Json> detail;
  auto probe = [&](double radius) {
    RadiusProbe p;
    p.radius = radius;
    PipelineConfig c = cfg;
    c.learner.master_seed = mix_seed(cfg.learner.master_seed, std::bit_cast<std::uint64_t>(radius));
    try {
      const PipelineResult r = verify_region(*oracle, NormBallRegion(center, radius, clip), c);
      p.verdict = r.report.verdict;
      detail[radius] = robustness_json(r);
    } catch (const OracleError&) {
      throw;
    } catch (const Error& e) {
      p.verdict = Verdict::not_verified;
      p.error = e.what();
    }
    return p;
  };
  const RadiusResult res = bisect_radius(o.r_lo, o.r_hi, scale, probe);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Outcome out;
  Json trace = Json::array();
  for (const auto& p : res.verified_at) {
    trace.push_back(Json{{"radius", p.radius},
                         {"verdict", to_string(p.verdict)},
                         {"error", p.error.empty() ? Json(nullptr) : Json(p.error)}});
  }
  Json& r = out.report;
  r["task"] = "radius";
  r["config"] = config_json(o, "radius");
  r["config"]["r_lo"] = o.r_lo;
  r["config"]["r_hi"] = o.r_hi;
  r["config"]["scale"] = o.scale;
  r["radius"] = res.radius;
  r["actual_radius"] = res.actual_radius;
  r["found"] = res.found;
  r["verified_at"] = std::move(trace);
  r["queries"] = oracle->query_count() - q0;
  r["seconds"] = o.record_time ? Json(seconds) : Json(nullptr);
  auto it = detail.find(res.actual_radius);
  if (res.found && it != detail.end()) {
    r["verdict"] = it->second["verdict"];
    r["margin"] = it->second["margin"];
    r["components"] = it->second["components"];
  } else {
    r["verdict"] = res.found ? "pac_model_robust" : "not_verified";
    r["margin"] = nullptr;
    r["components"] = Json::array();
  }
  out.vacuous = vacuous_margin(cfg.learner);
  r["flags"] = out.vacuous ? Json::array({"vacuous_epsilon"}) : Json::array();
  out.summary = "radius: " + fmt(res.radius) + (scale.kind == RadiusScale::Kind::int8 ? "/255" : "") +
                (res.found ? "" : " (none found)") + " probes=" + std::to_string(res.verified_at.size());
  return out;
}

Outcome run_rate(const Options& o, const Seen& seen) {
  const auto shape = parse_image(o.image);
  auto oracle = open_oracle(o);
  if (o.dataset.empty()) throw UsageError("rate needs --dataset");
  const std::vector<Eigen::VectorXd> inputs = load_dataset(o.dataset);
  for (const auto& x : inputs) {
    if (x.size() != oracle->input_dim()) throw DimensionError("dataset input length does not match the oracle");
  }
  check_shape(shape, oracle->input_dim());
  const double radius = resolve_radius(o, seen);
  const PipelineConfig cfg = pipeline_config(o, seen, shape);
  const std::uint64_t q0 = oracle->query_count();
  const auto start = std::chrono::steady_clock::now();
  const RateResult res = robustness_rate(*oracle, inputs, radius, make_clip(o, oracle->input_dim(), shape), cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Outcome out;
  Json entries = Json::array();
  long robust = 0;
  for (std::size_t i = 0; i < res.entries.size(); ++i) {
    const RateEntry& e = res.entries[i];
    robust += e.verdict == Verdict::pac_model_robust;
    entries.push_back(Json{{"index", i},
                           {"verdict", to_string(e.verdict)},
                           {"label", e.label},
                           {"margin", e.error.empty() ? Json(e.margin) : Json(nullptr)},
                           {"error", e.error.empty() ? Json(nullptr) : Json(e.error)}});
  }
  Json& r = out.report;
  r["task"] = "rate";
  r["config"] = config_json(o, "rate");
  r["config"]["radius"] = radius;
  r["config"]["dataset"] = o.dataset;
  r["rate"] = res.rate;
  r["robust_count"] = robust;
  r["inputs"] = std::move(entries);
  r["queries"] = oracle->query_count() - q0;
  r["seconds"] = o.record_time ? Json(seconds) : Json(nullptr);
  out.vacuous = vacuous_margin(cfg.learner);
  r["flags"] = out.vacuous ? Json::array({"vacuous_epsilon"}) : Json::array();
  out.summary = "rate: " + fmt(res.rate) + " (" + std::to_string(robust) + "/" + std::to_string(inputs.size()) + ")";
  return out;
}

Outcome run_calc(const Options& o, const Seen& seen) {
  Outcome out;
  Json& r = out.report;
  r["task"] = "calc";
  r["config"] = config_json(o, "calc");
  const long k = required_samples_full(o.eps, o.eta, o.m, o.n);
  const long km = required_samples_margin(o.eps, o.eta);
  r["K_full"] = k;
  r["K_margin"] = km;
  out.summary = "K=" + std::to_string(k) + " K_margin=" + std::to_string(km);
  if (given(seen, "--k2")) {
    const long kap = max_key_features(o.calc_k2, o.eps, o.eta);
    r["config"]["k2"] = o.calc_k2;
    r["kappa_max"] = kap;
    out.summary += " kappa_max=" + std::to_string(kap);
  }
  if (given(seen, "--k") || given(seen, "--vars")) {
    const long vars = given(seen, "--vars") ? o.calc_vars : (o.m + 1) * (o.n - 1) + 1;
    const long samples = given(seen, "--k") ? o.calc_k : k;
    const double e = achieved_epsilon(samples, o.eta, vars);
    r["config"]["k"] = samples;
    r["config"]["vars"] = vars;
    r["epsilon_achieved"] = e;
    out.summary += " epsilon_achieved=" + fmt(e);
    out.vacuous = e > 1.0;
  }
  r["queries"] = 0;
  r["seconds"] = nullptr;
  r["flags"] = out.vacuous ? Json::array({"vacuous_epsilon"}) : Json::array();
  return out;
}

void add_oracle_options(CLI::App* app, Options& o) {
  app->add_option("--model", o.model, "Model JSON file");
  app->add_option("--oracle-cmd", o.oracle_cmd, "Command serving the DIM/EVAL protocol");
  app->add_option("--eps", o.eps, "Error rate epsilon");
  app->add_option("--eta", o.eta, "Significance level eta");
  app->add_option("--k1", o.k1, "Phase-1 samples per component");
  app->add_option("--k2", o.k2, "Phase-2 samples per component");
  app->add_option("--kappa", o.kappa, "Key-feature budget");
  app->add_option("--coeff-bound", o.coeff_bound, "Coefficient box [-B, B]");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--threads", o.threads, "Worker threads");
  app->add_flag("--untargeted", o.untargeted, "Untargeted score difference");
  app->add_option("--out", o.out, "Report path (JSON on stdout when absent)");
  app->add_option("--image", o.image, "Input shape CxHxW (default clip [0,1])");
  app->add_option("--clip", o.clip, "Input domain lo,hi");
  app->add_flag("--no-clip", o.no_clip, "No input domain clipping");
  app->add_option("--ols-threshold", o.ols_threshold, "Phase 1 uses OLS above this many coefficients");
  app->add_option("--k-margin", o.k_margin, "Margin samples (0 = minimum for eps, eta)");
  app->add_option("--split", o.split, "Stepwise splitting with ROWSxCOLS initial grids");
  app->add_option("--split-iters", o.split_iters, "Stepwise splitting rounds");
  app->add_option("--split-samples", o.split_samples, "Samples per splitting round");
  app->add_option("--split-top", o.split_top, "Fraction of grids refined per round");
  app->add_flag("--record-time", o.record_time, "Record wall time in the report");
  app->add_flag("--coefficients", o.coefficients, "Include learned coefficients in the report");
  app->add_flag("--no-validate", o.no_validate, "Skip querying the candidate points");
}

void add_center_options(CLI::App* app, Options& o) {
  app->add_option("--center", o.center, "Center as comma-separated values");
  app->add_option("--center-file", o.center_file, "Center file (.csv text or .bin bytes/255)");
  app->add_option("--label", o.label, "Label override (0-based)");
}

void add_radius_options(CLI::App* app, Options& o) {
  app->add_option("--radius", o.radius, "Ball radius");
  app->add_option("--int8-radius", o.int8_radius, "Ball radius in 1/255 steps");
}

// Turns a JSON config object into flags placed before the explicit ones,
// so the command line wins under the take-last policy.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::vector<std::string> out;
  std::vector<std::string> extra;
  std::string task;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a path");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    Json cfg;
    try {
      cfg = Json::parse(read_file(path));
    } catch (const Json::exception& e) {
      throw UsageError("config " + path + ": " + e.what());
    }
    if (!cfg.is_object()) throw UsageError("config " + path + " must be a JSON object");
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
      const Json& v = it.value();
      if (it.key() == "task") {
        if (!v.is_string()) throw UsageError("config task must be a string");
        task = v.get<std::string>();
        continue;
      }
      const std::string flag = "--" + it.key();
      if (v.is_boolean()) {
        if (v.get<bool>()) extra.push_back(flag);
      } else if (v.is_string()) {
        extra.push_back(flag);
        extra.push_back(v.get<std::string>());
      } else if (v.is_number()) {
        extra.push_back(flag);
        extra.push_back(v.is_number_float() ? canonical_json(v) : v.dump());
      } else if (v.is_array()) {
        std::string joined;
        for (std::size_t k = 0; k < v.size(); ++k) {
          if (!v[k].is_number()) throw UsageError("config " + it.key() + " must hold numbers");
          if (k) joined += ',';
          joined += canonical_json(v[k]);
        }
        extra.push_back(flag);
        extra.push_back(joined);
      } else {
        throw UsageError("config " + it.key() + " has an unsupported value");
      }
    }
  }
  if (extra.empty() && task.empty()) return out;
  // Insert after the subcommand (first token), or supply it from the config.
  std::vector<std::string> merged;
  std::size_t rest = 0;
  if (!out.empty() && out[0].rfind("-", 0) != 0) {
    merged.push_back(out[0]);
    rest = 1;
  } else if (!task.empty()) {
    merged.push_back(task);
  }
  merged.insert(merged.end(), extra.begin(), extra.end());
  merged.insert(merged.end(), out.begin() + static_cast<std::ptrdiff_t>(rest), out.end());
  return merged;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"PAC-model robustness verification for black-box classifiers", "pacverify"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  CLI::App* verify = app.add_subcommand("verify", "Learn a PAC model on a ball and check robustness");
  add_oracle_options(verify, o);
  add_center_options(verify, o);
  add_radius_options(verify, o);

  CLI::App* radius = app.add_subcommand("radius", "Bisect the largest robust radius");
  add_oracle_options(radius, o);
  add_center_options(radius, o);
  radius->add_option("--r-lo", o.r_lo, "Lower end on the search scale");
  radius->add_option("--r-hi", o.r_hi, "Upper end on the search scale");
  radius->add_option("--scale", o.scale, "int8 or cont:<tol>");

  CLI::App* rate = app.add_subcommand("rate", "Robustness rate over a dataset");
  add_oracle_options(rate, o);
  rate->add_option("--label", o.label, "Label override (0-based) for every input");
  add_radius_options(rate, o);
  rate->add_option("--dataset", o.dataset, "CSV of centers, or a directory of center files");

  CLI::App* calc = app.add_subcommand("calc", "Sample-count calculator");
  calc->add_option("--eps", o.eps, "Error rate");
  calc->add_option("--eta", o.eta, "Significance level");
  calc->add_option("--m", o.m, "Input dimension")->required();
  calc->add_option("--n", o.n, "Output count")->required();
  calc->add_option("--k2", o.calc_k2, "Phase-2 samples for the key-feature budget");
  calc->add_option("--k", o.calc_k, "Sample count for the achieved error rate");
  calc->add_option("--vars", o.calc_vars, "Decision variables for the achieved error rate");
  calc->add_option("--out", o.out, "Report path");

  CLI::App* bound = app.add_subcommand("bound", "Verify, then evaluate the adversarial-mass bound");
  add_oracle_options(bound, o);
  add_center_options(bound, o);
  add_radius_options(bound, o);
  bound->add_option("--lipschitz", o.lipschitz, "Local Lipschitz constant");

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    Outcome result;
    if (verify->parsed()) {
      result = run_verify(o, *verify, false);
    } else if (bound->parsed()) {
      result = run_verify(o, *bound, true);
    } else if (radius->parsed()) {
      result = run_radius(o, *radius);
    } else if (rate->parsed()) {
      result = run_rate(o, *rate);
    } else {
      result = run_calc(o, *calc);
    }
    if (o.out.empty()) {
      out << canonical_json(result.report) << "\n";
      err << result.summary << "\n";
    } else {
      emit_report(result.report, o.out);
      out << result.summary << "\n";
    }
    if (result.vacuous) {
      err << "warning: achieved epsilon exceeds 1; the guarantee is vacuous\n";
      return kExitVacuous;
    }
    return kExitOk;
  } catch (const OracleError& e) {
    err << "oracle error: " << e.what() << "\n";
    return kExitOracle;
  } catch (const ModelFormatError& e) {
    err << "model error: " << e.what() << "\n";
    return kExitOracle;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace pacverify
