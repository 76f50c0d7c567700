// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "pacverify/analyzer.hpp"
#include "pacverify/cli.hpp"
#include "pacverify/error.hpp"
#include "pacverify/pac_learner.hpp"
#include "pacverify/sampler.hpp"
#include "pacverify/scenario_solver.hpp"
#include "test_support.hpp"

using namespace pacverify;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path g_source_dir;
std::string g_server;

// Violation and adversarial rates of a model over fresh uniform draws.
struct FreshRates {
  double violation = 0.0;
  double adversarial = 0.0;
};

FreshRates fresh_rates(const AffinePacModel& model, Oracle& oracle, long count, std::uint64_t seed) {
  const UniformStream stream(stream_key(seed, StreamPurpose::evaluation, 0), model.region.sampling_box());
  long violations = 0, adversarial = 0;
  for (long first = 0; first < count; first += 4096) {
    const long k = std::min(4096L, count - first);
    const Eigen::MatrixXd x = stream.rows(static_cast<std::uint64_t>(first), k);
    const Eigen::MatrixXd y = oracle.forward_batch(x);
    const Eigen::MatrixXd truth = score_targets(y, model.label, model.mode);
    for (Eigen::Index s = 0; s < k; ++s) {
      bool bad = false;
      for (std::size_t i = 0; i < model.components.size(); ++i) {
        const double pred = model.components[i](0) + model.components[i].tail(x.cols()).dot(x.row(s).transpose());
        if (std::abs(pred - truth(s, static_cast<Eigen::Index>(i))) > model.margin) bad = true;
      }
      violations += bad;
      const Eigen::VectorXd row = y.row(s).transpose();
      adversarial += argmax_label(std::span<const double>(row.data(), row.size())) != model.label;
    }
  }
  return {static_cast<double>(violations) / count, static_cast<double>(adversarial) / count};
}

Outcome criterion1() {
  const ClassifierModel model = fixtures::toy_model();
  const double a[2] = {0.0, 0.0};
  const double b[2] = {1.0, -1.0};
  const auto t0 = Clock::now();
  const Eigen::VectorXd ya = model.evaluate(a);
  const Eigen::VectorXd yb = model.evaluate(b);
  ModelOracle oracle(model);
  const int label = classify(oracle, a);
  const double elapsed = seconds_since(t0);
  const bool exact = ya(0) == 14.0 && ya(1) == -10.0 && yb(0) == 26.0 && yb(1) == 26.0;
  // The first output is label 0 (labels are 0-based).
  const bool ok = exact && label == 0 && elapsed < 1e-3;
  std::ostringstream d;
  d << "forward(0,0)=(" << ya(0) << "," << ya(1) << ") forward(1,-1)=(" << yb(0) << "," << yb(1)
    << ") label=" << label << " time=" << fmt("%.2e", elapsed) << "s";
  return {ok, d.str()};
}

Outcome criterion2() {
  const long k = required_samples_full(0.01, 0.001, 2, 2);
  const double e = achieved_epsilon(2182, 0.001, 4);
  return {k == 2182 && e <= 0.01, "K=" + std::to_string(k) + " achieved_epsilon=" + fmt("%.6f", e)};
}

Outcome criterion3() {
  ModelOracle oracle(fixtures::toy_model());
  const NormBallRegion region(Eigen::Vector2d(0.0, 0.0), 1.0);
  int in_range = 0, signs = 0, robust = 0;
  double lo = 1e300, hi = -1e300;
  const auto t0 = Clock::now();
  for (int seed = 0; seed < 20; ++seed) {
    PipelineConfig cfg;
    cfg.learner.epsilon = 0.01;
    cfg.learner.eta = 0.001;
    cfg.learner.k1 = 2182;
    cfg.learner.k2 = 2182;
    cfg.learner.kappa = 3;
    cfg.learner.master_seed = static_cast<std::uint64_t>(seed);
    const PipelineResult r = verify_region(oracle, region, cfg);
    const double lambda = r.model.margin;
    const Eigen::VectorXd& c = r.model.components[0];
    lo = std::min(lo, lambda);
    hi = std::max(hi, lambda);
    in_range += lambda >= 5.0 && lambda <= 15.0;
    signs += c(1) > 0.0 && c(2) < 0.0;
    const Eigen::VectorXd& p = r.report.components[0].max_point;
    robust += p(0) == 1.0 && p(1) == -1.0 && r.report.verdict == Verdict::pac_model_robust;
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << "lambda in [5,15]: " << in_range << "/20 (range " << fmt("%.3f", lo) << ".." << fmt("%.3f", hi)
    << "), signs: " << signs << "/20, max point (1,-1) and robust: " << robust << "/20, time="
    << fmt("%.2f", elapsed) << "s";
  return {in_range >= 18 && signs >= 18 && robust >= 18 && elapsed < 30.0, d.str()};
}

Outcome criterion4() {
  std::mt19937_64 gen(4);
  std::uniform_int_distribution<int> mdist(1, 16), ndist(2, 5);
  std::uniform_real_distribution<double> u(-1.0, 1.0), rdist(0.05, 0.6);
  std::normal_distribution<double> g(0.0, 1.0);
  int ok = 0;
  double worst_lambda = 0.0, worst_coef = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int m = mdist(gen), n = ndist(gen);
    Eigen::MatrixXd w(n, m);
    Eigen::VectorXd b(n), center(m);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(gen);
    for (int i = 0; i < n; ++i) b(i) = 2.0 * g(gen);
    for (int j = 0; j < m; ++j) center(j) = u(gen);
    fixtures::AffineOracle oracle(w, b);
    const bool clipped = t % 3 == 0;
    const NormBallRegion region(center, rdist(gen),
                                clipped ? std::optional<Box>(uniform_box(m, -1.0, 1.0)) : std::nullopt);
    PipelineConfig cfg;
    cfg.learner.k1 = 400;
    cfg.learner.k2 = 3000;
    cfg.learner.kappa = 7;
    cfg.learner.master_seed = static_cast<std::uint64_t>(100 + t);
    const PipelineResult r = verify_region(oracle, region, cfg);
    const int label = r.model.label;

    bool coef_ok = true;
    bool truly_robust = true;
    for (std::size_t i = 0; i < r.model.components.size(); ++i) {
      const int k = r.model.component_labels[i];
      Eigen::VectorXd truth(m + 1);
      truth(0) = b(k) - b(label);
      truth.tail(m) = (w.row(k) - w.row(label)).transpose();
      const double err = (r.model.components[i] - truth).lpNorm<Eigen::Infinity>();
      worst_coef = std::max(worst_coef, err);
      coef_ok = coef_ok && err <= 1e-6;
      truly_robust = truly_robust && fixtures::box_vertex_max(truth, region) < 0.0;
    }
    worst_lambda = std::max(worst_lambda, r.model.margin);
    const bool verdict_ok = (r.report.verdict == Verdict::pac_model_robust) == truly_robust;
    ok += r.model.margin <= 1e-6 && coef_ok && verdict_ok;
  }
  std::ostringstream d;
  d << ok << "/50 exact, max lambda=" << fmt("%.2e", worst_lambda) << " max coef error=" << fmt("%.2e", worst_coef);
  return {ok == 50, d.str()};
}

Outcome criterion5() {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> fdist(1, 4);
  std::normal_distribution<double> g(0.0, 1.0);
  int ok = 0;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int f = fdist(gen);
    std::uniform_int_distribution<int> kdist(1, 12);
    const int K = kdist(gen);
    ChebyshevFitProblem p;
    p.design.resize(K, f);
    p.targets.resize(K);
    for (int s = 0; s < K; ++s) {
      p.design(s, 0) = 1.0;
      for (int j = 1; j < f; ++j) p.design(s, j) = g(gen);
      p.targets(s) = 3.0 * g(gen);
    }
    p.free_idx.resize(static_cast<std::size_t>(f));
    for (int j = 0; j < f; ++j) p.free_idx[static_cast<std::size_t>(j)] = static_cast<std::size_t>(j);
    p.bounds = t % 4 == 0 ? CoefficientBounds{-0.5, 0.5} : CoefficientBounds{};
    const FitResult r = solve_chebyshev_lp(p);
    const double oracle = fixtures::vertex_enumeration_optimum(p.design, p.targets, p.bounds);
    const double err = std::abs(r.margin - oracle);
    worst = std::max(worst, err);
    ok += r.status == FitStatus::optimal && err <= 1e-7;
  }
  ChebyshevFitProblem h;
  h.design.resize(3, 2);
  h.design << 1, -1, 1, 0, 1, 1;
  h.targets = Eigen::Vector3d(-1.5, -0.5, 2.5);
  h.free_idx = {0, 1};
  const FitResult hr = solve_chebyshev_lp(h);
  const bool hand = std::abs(hr.margin - 0.5) <= 1e-9 && std::abs(hr.coefficients(0)) <= 1e-9 &&
                    std::abs(hr.coefficients(1) - 2.0) <= 1e-9;
  std::ostringstream d;
  d << ok << "/100 match vertex enumeration (max diff " << fmt("%.2e", worst) << "); hand example lambda="
    << hr.margin << " c=(" << hr.coefficients(0) << "," << hr.coefficients(1) << ")";
  return {ok == 100 && hand, d.str()};
}

Outcome criterion6() {
  std::mt19937_64 gen(6);
  std::uniform_int_distribution<int> mdist(1, 12);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int ok = 0;
  for (int t = 0; t < 100; ++t) {
    const int m = mdist(gen);
    Eigen::VectorXd c(m + 1), center(m);
    for (int j = 0; j <= m; ++j) c(j) = (t % 5 == 0 && j % 3 == 1) ? 0.0 : g(gen);
    for (int j = 0; j < m; ++j) center(j) = u(gen);
    const bool clipped = t % 2 == 0;
    const NormBallRegion region(center, 0.05 + 0.5 * u(gen),
                                clipped ? std::optional<Box>(uniform_box(m, 0.0, 1.0)) : std::nullopt);
    const BallExtreme e = maximize_affine_on_ball(c, region);
    ok += e.value == fixtures::box_vertex_max(c, region);
  }
  return {ok == 100, std::to_string(ok) + "/100 exact matches with exhaustive vertex search"};
}

struct MlpRuns {
  int within = 0;
  int robust = 0;
  int robust_ok = 0;
  double worst_violation = 0.0;
  double worst_adversarial = 0.0;
};

const MlpRuns& mlp_runs() {
  static const MlpRuns runs = [] {
    MlpRuns out;
    ModelOracle oracle(fixtures::random_mlp({10, 24, 24, 4}, 77));
    // A center the network classifies with some room.
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd center(10);
    double best_gap = -1.0;
    for (int t = 0; t < 200; ++t) {
      Eigen::VectorXd x(10);
      for (int j = 0; j < 10; ++j) x(j) = u(gen);
      const Eigen::VectorXd y = oracle.forward(std::span<const double>(x.data(), 10));
      Eigen::VectorXd s = y;
      std::sort(s.data(), s.data() + s.size());
      if (s(3) - s(2) > best_gap) {
        best_gap = s(3) - s(2);
        center = x;
      }
    }
    for (int seed = 0; seed < 20; ++seed) {
      PipelineConfig cfg;
      cfg.learner.epsilon = 0.05;
      cfg.learner.eta = 0.001;
      cfg.learner.k1 = 500;
      cfg.learner.k2 = 1000;
      cfg.learner.kappa = 11;
      cfg.learner.master_seed = static_cast<std::uint64_t>(seed);
      // Alternate radii so both verdicts occur.
      const double radius = seed % 2 == 0 ? 0.05 : 0.3;
      const PipelineResult r = verify_region(oracle, NormBallRegion(center, radius), cfg);
      const FreshRates f = fresh_rates(r.model, oracle, 100000, 1000 + static_cast<std::uint64_t>(seed));
      out.worst_violation = std::max(out.worst_violation, f.violation);
      out.within += f.violation <= 0.055;
      if (r.report.verdict == Verdict::pac_model_robust) {
        ++out.robust;
        out.robust_ok += f.adversarial <= 0.055;
        out.worst_adversarial = std::max(out.worst_adversarial, f.adversarial);
      }
    }
    return out;
  }();
  return runs;
}

Outcome criterion7() {
  const MlpRuns& r = mlp_runs();
  return {r.within >= 19, std::to_string(r.within) + "/20 seeds with violation rate <= 0.055 (worst " +
                              fmt("%.5f", r.worst_violation) + ")"};
}

Outcome criterion8() {
  const MlpRuns& r = mlp_runs();
  return {r.robust > 0 && r.robust_ok == r.robust,
          std::to_string(r.robust_ok) + "/" + std::to_string(r.robust) +
              " robust verdicts with adversarial fraction <= 0.055 (worst " + fmt("%.5f", r.worst_adversarial) + ")"};
}

Outcome criterion9() {
  const long kap = max_key_features(8000, 0.01, 0.001);
  // Focused learning, m = 3072.
  ModelOracle dense(fixtures::random_mlp({3072, 64, 10}, 9));
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd c1(3072);
  for (Eigen::Index j = 0; j < c1.size(); ++j) c1(j) = u(gen);
  PipelineConfig cfg;
  cfg.learner.k1 = 2000;
  cfg.learner.k2 = 8000;
  cfg.learner.kappa = 32;
  cfg.learner.master_seed = 9;
  auto t0 = Clock::now();
  const PipelineResult focused = verify_region(dense, NormBallRegion(c1, 4.0 / 255.0, uniform_box(3072, 0, 1)), cfg);
  const double t_focused = seconds_since(t0);

  // Stepwise splitting, m = 3*64*64.
  ModelOracle image(fixtures::random_mlp({12288, 32, 10}, 10));
  Eigen::VectorXd c2(12288);
  for (Eigen::Index j = 0; j < c2.size(); ++j) c2(j) = u(gen);
  PipelineConfig scfg = cfg;
  SplitConfig split;
  split.channels = 3;
  split.height = 64;
  split.width = 64;
  split.grid_rows = 16;
  split.grid_cols = 16;
  split.iterations = 3;
  split.samples_per_iter = 2000;
  scfg.learner.splitting = split;
  t0 = Clock::now();
  const PipelineResult stepwise =
      verify_region(image, NormBallRegion(c2, 4.0 / 255.0, uniform_box(12288, 0, 1)), scfg);
  const double t_split = seconds_since(t0);

  std::ostringstream d;
  d << "max_key_features(8000)=" << kap << "; m=3072 focused: " << fmt("%.1f", t_focused) << "s ("
    << focused.report.query_count << " queries, lambda=" << fmt("%.4g", focused.model.margin)
    << "); m=12288 stepwise 3x2000: " << fmt("%.1f", t_split) << "s (" << stepwise.report.query_count
    << " queries, lambda=" << fmt("%.4g", stepwise.model.margin) << ")";
  return {kap == 32 && t_focused < 120.0 && t_split < 600.0, d.str()};
}

Outcome criterion10() {
  const std::vector<Eigen::VectorXd> zero{Eigen::VectorXd::Zero(4)};
  const double eps = 0.01;
  const double b0 = adversarial_mass_bound(zero, 0.0, 3.0, 0.5, eps);
  Eigen::VectorXd a(2);
  a << 0.7, 5.0;
  const double b1 = adversarial_mass_bound({a}, -10.0, 10.0, 1.0, eps);
  bool threw = false;
  try {
    adversarial_mass_bound({a}, 20.0, 10.0, 1.0, eps);
  } catch (const ParameterError&) {
    threw = true;
  }
  const bool ok = b0 == eps && std::abs(b1 - eps / 3.0) <= 1e-15 && threw;
  std::ostringstream d;
  d << "zero case=" << b0 << " (eps " << eps << "), m=1 case=" << fmt("%.17g", b1) << " (eps/3 "
    << fmt("%.17g", eps / 3.0) << "), 2rL<=delta rejected=" << (threw ? "yes" : "no");
  return {ok, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome criterion11() {
  const fs::path dir = fs::temp_directory_path() / ("pacverify_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string model = (g_source_dir / "models" / "toy.json").string();
  {
    std::ofstream data(dir / "centers.csv");
    data << "0,0\n0.2,-0.1\n-0.5,0.5\n";
  }
  const std::vector<std::vector<std::string>> runs = {
      {"verify", "--model", model, "--center", "0,0", "--radius", "1", "--eps", "0.01", "--eta", "0.001", "--k1",
       "500", "--k2", "2182", "--kappa", "3", "--seed", "7"},
      {"verify", "--oracle-cmd", g_server + " " + model, "--center", "0,0", "--radius", "0.5", "--k2", "2182",
       "--kappa", "3", "--seed", "3", "--untargeted"},
      {"radius", "--model", model, "--center", "0,0", "--r-lo", "0", "--r-hi", "255", "--k1", "300", "--k2",
       "2182", "--kappa", "3", "--seed", "5"},
      {"rate", "--model", model, "--dataset", (dir / "centers.csv").string(), "--radius", "0.5", "--k1", "300",
       "--k2", "2182", "--kappa", "3", "--seed", "11", "--threads", "2"},
      {"calc", "--eps", "0.01", "--eta", "0.001", "--m", "2", "--n", "2", "--k2", "8000"},
      {"bound", "--model", model, "--center", "0,0", "--radius", "1", "--k1", "500", "--k2", "2182", "--kappa",
       "3", "--seed", "7", "--lipschitz", "40"},
  };
  int identical = 0;
  std::string failures;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::string texts[2];
    bool ran = true;
    for (int rep = 0; rep < 2; ++rep) {
      std::vector<std::string> args = runs[i];
      const fs::path out = dir / ("run" + std::to_string(i) + "_" + std::to_string(rep) + ".json");
      args.push_back("--out");
      args.push_back(out.string());
      std::ostringstream so, se;
      const int code = run_cli(args, so, se);
      if (code != kExitOk) {
        ran = false;
        failures += " " + runs[i][0] + "(exit " + std::to_string(code) + ": " + se.str() + ")";
      }
      texts[rep] = slurp(out);
    }
    identical += ran && !texts[0].empty() && texts[0] == texts[1];
  }
  fs::remove_all(dir);
  return {identical == static_cast<int>(runs.size()),
          std::to_string(identical) + "/" + std::to_string(runs.size()) +
              " CLI tasks byte-identical on repeat (verify, verify via subprocess oracle, radius, rate, calc, bound)" +
              failures};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance_tests SOURCE_DIR ORACLE_SERVER [criterion...]\n";
    return 2;
  }
  g_source_dir = argv[1];
  g_server = argv[2];
  std::vector<int> only;
  for (int i = 3; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 toy exactness", criterion1},        {"2 sample calculator", criterion2},
      {"3 toy pipeline replication", criterion3}, {"4 affine-oracle exactness", criterion4},
      {"5 LP vertex-enumeration equivalence", criterion5}, {"6 box-max oracle", criterion6},
      {"7 PAC guarantee property", criterion7}, {"8 robust implies PAC robust", criterion8},
      {"9 focused-learning scalability", criterion9}, {"10 adversarial-mass bound", criterion10},
      {"11 determinism", criterion11},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), static_cast<int>(i + 1)) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
