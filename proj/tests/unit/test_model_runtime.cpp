#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "pacverify/error.hpp"
#include "pacverify/model_runtime.hpp"
#include "test_support.hpp"

using namespace pacverify;

namespace {

const char* kToy = R"({"input_dim": 2, "layers": [
  {"type": "dense", "weights": [[3, -10], [5, -4]], "bias": [-9, -10], "activation": "relu"},
  {"type": "dense", "weights": [[3, 1], [9, 7]], "bias": [14, -10], "activation": "identity"}]})";

Eigen::VectorXd eval(const ClassifierModel& m, std::initializer_list<double> x) {
  std::vector<double> v(x);
  return m.evaluate(v);
}

}  // namespace

TEST(ModelRuntime, ToyForwardIsExact) {
  const ClassifierModel m = parse_model(kToy);
  EXPECT_EQ(m.input_dim(), 2);
  EXPECT_EQ(m.output_dim(), 2);
  const Eigen::VectorXd a = eval(m, {0.0, 0.0});
  const Eigen::VectorXd b = eval(m, {1.0, -1.0});
  EXPECT_EQ(a(0), 14.0);
  EXPECT_EQ(a(1), -10.0);
  EXPECT_EQ(b(0), 26.0);
  EXPECT_EQ(b(1), 26.0);
}

TEST(ModelRuntime, IdentityLayer) {
  const ClassifierModel m = parse_model(
      R"({"input_dim": 2, "layers": [{"weights": [[1, 0], [0, 1]], "bias": [0, 0], "activation": "identity"}]})");
  const Eigen::VectorXd y = eval(m, {2.0, 3.0});
  EXPECT_EQ(y(0), 2.0);
  EXPECT_EQ(y(1), 3.0);
}

TEST(ModelRuntime, ClassifyAndTies) {
  ModelOracle oracle(parse_model(kToy));
  const double x[2] = {0.0, 0.0};
  EXPECT_EQ(classify(oracle, x), 0);
  const double tie[2] = {5.0, 5.0};
  EXPECT_EQ(argmax_label(tie), 0);
  const double plain[3] = {0.0, 1.0, 3.0};
  EXPECT_EQ(argmax_label(plain), 2);
}

TEST(ModelRuntime, ScoreDifferences) {
  ModelOracle oracle(parse_model(kToy));
  const double x0[2] = {0.0, 0.0};
  const double x1[2] = {1.0, -1.0};
  const ScoreDifference d0 = score_difference(oracle, x0, 0);
  ASSERT_EQ(d0.values.size(), 1);
  EXPECT_EQ(d0.values(0), -24.0);
  EXPECT_EQ(d0.labels, std::vector<int>{1});
  EXPECT_EQ(score_difference(oracle, x1, 0).values(0), 0.0);
  EXPECT_EQ(untargeted_score_difference(oracle, x0, 0), 24.0);
  EXPECT_EQ(untargeted_score_difference(oracle, x1, 0), 0.0);
  EXPECT_THROW(score_difference(oracle, x0, 2), ParameterError);
  EXPECT_THROW(score_difference(oracle, x0, -1), ParameterError);

  Eigen::MatrixXd out(1, 3);
  out << 1, 2, 9;
  EXPECT_EQ(score_targets(out, 2, ScoreMode::untargeted)(0, 0), 7.0);
  const Eigen::MatrixXd t = score_targets(out, 1, ScoreMode::targeted);
  ASSERT_EQ(t.cols(), 2);
  EXPECT_EQ(t(0, 0), -1.0);
  EXPECT_EQ(t(0, 1), 7.0);
  EXPECT_EQ(component_labels(4, 2, ScoreMode::targeted), (std::vector<int>{0, 1, 3}));
  EXPECT_EQ(component_labels(4, 2, ScoreMode::untargeted), std::vector<int>{-1});
}

TEST(ModelRuntime, ScoreDifferenceSignMatchesClassification) {
  ModelOracle oracle(fixtures::random_mlp({4, 8, 3}, 3));
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 200; ++t) {
    double x[4];
    for (double& v : x) v = u(gen);
    const int label = classify(oracle, x);
    for (int l = 0; l < 3; ++l) {
      const ScoreDifference d = score_difference(oracle, x, l);
      const bool all_negative = (d.values.array() < 0.0).all();
      EXPECT_EQ(all_negative, l == label);
      EXPECT_EQ(untargeted_score_difference(oracle, x, l) > 0.0, l == label);
    }
  }
}

TEST(ModelRuntime, ReluOutputsNonnegativeAndArgmaxScaleInvariant) {
  const ClassifierModel base = fixtures::random_mlp({5, 6, 4}, 11);
  std::vector<DenseLayer> hidden_only{base.layers()[0]};
  const ClassifierModel hidden(5, hidden_only);
  std::vector<DenseLayer> scaled_layers = base.layers();
  scaled_layers.back().weights *= 3.5;
  scaled_layers.back().bias *= 3.5;
  ModelOracle a(base);
  ModelOracle b(ClassifierModel(5, scaled_layers));
  std::mt19937_64 gen(2);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    double x[5];
    for (double& v : x) v = g(gen);
    EXPECT_TRUE((hidden.evaluate(x).array() >= 0.0).all());
    EXPECT_EQ(classify(a, x), classify(b, x));
  }
}

TEST(ModelRuntime, QueryCountAndDeterminism) {
  ModelOracle oracle(parse_model(kToy));
  EXPECT_EQ(oracle.query_count(), 0u);
  const double x[2] = {0.3, -0.2};
  const Eigen::VectorXd y1 = oracle.forward(x);
  const Eigen::VectorXd y2 = oracle.forward(x);
  EXPECT_EQ(oracle.query_count(), 2u);
  EXPECT_EQ(y1, y2);
  Eigen::MatrixXd batch = Eigen::MatrixXd::Random(7, 2);
  const Eigen::MatrixXd yb = oracle.forward_batch(batch);
  EXPECT_EQ(oracle.query_count(), 9u);
  EXPECT_EQ(yb.row(0).transpose(), oracle.forward(std::span<const double>(Eigen::VectorXd(batch.row(0).transpose()).data(), 2)));
}

TEST(ModelRuntime, DimensionAndFiniteness) {
  ModelOracle oracle(parse_model(kToy));
  const double bad[3] = {0, 0, 0};
  EXPECT_THROW(oracle.forward(bad), DimensionError);
  const double nan[2] = {std::nan(""), 0};
  EXPECT_THROW(oracle.forward(nan), DimensionError);
  EXPECT_THROW(oracle.forward_batch(Eigen::MatrixXd::Zero(2, 3)), DimensionError);
}

TEST(ModelRuntime, LoadErrors) {
  EXPECT_THROW(parse_model("{"), ModelFormatError);
  EXPECT_THROW(parse_model(R"({"input_dim": 2, "layers": []})"), ModelFormatError);
  try {
    parse_model(R"({"input_dim": 2, "layers": [{"weights": [[1, 0], [0, 1]], "bias": [0], "activation": "relu"}]})");
    FAIL() << "mismatched bias accepted";
  } catch (const ModelFormatError& e) {
    EXPECT_NE(std::string(e.what()).find("layers[0].bias"), std::string::npos);
  }
  EXPECT_THROW(parse_model(R"({"input_dim": 3, "layers": [{"weights": [[1, 0]], "bias": [0], "activation": "relu"}]})"),
               ModelFormatError);
  EXPECT_THROW(parse_model(R"({"input_dim": 2, "layers": [{"weights": [[1, 0]], "bias": [0], "activation": "tanh"}]})"),
               ModelFormatError);
  EXPECT_THROW(parse_model(R"({"input_dim": 2, "layers": [{"type": "conv", "weights": [[1, 0]], "bias": [0]}]})"),
               ModelFormatError);
  EXPECT_THROW(load_model("/nonexistent/model.json"), ModelFormatError);
}

TEST(ModelRuntime, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "pacverify_toy_test.json";
  std::ofstream(path) << kToy;
  const ClassifierModel m = load_model(path);
  EXPECT_EQ(eval(m, {0.0, 0.0})(0), 14.0);
  std::filesystem::remove(path);
}

TEST(ProcessOracle, MatchesInProcessModel) {
  const std::string cmd = std::string(PACVERIFY_ORACLE_SERVER) + " " + PACVERIFY_SOURCE_DIR + "/models/toy.json";
  auto remote = ProcessOracle::spawn(cmd);
  EXPECT_EQ(remote->input_dim(), 2);
  EXPECT_EQ(remote->output_dim(), 2);
  ModelOracle local(fixtures::toy_model());
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(50, 2);
  EXPECT_EQ(remote->forward_batch(x), local.forward_batch(x));
  EXPECT_EQ(remote->query_count(), 50u);
  EXPECT_THROW(remote->forward_batch(Eigen::MatrixXd::Zero(1, 3)), DimensionError);
}

TEST(ProcessOracle, ProtocolFailures) {
  EXPECT_THROW(ProcessOracle::spawn("exit 0"), OracleError);
  EXPECT_THROW(ProcessOracle::spawn("echo not a reply"), OracleError);
  EXPECT_THROW(ProcessOracle::spawn("echo 2 0"), OracleError);
  // Handshake fine, evaluation replies garbage.
  auto bad = ProcessOracle::spawn("read l; echo 2 2; read l; read l; echo 1 nan");
  EXPECT_THROW(bad->forward_batch(Eigen::MatrixXd::Zero(1, 2)), OracleError);
  auto short_reply = ProcessOracle::spawn("read l; echo 2 2; read l; read l; echo 1");
  EXPECT_THROW(short_reply->forward_batch(Eigen::MatrixXd::Zero(1, 2)), OracleError);
}
