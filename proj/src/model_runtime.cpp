#include "pacverify/model_runtime.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pacverify/error.hpp"

namespace pacverify {

namespace {

std::string layer_field(std::size_t index, const char* field) {
  return "layers[" + std::to_string(index) + "]." + field;
}

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

void require_finite_input(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw DimensionError("input contains a non-finite value");
  }
}

}  // namespace

ClassifierModel::ClassifierModel(int input_dim, std::vector<DenseLayer> layers)
    : input_dim_(input_dim), output_dim_(0), layers_(std::move(layers)) {
  if (input_dim_ <= 0) throw ModelFormatError("input_dim must be positive");
  if (layers_.empty()) throw ModelFormatError("model has no layers");
  Eigen::Index expected = input_dim_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& layer = layers_[i];
    if (layer.weights.rows() == 0) {
      throw ModelFormatError(layer_field(i, "weights") + ": layer has no outputs");
    }
    if (layer.weights.cols() != expected) {
      throw ModelFormatError(layer_field(i, "weights") + ": expected " +
                             std::to_string(expected) + " columns, got " +
                             std::to_string(layer.weights.cols()));
    }
    if (layer.bias.size() != layer.weights.rows()) {
      throw ModelFormatError(layer_field(i, "bias") + ": expected length " +
                             std::to_string(layer.weights.rows()) + ", got " +
                             std::to_string(layer.bias.size()));
    }
    if (!all_finite(layer.weights)) {
      throw ModelFormatError(layer_field(i, "weights") + ": non-finite value");
    }
    if (!all_finite(layer.bias)) {
      throw ModelFormatError(layer_field(i, "bias") + ": non-finite value");
    }
    expected = layer.weights.rows();
  }
  output_dim_ = static_cast<int>(expected);
}

Eigen::VectorXd ClassifierModel::evaluate(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != input_dim_) {
    throw DimensionError("input has length " + std::to_string(x.size()) +
                         ", model expects " + std::to_string(input_dim_));
  }
  Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(x.data(), input_dim_);
  for (const DenseLayer& layer : layers_) {
    Eigen::VectorXd next = layer.weights * h + layer.bias;
    if (layer.activation == Activation::relu) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

Eigen::MatrixXd ClassifierModel::evaluate_batch(const Eigen::MatrixXd& points) const {
  if (points.cols() != input_dim_) {
    throw DimensionError("batch has " + std::to_string(points.cols()) +
                         " columns, model expects " + std::to_string(input_dim_));
  }
  Eigen::MatrixXd h = points;
  for (const DenseLayer& layer : layers_) {
    Eigen::MatrixXd next = h * layer.weights.transpose();
    next.rowwise() += layer.bias.transpose();
    if (layer.activation == Activation::relu) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

ClassifierModel parse_model(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ModelFormatError(std::string("model JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ModelFormatError("model JSON: top level must be an object");
  if (!doc.contains("input_dim") || !doc["input_dim"].is_number_integer()) {
    throw ModelFormatError("input_dim: missing or not an integer");
  }
  if (!doc.contains("layers") || !doc["layers"].is_array()) {
    throw ModelFormatError("layers: missing or not an array");
  }
  const int input_dim = doc["input_dim"].get<int>();
  std::vector<DenseLayer> layers;
  const json& arr = doc["layers"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& spec = arr[i];
    if (!spec.is_object()) throw ModelFormatError(layer_field(i, "") + " must be an object");
    const std::string type = spec.value("type", std::string("dense"));
    if (type != "dense") {
      throw ModelFormatError(layer_field(i, "type") + ": unsupported layer type '" + type + "'");
    }
    if (!spec.contains("weights") || !spec["weights"].is_array()) {
      throw ModelFormatError(layer_field(i, "weights") + ": missing or not an array");
    }
    if (!spec.contains("bias") || !spec["bias"].is_array()) {
      throw ModelFormatError(layer_field(i, "bias") + ": missing or not an array");
    }
    DenseLayer layer;
    const json& w = spec["weights"];
    const std::size_t rows = w.size();
    const std::size_t cols = rows > 0 && w[0].is_array() ? w[0].size() : 0;
    layer.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      if (!w[r].is_array() || w[r].size() != cols) {
        throw ModelFormatError(layer_field(i, "weights") + ": row " + std::to_string(r) +
                               " has inconsistent length");
      }
      for (std::size_t c = 0; c < cols; ++c) {
        if (!w[r][c].is_number()) {
          throw ModelFormatError(layer_field(i, "weights") + ": non-numeric entry at [" +
                                 std::to_string(r) + "][" + std::to_string(c) + "]");
        }
        layer.weights(r, c) = w[r][c].get<double>();
      }
    }
    const json& b = spec["bias"];
    layer.bias.resize(static_cast<Eigen::Index>(b.size()));
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (!b[k].is_number()) {
        throw ModelFormatError(layer_field(i, "bias") + ": non-numeric entry at [" +
                               std::to_string(k) + "]");
      }
      layer.bias(k) = b[k].get<double>();
    }
    const std::string act = spec.value("activation", std::string("identity"));
    if (act == "relu") {
      layer.activation = Activation::relu;
    } else if (act == "identity" || act == "linear") {
      layer.activation = Activation::identity;
    } else {
      throw ModelFormatError(layer_field(i, "activation") + ": unknown activation '" + act + "'");
    }
    layers.push_back(std::move(layer));
  }
  return ClassifierModel(input_dim, std::move(layers));
}

ClassifierModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelFormatError("cannot open model file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_model(buffer.str());
  } catch (const ModelFormatError& e) {
    throw ModelFormatError(path.string() + ": " + e.what());
  }
}

Oracle::Oracle(int input_dim, int output_dim) : input_dim_(input_dim), output_dim_(output_dim) {
  if (input_dim <= 0 || output_dim <= 0) throw DimensionError("oracle dimensions must be positive");
}

Eigen::VectorXd Oracle::forward(std::span<const double> x) {
  if (static_cast<int>(x.size()) != input_dim_) {
    throw DimensionError("input has length " + std::to_string(x.size()) +
                         ", oracle expects " + std::to_string(input_dim_));
  }
  require_finite_input(x);
  Eigen::MatrixXd row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), input_dim_);
  Eigen::MatrixXd out = forward_batch(row);
  return out.row(0).transpose();
}

Eigen::MatrixXd Oracle::forward_batch(const Eigen::MatrixXd& points) {
  if (points.cols() != input_dim_) {
    throw DimensionError("batch has " + std::to_string(points.cols()) +
                         " columns, oracle expects " + std::to_string(input_dim_));
  }
  if (!points.allFinite()) throw DimensionError("batch contains a non-finite value");
  if (points.rows() == 0) return Eigen::MatrixXd(0, output_dim_);
  Eigen::MatrixXd out = evaluate_rows(points);
  if (out.rows() != points.rows() || out.cols() != output_dim_) {
    throw OracleError("oracle returned a result of the wrong shape");
  }
  queries_.fetch_add(static_cast<std::uint64_t>(points.rows()));
  return out;
}

ModelOracle::ModelOracle(std::shared_ptr<const ClassifierModel> model)
    : Oracle(model->input_dim(), model->output_dim()), model_(std::move(model)) {}

ModelOracle::ModelOracle(ClassifierModel model)
    : ModelOracle(std::make_shared<const ClassifierModel>(std::move(model))) {}

Eigen::MatrixXd ModelOracle::evaluate_rows(const Eigen::MatrixXd& points) {
  return model_->evaluate_batch(points);
}

int argmax_label(std::span<const double> scores) {
  if (scores.empty()) throw DimensionError("argmax of an empty score vector");
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = static_cast<int>(i);
  }
  return best;
}

int classify(Oracle& oracle, std::span<const double> x) {
  Eigen::VectorXd scores = oracle.forward(x);
  return argmax_label(std::span<const double>(scores.data(), scores.size()));
}

namespace {

void require_label(int output_dim, int label) {
  if (label < 0 || label >= output_dim) {
    throw ParameterError("label " + std::to_string(label) + " outside [0, " +
                         std::to_string(output_dim) + ")");
  }
}

}  // namespace

ScoreDifference score_difference(Oracle& oracle, std::span<const double> x, int label) {
  require_label(oracle.output_dim(), label);
  Eigen::VectorXd scores = oracle.forward(x);
  ScoreDifference out;
  out.labels = component_labels(oracle.output_dim(), label, ScoreMode::targeted);
  out.values.resize(static_cast<Eigen::Index>(out.labels.size()));
  for (std::size_t k = 0; k < out.labels.size(); ++k) {
    out.values(k) = scores(out.labels[k]) - scores(label);
  }
  return out;
}

double untargeted_score_difference(Oracle& oracle, std::span<const double> x, int label) {
  require_label(oracle.output_dim(), label);
  if (oracle.output_dim() < 2) throw ParameterError("untargeted score needs at least two outputs");
  Eigen::VectorXd scores = oracle.forward(x);
  double rival = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < scores.size(); ++i) {
    if (i != label) rival = std::max(rival, scores(i));
  }
  return scores(label) - rival;
}

std::vector<int> component_labels(int output_dim, int label, ScoreMode mode) {
  require_label(output_dim, label);
  if (output_dim < 2) throw ParameterError("score differences need at least two outputs");
  if (mode == ScoreMode::untargeted) return {-1};
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(output_dim - 1));
  for (int i = 0; i < output_dim; ++i) {
    if (i != label) labels.push_back(i);
  }
  return labels;
}

Eigen::MatrixXd score_targets(const Eigen::MatrixXd& outputs, int label, ScoreMode mode) {
  const int n = static_cast<int>(outputs.cols());
  require_label(n, label);
  if (n < 2) throw ParameterError("score differences need at least two outputs");
  if (mode == ScoreMode::untargeted) {
    Eigen::MatrixXd out(outputs.rows(), 1);
    for (Eigen::Index k = 0; k < outputs.rows(); ++k) {
      double rival = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (i != label) rival = std::max(rival, outputs(k, i));
      }
      out(k, 0) = outputs(k, label) - rival;
    }
    return out;
  }
  Eigen::MatrixXd out(outputs.rows(), n - 1);
  int col = 0;
  for (int i = 0; i < n; ++i) {
    if (i == label) continue;
    out.col(col++) = outputs.col(i) - outputs.col(label);
  }
  return out;
}

}  // namespace pacverify
