#ifndef PACVERIFY_MODEL_RUNTIME_HPP
#define PACVERIFY_MODEL_RUNTIME_HPP

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pacverify {

enum class Activation { relu, identity };

struct DenseLayer {
  Eigen::MatrixXd weights;  // rows = outputs of this layer, cols = inputs
  Eigen::VectorXd bias;
  Activation activation = Activation::identity;
};

/// A feed-forward network of dense layers, immutable once constructed.
///
/// The constructor enforces the dimension chain (first layer cols equal the
/// input dimension, each layer's rows feed the next layer's cols) and that
/// every weight and bias is finite.
class ClassifierModel {
 public:
  ClassifierModel(int input_dim, std::vector<DenseLayer> layers);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::VectorXd evaluate(std::span<const double> x) const;
  // Rows of `points` are inputs; rows of the result are the matching outputs.
  Eigen::MatrixXd evaluate_batch(const Eigen::MatrixXd& points) const;

 private:
  int input_dim_;
  int output_dim_;
  std::vector<DenseLayer> layers_;
};

ClassifierModel parse_model(std::string_view json_text);
ClassifierModel load_model(const std::filesystem::path& path);

/// Black-box access point to a classifier f: R^m -> R^n.
///
/// Every evaluated input row adds one to query_count(). Dimensions are fixed
/// for the lifetime of the handle.
class Oracle {
 public:
  virtual ~Oracle() = default;

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  std::uint64_t query_count() const { return queries_.load(); }

  Eigen::VectorXd forward(std::span<const double> x);
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& points);

 protected:
  Oracle(int input_dim, int output_dim);
  virtual Eigen::MatrixXd evaluate_rows(const Eigen::MatrixXd& points) = 0;

 private:
  int input_dim_;
  int output_dim_;
  std::atomic<std::uint64_t> queries_{0};
};

class ModelOracle final : public Oracle {
 public:
  explicit ModelOracle(std::shared_ptr<const ClassifierModel> model);
  explicit ModelOracle(ClassifierModel model);

  const ClassifierModel& model() const { return *model_; }

 protected:
  Eigen::MatrixXd evaluate_rows(const Eigen::MatrixXd& points) override;

 private:
  std::shared_ptr<const ClassifierModel> model_;
};

/// Oracle served by a child process over a line protocol on its stdin/stdout:
///   "DIM"                      -> "m n"
///   "EVAL k" + k lines of m    -> k lines of n floats
/// Access is serialized; concurrent callers see one request at a time.
class ProcessOracle final : public Oracle {
 public:
  // `command` is run through /bin/sh -c.
  static std::unique_ptr<ProcessOracle> spawn(const std::string& command);
  ~ProcessOracle() override;

  ProcessOracle(const ProcessOracle&) = delete;
  ProcessOracle& operator=(const ProcessOracle&) = delete;

 protected:
  Eigen::MatrixXd evaluate_rows(const Eigen::MatrixXd& points) override;

 private:
  struct Channel;
  ProcessOracle(std::unique_ptr<Channel> channel, int m, int n);

  std::unique_ptr<Channel> channel_;
  std::mutex io_mutex_;
};

enum class ScoreMode { targeted, untargeted };

struct ScoreDifference {
  Eigen::VectorXd values;   // f_i(x) - f_label(x), ascending i, i != label
  std::vector<int> labels;  // original output index of each component
};

// Labels are 0-based output indices. Ties in argmax go to the smallest index.
int argmax_label(std::span<const double> scores);
int classify(Oracle& oracle, std::span<const double> x);
ScoreDifference score_difference(Oracle& oracle, std::span<const double> x, int label);
// f_label(x) - max_{i != label} f_i(x); positive means classified as label.
double untargeted_score_difference(Oracle& oracle, std::span<const double> x, int label);

// Batch forms over an outputs matrix (rows = samples).
std::vector<int> component_labels(int output_dim, int label, ScoreMode mode);
Eigen::MatrixXd score_targets(const Eigen::MatrixXd& outputs, int label, ScoreMode mode);

}  // namespace pacverify

#endif  // PACVERIFY_MODEL_RUNTIME_HPP
