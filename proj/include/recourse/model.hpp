#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "recourse/errors.hpp"

#include "json.hpp"

namespace recourse {

enum class ArchKind { linear, mlp };
enum class Activation { relu, tanh };

struct ArchSpec {
  ArchKind kind = ArchKind::linear;
  std::vector<int> hidden;  // ignored for linear
  Activation activation = Activation::tanh;

  static ArchSpec linear() { return {}; }
  static ArchSpec make_mlp(std::vector<int> hidden_sizes,
                           Activation act = Activation::tanh) {
    return {ArchKind::mlp, std::move(hidden_sizes), act};
  }
  std::vector<int> layer_dims(int input_dim) const;  // in, hidden..., 1
  int param_count(int input_dim) const;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 2000;
  int batch_size = 1 << 30;  // >= n gives full-batch descent (default)
  std::uint64_t seed = 0;
  double l2 = 0.0;
  double momentum = 0.9;

  void validate() const;
};

// Fully-connected net with a single linear output. Parameters live in one
// flat vector (per layer: row-major weights, then biases) so models can be
// serialized and rebuilt exactly.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int input_dim, ArchSpec arch);

  int input_dim() const { return input_dim_; }
  const ArchSpec& arch() const { return arch_; }
  const Eigen::VectorXd& params() const { return params_; }
  void set_params(Eigen::VectorXd p);

  // Uniform in +-1/sqrt(fan_in) per layer, biases zero.
  void init_params(std::uint64_t seed);

  double value(const Eigen::VectorXd& z) const;
  Eigen::VectorXd value_batch(const Eigen::MatrixXd& Z) const;
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& z) const;

  // Accumulates d(sum of per-row dLoss/dOut * out)/dparams for a batch;
  // `dout` holds dLoss/dOut per row. Returns the parameter gradient.
  Eigen::VectorXd param_gradient(const Eigen::MatrixXd& Z,
                                 const Eigen::VectorXd& dout) const;

  // L2 gradient touches weights only, never biases.
  void add_weight_decay(double l2, Eigen::VectorXd& grad) const;

 private:
  int input_dim_ = 0;
  ArchSpec arch_;
  std::vector<int> dims_;
  Eigen::VectorXd params_;
};

// Per-column affine standardization fitted on training data. Passthrough
// columns (categorical codes) keep mean 0 / scale 1; constant columns fall
// back to scale 1.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return (x - mean).cwiseQuotient(scale);
  }
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& X) const;

  static Standardizer fit(const Eigen::MatrixXd& X,
                          const std::vector<bool>& passthrough = {});
};

// Regressor over a fixed, ordered set of parent features. Standardization of
// inputs and target lives inside the model, so prediction is self-contained.
class RegressorModel {
 public:
  RegressorModel() = default;
  RegressorModel(std::vector<std::string> input_names, Mlp net,
                 Standardizer input_std, double output_mean,
                 double output_scale);

  const std::vector<std::string>& input_names() const { return input_names_; }
  const ArchSpec& arch() const { return net_.arch(); }
  const Eigen::VectorXd& params() const { return net_.params(); }

  double predict(const Eigen::VectorXd& parent_values) const;
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& rows) const;
  // d prediction / d raw inputs, via backpropagation.
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& parent_values) const;

  nlohmann::json to_json() const;
  static RegressorModel from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> input_names_;
  Mlp net_;
  Standardizer input_std_;
  double output_mean_ = 0.0;
  double output_scale_ = 1.0;
};

// Binary classifier; the score is a sigmoid-squashed logit, so it stays in
// [0,1] for any input. The raw logit and its gradient are exposed as well:
// searches descend on the logit axis, where the signal does not saturate.
class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(std::vector<std::string> input_names, Mlp net,
                  Standardizer input_std, double train_accuracy);

  const std::vector<std::string>& input_names() const { return input_names_; }
  const ArchSpec& arch() const { return net_.arch(); }
  const Eigen::VectorXd& params() const { return net_.params(); }
  double train_accuracy() const { return train_accuracy_; }

  double logit(const Eigen::VectorXd& x) const;
  double score(const Eigen::VectorXd& x) const;  // sigmoid(logit), in [0,1]
  int classify(const Eigen::VectorXd& x, double threshold) const {
    return score(x) > threshold ? 1 : 0;
  }
  Eigen::VectorXd logit_gradient(const Eigen::VectorXd& x) const;
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& x) const;  // d score/dx

  Eigen::VectorXd score_batch(const Eigen::MatrixXd& rows) const;

  nlohmann::json to_json() const;
  static ClassifierModel from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> input_names_;
  Mlp net_;
  Standardizer input_std_;
  double train_accuracy_ = 0.0;
};

// Least-squares fit by deterministic gradient descent (seeded init,
// contiguous batches, classic momentum).
RegressorModel fit_regressor(const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& targets,
                             std::vector<std::string> input_names,
                             const ArchSpec& arch, const TrainConfig& cfg,
                             const std::vector<bool>& passthrough = {});

// Binary cross-entropy fit; requires both classes present.
ClassifierModel fit_classifier(const Eigen::MatrixXd& X,
                               const Eigen::VectorXi& y,
                               std::vector<std::string> input_names,
                               const ArchSpec& arch, const TrainConfig& cfg,
                               const std::vector<bool>& passthrough = {});

double sigmoid(double z);

nlohmann::json arch_to_json(const ArchSpec& a);
ArchSpec arch_from_json(const nlohmann::json& j);

}  // namespace recourse
