#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgpin/rng.hpp"

namespace mgpin {

/// Feedforward network: ReLU hidden layers, logistic outputs. Inputs are
/// standardized with per-feature mean and scale stored alongside the weights.
struct MlpModel {
  std::vector<int> layer_sizes;          // input, hidden..., output
  std::vector<Eigen::MatrixXd> weights;  // layer l: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;  // divides (x - mean); 1 for constant features

  /// He-initialised weights, zero biases, identity standardization.
  static MlpModel create(const std::vector<int>& layer_sizes, Rng& rng);

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }

  Eigen::VectorXd standardize(const Eigen::VectorXd& x) const;
  /// Output logits for standardized inputs, one column per sample.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& z) const;
  /// Probabilities for one raw feature vector.
  Eigen::VectorXd predict(const Eigen::VectorXd& x) const;

  long parameter_count() const;
  Eigen::VectorXd parameters() const;  // layer by layer: W (row-major), then b
  void set_parameters(const Eigen::VectorXd& p);
};

/// Mean binary cross-entropy over samples and outputs. Columns of `z` are
/// standardized inputs, columns of `y` targets in {0, 1}. If `grad` is
/// non-null it receives dLoss/dparameters in MlpModel::parameters order.
double bce_loss(const MlpModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
                Eigen::VectorXd* grad = nullptr);

struct TrainParams {
  std::vector<int> hidden = {64, 64};
  double learning_rate = 0.005;
  int epochs = 60;
  int batch_size = 32;
  double momentum = 0.9;
  double validation_split = 0.1;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;  // empty when there is no validation set
  int train_samples = 0;
  int validation_samples = 0;
};

/// Mini-batch gradient descent with momentum. Columns of x are raw features,
/// columns of y the labels. Deterministic for a fixed seed.
MlpModel train_mlp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const TrainParams& params,
                   TrainReport* report = nullptr);

std::string format_model(const MlpModel& model);
MlpModel parse_model(std::string_view text);
MlpModel read_model(const std::filesystem::path& path);

}  // namespace mgpin
