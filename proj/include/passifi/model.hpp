#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "passifi/fingerprint.hpp"
#include "passifi/geometry.hpp"

namespace passifi {

struct ModelConfig {
  int input_size{0};                 // n, layout responder count
  int hidden_layers{4};
  int hidden_width{300};
  double dropout_rate{0.10};
  double learning_rate{0.001};
  int patience{50};                  // epochs without validation improvement
  int max_epochs{500};
  int batch_size{64};
  double validation_fraction{0.2};
  std::uint64_t seed{1};

  void validate() const;
};

struct EpochStats {
  double train_loss{0.0};
  double validation_loss{0.0};
};

// Fully connected regression network: input -> rectified hidden layers with
// inverted dropout -> linear two-neuron output (x, y).
struct TrainedModel {
  ModelConfig config;
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is out x in
  std::vector<Eigen::VectorXd> biases;
  std::vector<EpochStats> history;
  // Normalizer snapshot persisted alongside the weights so a model file is a
  // complete deployment artifact.
  std::vector<double> feature_min;
  std::vector<double> feature_max;

  std::size_t parameter_count() const;
  std::vector<int> layer_sizes() const;  // [n, width..., 2]
};

enum class ForwardMode { Train, Infer };

/// Untrained model with zero biases and uniform weights scaled by 1/sqrt(fan_in).
TrainedModel init_model(const ModelConfig& config);

/// Single-record inference. Train mode applies inverted dropout driven by the
/// seed; infer mode is deterministic.
Point2D forward(const TrainedModel& model, std::span<const double> features, ForwardMode mode,
                std::uint64_t seed = 0);

/// Mini-batch Adam on mean-squared coordinate error with early stopping on a
/// held-out validation split; returns the weights of the best validation
/// epoch. Deterministic given (data, config, seed).
TrainedModel train(TrainedModel model, std::span<const FingerprintRecord> records,
                   const ModelConfig& config);

/// Max relative disagreement between backpropagated gradients and central
/// finite differences over >= 100 sampled parameters. Dropout disabled.
double gradient_check(const TrainedModel& model, const FingerprintRecord& record, double epsilon);

// Versioned little-endian binary; weights are row-major 64-bit floats.
// Round-trips exactly.
void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

}  // namespace passifi
