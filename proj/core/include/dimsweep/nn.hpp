#pragma once

// Dense layers with hand-written backprop, the Adam update rule, and the
// patience-based early-stopping tracker shared by the autoencoder and the MLP
// regression head.

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "dimsweep/core.hpp"

namespace dimsweep {

enum class Activation : std::uint8_t { Identity = 0, Relu = 1 };

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::Identity;

  [[nodiscard]] Index inputs() const { return weight.cols(); }
  [[nodiscard]] Index outputs() const { return weight.rows(); }

  /// Weights and bias uniform in +-1/sqrt(fan_in).
  static DenseLayer uniform(Index in, Index out, Activation act, std::mt19937_64& rng);
  static DenseLayer zeros(Index in, Index out, Activation act);
};

struct LayerGradient {
  Matrix weight;
  Vector bias;
};

/// Activations recorded by a training forward pass.
struct ForwardTape {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> activations;  // post-activation, pre-dropout
  std::vector<Matrix> masks;        // scaled dropout masks; empty when inactive
};

/// A feed-forward stack of dense layers. Batches are row-major in meaning:
/// one sample per row.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

  [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }
  [[nodiscard]] std::vector<DenseLayer>& layers() { return layers_; }
  [[nodiscard]] Index input_dim() const { return layers_.front().inputs(); }
  [[nodiscard]] Index output_dim() const { return layers_.back().outputs(); }

  [[nodiscard]] Matrix forward(const Matrix& x) const;

  /// Training pass. Dropout with probability `dropout` is applied after every
  /// ReLU layer when `rng` is non-null and dropout > 0.
  Matrix forward(const Matrix& x, ForwardTape& tape, double dropout, std::mt19937_64* rng) const;

  /// Writes parameter gradients into `grads` (resized as needed) given
  /// dLoss/dOutput, and returns dLoss/dInput (empty when `input_gradient` is
  /// false).
  Matrix backward(const ForwardTape& tape, const Matrix& grad_output, std::vector<LayerGradient>& grads,
                  bool input_gradient = true) const;

  [[nodiscard]] std::size_t parameter_count() const;
  /// Flat parameter view: layer by layer, weights (row-major) then bias.
  [[nodiscard]] double& parameter(std::size_t index);
  [[nodiscard]] double parameter(std::size_t index) const;

  /// Rounds every parameter to the nearest 32-bit float (storage precision).
  void round_to_storage();
  [[nodiscard]] bool all_finite() const;

 private:
  std::vector<DenseLayer> layers_;
};

double flat_gradient(const std::vector<LayerGradient>& grads, std::size_t index);

/// |analytic - numeric| / max(|analytic|, |numeric|, floor)
double relative_gradient_error(double analytic, double numeric, double floor = 1e-6);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const Network& net, AdamConfig cfg);
  void step(Network& net, const std::vector<LayerGradient>& grads);

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<LayerGradient> m_;
  std::vector<LayerGradient> v_;
};

/// Tracks validation loss per epoch. An epoch improves only on a strict
/// decrease; training should stop after `patience` consecutive epochs
/// without improvement. Epochs are numbered from 1.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  /// Records the next epoch's validation loss; returns true if it improved.
  bool update(double val_loss);
  [[nodiscard]] bool should_stop() const { return since_best_ >= patience_; }
  [[nodiscard]] int best_epoch() const { return best_epoch_; }
  [[nodiscard]] double best_loss() const { return best_loss_; }
  [[nodiscard]] int epochs_seen() const { return epochs_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = 0;
  int since_best_ = 0;
  double best_loss_;
};

}  // namespace dimsweep
