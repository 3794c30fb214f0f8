#pragma once

// Two-hidden-layer ReLU regression head trained on Huber loss:
//   h1 = dropout(relu(W1 z + b1)), h2 = dropout(relu(W2 h1 + b2)), y = W3 h2 + b3

#include <filesystem>
#include <string>
#include <vector>

#include "dimsweep/core.hpp"
#include "dimsweep/nn.hpp"

namespace dimsweep {

struct MlpConfig {
  Index hidden_dim = 64;
  double dropout = 0.1;
  double huber_delta = 1.0;
  int max_epochs = 100;
  int patience = 5;
  int batch_size = 256;
  AdamConfig adam{};
  bool zero_init_output = false;
  RngSeed seed{};

  void validate() const;
};

struct MlpModel {
  Network net;
  double dropout = 0.0;

  [[nodiscard]] Index input_dim() const { return net.input_dim(); }
  static MlpModel initialize(Index input_dim, const MlpConfig& cfg);
};

struct MlpTrainReport {
  double initial_train_loss = 0.0;  // before the first update, dropout off
  double initial_val_loss = 0.0;
  std::vector<double> train_loss;  // full-pass train loss per epoch, dropout off
  std::vector<double> val_loss;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

struct MlpTrainResult {
  MlpModel model;
  MlpTrainReport report;
};

MlpTrainResult mlp_fit(const Matrix& x_train, const Vector& y_train, const Matrix& x_val, const Vector& y_val,
                       const MlpConfig& cfg);

/// Inference forward pass; dropout is never applied.
Vector mlp_predict(const MlpModel& model, const Matrix& x);

/// Mean Huber loss of the model's predictions with dropout disabled.
double mlp_loss(const MlpModel& model, const Matrix& x, const Vector& y, double delta);

struct MlpGradient {
  double loss = 0.0;
  std::vector<LayerGradient> layers;
};

MlpGradient mlp_loss_gradient(const MlpModel& model, const Matrix& x, const Vector& y, double delta);

/// Analytic vs central finite-difference gradient, dropout disabled.
double mlp_gradient_check(const MlpModel& model, const Matrix& x, const Vector& y, double delta, RngSeed seed,
                          std::size_t samples = 0, double step = 1e-4);

std::string serialize_mlp(const MlpModel& model);
MlpModel deserialize_mlp(std::string_view blob);
void save_mlp(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_mlp(const std::filesystem::path& path);

}  // namespace dimsweep
