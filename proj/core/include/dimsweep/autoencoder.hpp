#pragma once

// Encoder/decoder pair compressing d-dimensional embeddings to a latent
// width, trained on mean squared reconstruction error with validation-based
// early stopping.

#include <filesystem>
#include <string>
#include <vector>

#include "dimsweep/core.hpp"
#include "dimsweep/nn.hpp"

namespace dimsweep {

struct AutoencoderModel {
  Network encoder;
  Network decoder;

  [[nodiscard]] Index input_dim() const { return encoder.input_dim(); }
  [[nodiscard]] Index latent_dim() const { return encoder.output_dim(); }

  /// Affine encoder and decoder; with hidden_width > 0 each side gets one
  /// extra ReLU layer of that width.
  static AutoencoderModel initialize(Index input_dim, Index latent_dim, Index hidden_width, RngSeed seed);
};

struct AeTrainConfig {
  int max_epochs = 100;
  int patience = 5;
  int batch_size = 256;
  AdamConfig adam{};
  Index hidden_width = 0;
  RngSeed seed{};

  void validate() const;
};

struct AeTrainReport {
  std::vector<double> train_loss;  // mean minibatch loss per epoch
  std::vector<double> val_loss;
  int best_epoch = 0;  // 1-based
  double best_val_loss = 0.0;
  bool stopped_early = false;
  bool latent_exceeds_input = false;
};

struct AeTrainResult {
  AutoencoderModel model;
  AeTrainReport report;
};

/// Trains on the train split, early-stops on the val split. Parameters of the
/// returned model are the best-validation snapshot at f32 storage precision.
AeTrainResult ae_train(const EmbeddingDataset& dataset, const AeTrainConfig& cfg, Index latent_dim);
AeTrainResult ae_train(const Matrix& train, const Matrix& val, const AeTrainConfig& cfg, Index latent_dim);

Vector ae_encode(const AutoencoderModel& model, const Vector& v);
Vector ae_decode(const AutoencoderModel& model, const Vector& z);
/// Row-wise batch versions (one sample per row).
Matrix ae_encode_batch(const AutoencoderModel& model, const Matrix& x);
Matrix ae_decode_batch(const AutoencoderModel& model, const Matrix& z);

/// (1/N) sum_i ||v_i - D(E(v_i))||^2
double ae_loss(const AutoencoderModel& model, const Matrix& batch);

struct AeGradient {
  double loss = 0.0;
  std::vector<LayerGradient> encoder;
  std::vector<LayerGradient> decoder;
};

AeGradient ae_loss_gradient(const AutoencoderModel& model, const Matrix& batch);

/// Largest relative deviation between the analytic gradient and central
/// finite differences over `samples` randomly chosen parameters (all of them
/// when samples is 0 or exceeds the parameter count).
double ae_gradient_check(const AutoencoderModel& model, const Matrix& batch, RngSeed seed, std::size_t samples = 0,
                         double step = 1e-4);

std::string serialize_autoencoder(const AutoencoderModel& model);
AutoencoderModel deserialize_autoencoder(std::string_view blob);
void save_autoencoder(const std::filesystem::path& path, const AutoencoderModel& model);
AutoencoderModel load_autoencoder(const std::filesystem::path& path);

}  // namespace dimsweep
