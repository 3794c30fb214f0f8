#include "dimsweep/autoencoder.hpp"

#include <algorithm>
#include <cmath>

#include "dimsweep/binary_io.hpp"

namespace dimsweep {

AutoencoderModel AutoencoderModel::initialize(Index input_dim, Index latent_dim, Index hidden_width, RngSeed seed) {
  if (input_dim < 1 || latent_dim < 1) throw Error("autoencoder dimensions must be positive");
  auto rng = make_engine(seed);
  std::vector<DenseLayer> enc;
  std::vector<DenseLayer> dec;
  if (hidden_width > 0) {
    enc.push_back(DenseLayer::uniform(input_dim, hidden_width, Activation::Relu, rng));
    enc.push_back(DenseLayer::uniform(hidden_width, latent_dim, Activation::Identity, rng));
    dec.push_back(DenseLayer::uniform(latent_dim, hidden_width, Activation::Relu, rng));
    dec.push_back(DenseLayer::uniform(hidden_width, input_dim, Activation::Identity, rng));
  } else {
    enc.push_back(DenseLayer::uniform(input_dim, latent_dim, Activation::Identity, rng));
    dec.push_back(DenseLayer::uniform(latent_dim, input_dim, Activation::Identity, rng));
  }
  return {Network(std::move(enc)), Network(std::move(dec))};
}

void AeTrainConfig::validate() const {
  if (max_epochs < 1) throw Error("autoencoder max_epochs must be positive");
  if (patience < 1 || patience >= max_epochs) throw Error("autoencoder patience must lie in [1, max_epochs)");
  if (batch_size < 1) throw Error("autoencoder batch size must be positive");
  if (!(adam.learning_rate > 0.0)) throw Error("autoencoder learning rate must be positive");
  if (hidden_width < 0) throw Error("autoencoder hidden width must be non-negative");
}

Vector ae_encode(const AutoencoderModel& model, const Vector& v) {
  if (v.size() != model.input_dim()) {
    throw Error("encode: input has dimension " + std::to_string(v.size()) + ", model expects " +
                std::to_string(model.input_dim()));
  }
  return model.encoder.forward(v.transpose()).transpose();
}

Vector ae_decode(const AutoencoderModel& model, const Vector& z) {
  if (z.size() != model.latent_dim()) {
    throw Error("decode: latent has dimension " + std::to_string(z.size()) + ", model expects " +
                std::to_string(model.latent_dim()));
  }
  return model.decoder.forward(z.transpose()).transpose();
}

Matrix ae_encode_batch(const AutoencoderModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim()) throw Error("encode: input dimension mismatch");
  return model.encoder.forward(x);
}

Matrix ae_decode_batch(const AutoencoderModel& model, const Matrix& z) {
  if (z.cols() != model.latent_dim()) throw Error("decode: latent dimension mismatch");
  return model.decoder.forward(z);
}

double ae_loss(const AutoencoderModel& model, const Matrix& batch) {
  if (batch.rows() == 0) throw Error("reconstruction loss of an empty batch");
  const Matrix recon = model.decoder.forward(model.encoder.forward(batch));
  return (recon - batch).squaredNorm() / static_cast<double>(batch.rows());
}

AeGradient ae_loss_gradient(const AutoencoderModel& model, const Matrix& batch) {
  if (batch.rows() == 0) throw Error("reconstruction gradient of an empty batch");
  ForwardTape enc_tape;
  ForwardTape dec_tape;
  const Matrix z = model.encoder.forward(batch, enc_tape, 0.0, nullptr);
  const Matrix recon = model.decoder.forward(z, dec_tape, 0.0, nullptr);
  const Matrix diff = recon - batch;
  const double n = static_cast<double>(batch.rows());
  AeGradient g;
  g.loss = diff.squaredNorm() / n;
  const Matrix grad_z = model.decoder.backward(dec_tape, (2.0 / n) * diff, g.decoder);
  model.encoder.backward(enc_tape, grad_z, g.encoder, false);
  return g;
}

AeTrainResult ae_train(const EmbeddingDataset& dataset, const AeTrainConfig& cfg, Index latent_dim) {
  dataset.require_all_splits();
  return ae_train(dataset.rows(Split::Train), dataset.rows(Split::Val), cfg, latent_dim);
}

AeTrainResult ae_train(const Matrix& train, const Matrix& val, const AeTrainConfig& cfg, Index latent_dim) {
  cfg.validate();
  if (latent_dim < 1) throw Error("latent dimension must be at least 1");
  if (train.rows() == 0 || val.rows() == 0) throw Error("autoencoder training needs non-empty train and val splits");
  if (train.cols() != val.cols()) throw Error("train and val feature dimensions differ");

  AeTrainResult result{AutoencoderModel::initialize(train.cols(), latent_dim, cfg.hidden_width,
                                                    derive_seed(cfg.seed, "ae-init")),
                       {}};
  auto& report = result.report;
  report.latent_exceeds_input = latent_dim > train.cols();

  AutoencoderModel model = result.model;
  Adam enc_opt(model.encoder, cfg.adam);
  Adam dec_opt(model.decoder, cfg.adam);
  EarlyStopping stopper(cfg.patience);
  auto shuffle_rng = make_engine(derive_seed(cfg.seed, "ae-shuffle"));

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor rows = train;
  const Index n = train.rows();
  const Index batch_size = std::min<Index>(cfg.batch_size, n);
  Matrix batch;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto order = shuffled_indices(n, shuffle_rng);
    double epoch_loss = 0.0;
    for (Index start = 0; start < n; start += batch_size) {
      const Index b = std::min(batch_size, n - start);
      batch.resize(b, train.cols());
      for (Index r = 0; r < b; ++r) batch.row(r) = rows.row(order[static_cast<std::size_t>(start + r)]);
      const AeGradient g = ae_loss_gradient(model, batch);
      if (!std::isfinite(g.loss)) {
        throw Error("autoencoder training diverged: non-finite loss at epoch " + std::to_string(epoch));
      }
      enc_opt.step(model.encoder, g.encoder);
      dec_opt.step(model.decoder, g.decoder);
      epoch_loss += g.loss * static_cast<double>(b);
    }
    if (!model.encoder.all_finite() || !model.decoder.all_finite()) {
      throw Error("autoencoder training diverged: non-finite parameters at epoch " + std::to_string(epoch));
    }
    AutoencoderModel snapshot = model;
    snapshot.encoder.round_to_storage();
    snapshot.decoder.round_to_storage();
    const double val_loss = ae_loss(snapshot, val);
    if (!std::isfinite(val_loss)) {
      throw Error("autoencoder training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(n));
    report.val_loss.push_back(val_loss);
    if (stopper.update(val_loss)) result.model = std::move(snapshot);
    if (stopper.should_stop()) {
      report.stopped_early = true;
      break;
    }
  }
  report.best_epoch = stopper.best_epoch();
  report.best_val_loss = stopper.best_loss();
  return result;
}

double ae_gradient_check(const AutoencoderModel& model, const Matrix& batch, RngSeed seed, std::size_t samples,
                         double step) {
  const AeGradient g = ae_loss_gradient(model, batch);
  AutoencoderModel probe = model;
  const std::size_t n_enc = probe.encoder.parameter_count();
  const std::size_t total = n_enc + probe.decoder.parameter_count();

  std::vector<std::size_t> picks(total);
  for (std::size_t i = 0; i < total; ++i) picks[i] = i;
  if (samples > 0 && samples < total) {
    auto rng = make_engine(seed);
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(samples);
  }

  double worst = 0.0;
  for (std::size_t p : picks) {
    double& param = p < n_enc ? probe.encoder.parameter(p) : probe.decoder.parameter(p - n_enc);
    const double analytic = p < n_enc ? flat_gradient(g.encoder, p) : flat_gradient(g.decoder, p - n_enc);
    const double saved = param;
    param = saved + step;
    const double up = ae_loss(probe, batch);
    param = saved - step;
    const double down = ae_loss(probe, batch);
    param = saved;
    worst = std::max(worst, relative_gradient_error(analytic, (up - down) / (2.0 * step)));
  }
  return worst;
}

std::string serialize_autoencoder(const AutoencoderModel& model) {
  std::string payload;
  BinaryWriter w(payload);
  w.u32(static_cast<std::uint32_t>(model.input_dim()));
  w.u32(static_cast<std::uint32_t>(model.latent_dim()));
  write_layers(w, model.encoder);
  write_layers(w, model.decoder);
  return wrap_envelope(ModelKind::Autoencoder, payload);
}

AutoencoderModel deserialize_autoencoder(std::string_view blob) {
  const std::string payload = unwrap_envelope(blob, ModelKind::Autoencoder);
  BinaryReader r(payload);
  const auto input_dim = static_cast<Index>(r.u32());
  const auto latent_dim = static_cast<Index>(r.u32());
  AutoencoderModel model{read_layers(r), read_layers(r)};
  if (!r.done()) throw Error("autoencoder blob: trailing bytes");
  if (model.encoder.layers().empty() || model.decoder.layers().empty() || model.input_dim() != input_dim ||
      model.latent_dim() != latent_dim || model.decoder.input_dim() != latent_dim ||
      model.decoder.output_dim() != input_dim) {
    throw Error("autoencoder blob: inconsistent layer dimensions");
  }
  return model;
}

void save_autoencoder(const std::filesystem::path& path, const AutoencoderModel& model) {
  write_file_atomic(path, serialize_autoencoder(model));
}

AutoencoderModel load_autoencoder(const std::filesystem::path& path) {
  return deserialize_autoencoder(read_file(path));
}

}  // namespace dimsweep
