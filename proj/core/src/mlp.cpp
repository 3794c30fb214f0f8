#include "dimsweep/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "dimsweep/analysis.hpp"
#include "dimsweep/binary_io.hpp"

namespace dimsweep {

void MlpConfig::validate() const {
  if (hidden_dim < 1) throw Error("MLP hidden dimension must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("MLP dropout must lie in [0, 1)");
  if (!(huber_delta > 0.0)) throw Error("Huber delta must be positive");
  if (max_epochs < 1) throw Error("MLP max_epochs must be positive");
  if (patience < 1) throw Error("MLP patience must be at least 1");
  if (batch_size < 1) throw Error("MLP batch size must be positive");
  if (!(adam.learning_rate > 0.0)) throw Error("MLP learning rate must be positive");
}

MlpModel MlpModel::initialize(Index input_dim, const MlpConfig& cfg) {
  auto rng = make_engine(derive_seed(cfg.seed, "mlp-init"));
  std::vector<DenseLayer> layers;
  layers.push_back(DenseLayer::uniform(input_dim, cfg.hidden_dim, Activation::Relu, rng));
  layers.push_back(DenseLayer::uniform(cfg.hidden_dim, cfg.hidden_dim, Activation::Relu, rng));
  layers.push_back(cfg.zero_init_output ? DenseLayer::zeros(cfg.hidden_dim, 1, Activation::Identity)
                                        : DenseLayer::uniform(cfg.hidden_dim, 1, Activation::Identity, rng));
  return {Network(std::move(layers)), cfg.dropout};
}

Vector mlp_predict(const MlpModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim()) {
    throw Error("mlp_predict: input has dimension " + std::to_string(x.cols()) + ", model expects " +
                std::to_string(model.input_dim()));
  }
  return model.net.forward(x).col(0);
}

double mlp_loss(const MlpModel& model, const Matrix& x, const Vector& y, double delta) {
  const Vector pred = mlp_predict(model, x);
  double total = 0.0;
  for (Index i = 0; i < y.size(); ++i) total += huber(y[i], pred[i], delta);
  return total / static_cast<double>(y.size());
}

namespace {

MlpGradient loss_gradient(const MlpModel& model, const Matrix& x, const Vector& y, double delta, double dropout,
                          std::mt19937_64* rng) {
  ForwardTape tape;
  const Matrix out = model.net.forward(x, tape, dropout, rng);
  const double n = static_cast<double>(x.rows());
  MlpGradient g;
  Matrix grad_out(x.rows(), 1);
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    total += huber(y[i], out(i, 0), delta);
    // d huber / d prediction = -psi(y - prediction)
    grad_out(i, 0) = -huber_derivative(y[i] - out(i, 0), delta) / n;
  }
  g.loss = total / n;
  model.net.backward(tape, grad_out, g.layers, false);
  return g;
}

}  // namespace

MlpGradient mlp_loss_gradient(const MlpModel& model, const Matrix& x, const Vector& y, double delta) {
  if (x.rows() == 0 || x.rows() != y.size()) throw Error("mlp gradient: bad batch shape");
  return loss_gradient(model, x, y, delta, 0.0, nullptr);
}

MlpTrainResult mlp_fit(const Matrix& x_train, const Vector& y_train, const Matrix& x_val, const Vector& y_val,
                       const MlpConfig& cfg) {
  cfg.validate();
  if (x_train.rows() == 0 || x_val.rows() == 0) throw Error("mlp_fit needs non-empty train and val splits");
  if (x_train.rows() != y_train.size() || x_val.rows() != y_val.size()) {
    throw Error("mlp_fit: feature and target lengths differ");
  }
  if (x_train.cols() != x_val.cols()) throw Error("mlp_fit: train and val feature dimensions differ");

  MlpTrainResult result{MlpModel::initialize(x_train.cols(), cfg), {}};
  result.model.net.round_to_storage();
  auto& report = result.report;
  MlpModel model = result.model;
  report.initial_train_loss = mlp_loss(model, x_train, y_train, cfg.huber_delta);
  report.initial_val_loss = mlp_loss(model, x_val, y_val, cfg.huber_delta);

  Adam opt(model.net, cfg.adam);
  EarlyStopping stopper(cfg.patience);
  auto shuffle_rng = make_engine(derive_seed(cfg.seed, "mlp-shuffle"));
  auto dropout_rng = make_engine(derive_seed(cfg.seed, "mlp-dropout"));
  const Index n = x_train.rows();
  const Index batch_size = std::min<Index>(cfg.batch_size, n);
  Matrix xb;
  Vector yb;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto order = shuffled_indices(n, shuffle_rng);
    for (Index start = 0; start < n; start += batch_size) {
      const Index b = std::min(batch_size, n - start);
      xb.resize(b, x_train.cols());
      yb.resize(b);
      for (Index r = 0; r < b; ++r) {
        const Index src = order[static_cast<std::size_t>(start + r)];
        xb.row(r) = x_train.row(src);
        yb[r] = y_train[src];
      }
      const MlpGradient g = loss_gradient(model, xb, yb, cfg.huber_delta, cfg.dropout, &dropout_rng);
      if (!std::isfinite(g.loss)) {
        throw Error("MLP training diverged: non-finite loss at epoch " + std::to_string(epoch));
      }
      opt.step(model.net, g.layers);
    }
    if (!model.net.all_finite()) {
      throw Error("MLP training diverged: non-finite parameters at epoch " + std::to_string(epoch));
    }
    MlpModel snapshot = model;
    snapshot.net.round_to_storage();
    const double train_loss = mlp_loss(snapshot, x_train, y_train, cfg.huber_delta);
    const double val_loss = mlp_loss(snapshot, x_val, y_val, cfg.huber_delta);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw Error("MLP training diverged: non-finite evaluation loss at epoch " + std::to_string(epoch));
    }
    report.train_loss.push_back(train_loss);
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

double mlp_gradient_check(const MlpModel& model, const Matrix& x, const Vector& y, double delta, RngSeed seed,
                          std::size_t samples, double step) {
  const MlpGradient g = mlp_loss_gradient(model, x, y, delta);
  MlpModel probe = model;
  const std::size_t total = probe.net.parameter_count();
  std::vector<std::size_t> picks(total);
  for (std::size_t i = 0; i < total; ++i) picks[i] = i;
  if (samples > 0 && samples < total) {
    auto rng = make_engine(seed);
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(samples);
  }
  double worst = 0.0;
  for (std::size_t p : picks) {
    double& param = probe.net.parameter(p);
    const double saved = param;
    param = saved + step;
    const double up = mlp_loss(probe, x, y, delta);
    param = saved - step;
    const double down = mlp_loss(probe, x, y, delta);
    param = saved;
    worst = std::max(worst, relative_gradient_error(flat_gradient(g.layers, p), (up - down) / (2.0 * step)));
  }
  return worst;
}

std::string serialize_mlp(const MlpModel& model) {
  std::string payload;
  BinaryWriter w(payload);
  w.f64(model.dropout);
  write_layers(w, model.net);
  return wrap_envelope(ModelKind::Mlp, payload);
}

MlpModel deserialize_mlp(std::string_view blob) {
  const std::string payload = unwrap_envelope(blob, ModelKind::Mlp);
  BinaryReader r(payload);
  MlpModel model;
  model.dropout = r.f64();
  model.net = read_layers(r);
  if (!r.done()) throw Error("mlp blob: trailing bytes");
  if (model.net.layers().size() != 3 || model.net.output_dim() != 1) throw Error("mlp blob: unexpected layer layout");
  return model;
}

void save_mlp(const std::filesystem::path& path, const MlpModel& model) { write_file_atomic(path, serialize_mlp(model)); }

MlpModel load_mlp(const std::filesystem::path& path) { return deserialize_mlp(read_file(path)); }

}  // namespace dimsweep
