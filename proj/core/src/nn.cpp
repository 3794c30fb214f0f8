#include "dimsweep/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dimsweep {

DenseLayer DenseLayer::uniform(Index in, Index out, Activation act, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseLayer layer;
  layer.weight.resize(out, in);
  layer.bias.resize(out);
  for (Index r = 0; r < out; ++r) {
    for (Index c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
  }
  for (Index r = 0; r < out; ++r) layer.bias[r] = dist(rng);
  layer.activation = act;
  return layer;
}

DenseLayer DenseLayer::zeros(Index in, Index out, Activation act) {
  return DenseLayer{Matrix::Zero(out, in), Vector::Zero(out), act};
}

namespace {

Matrix affine(const DenseLayer& layer, const Matrix& x) {
  Matrix z = x * layer.weight.transpose();
  z.rowwise() += layer.bias.transpose();
  if (layer.activation == Activation::Relu) z = z.cwiseMax(0.0);
  return z;
}

}  // namespace

Matrix Network::forward(const Matrix& x) const {
  Matrix a = x;
  for (const auto& layer : layers_) a = affine(layer, a);
  return a;
}

Matrix Network::forward(const Matrix& x, ForwardTape& tape, double dropout, std::mt19937_64* rng) const {
  tape.inputs.clear();
  tape.activations.clear();
  tape.masks.clear();
  Matrix a = x;
  for (const auto& layer : layers_) {
    tape.inputs.push_back(a);
    a = affine(layer, a);
    tape.activations.push_back(a);
    Matrix mask;
    if (layer.activation == Activation::Relu && dropout > 0.0 && rng != nullptr) {
      std::bernoulli_distribution keep(1.0 - dropout);
      const double scale = 1.0 / (1.0 - dropout);
      mask.resize(a.rows(), a.cols());
      for (Index c = 0; c < a.cols(); ++c) {
        for (Index r = 0; r < a.rows(); ++r) mask(r, c) = keep(*rng) ? scale : 0.0;
      }
      a = a.cwiseProduct(mask);
    }
    tape.masks.push_back(std::move(mask));
  }
  return a;
}

Matrix Network::backward(const ForwardTape& tape, const Matrix& grad_output,
                         std::vector<LayerGradient>& grads, bool input_gradient) const {
  grads.resize(layers_.size());
  Matrix grad = grad_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    if (tape.masks[l].size() != 0) grad = grad.cwiseProduct(tape.masks[l]);
    if (layer.activation == Activation::Relu) {
      grad = (tape.activations[l].array() > 0.0).select(grad, 0.0);
    }
    grads[l].weight.noalias() = grad.transpose() * tape.inputs[l];
    grads[l].bias = grad.colwise().sum().transpose();
    if (l == 0 && !input_gradient) return Matrix{};
    Matrix next = grad * layer.weight;
    grad = std::move(next);
  }
  return grad;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

double& Network::parameter(std::size_t index) {
  for (auto& layer : layers_) {
    const auto nw = static_cast<std::size_t>(layer.weight.size());
    if (index < nw) {
      const auto cols = static_cast<std::size_t>(layer.weight.cols());
      return layer.weight(static_cast<Index>(index / cols), static_cast<Index>(index % cols));
    }
    index -= nw;
    const auto nb = static_cast<std::size_t>(layer.bias.size());
    if (index < nb) return layer.bias[static_cast<Index>(index)];
    index -= nb;
  }
  throw Error("parameter index out of range");
}

double Network::parameter(std::size_t index) const { return const_cast<Network*>(this)->parameter(index); }

void Network::round_to_storage() {
  for (auto& layer : layers_) {
    layer.weight = layer.weight.cast<float>().cast<double>();
    layer.bias = layer.bias.cast<float>().cast<double>();
  }
}

bool Network::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

double flat_gradient(const std::vector<LayerGradient>& grads, std::size_t index) {
  for (const auto& g : grads) {
    const auto nw = static_cast<std::size_t>(g.weight.size());
    if (index < nw) {
      const auto cols = static_cast<std::size_t>(g.weight.cols());
      return g.weight(static_cast<Index>(index / cols), static_cast<Index>(index % cols));
    }
    index -= nw;
    const auto nb = static_cast<std::size_t>(g.bias.size());
    if (index < nb) return g.bias[static_cast<Index>(index)];
    index -= nb;
  }
  throw Error("gradient index out of range");
}

double relative_gradient_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

Adam::Adam(const Network& net, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& layer : net.layers()) {
    m_.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())});
  }
  v_ = m_;
}

void Adam::step(Network& net, const std::vector<LayerGradient>& grads) {
  ++step_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = cfg_.learning_rate;
  const double eps = cfg_.epsilon;
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, grads[l].weight, m_[l].weight, v_[l].weight);
    update(layers[l].bias, grads[l].bias, m_[l].bias, v_[l].bias);
  }
}

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_loss_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw Error("early-stopping patience must be at least 1");
}

bool EarlyStopping::update(double val_loss) {
  ++epochs_;
  if (val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epochs_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

}  // namespace dimsweep
