#include "dimsweep/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "dimsweep/ingest.hpp"

namespace dimsweep {

void SynthConfig::validate() const {
  if (dim < 1 || latent < 1 || samples < 1) throw Error("synth: dim, latent and samples must be positive");
  if (latent > dim) {
    throw Error("synth: latent dimension " + std::to_string(latent) + " exceeds ambient dimension " +
                std::to_string(dim));
  }
  if (nuisance_dims < 0 || latent + nuisance_dims > dim) throw Error("synth: latent + nuisance dims exceed dim");
  if (!(sigma_y >= 0.0) || !(sigma_v >= 0.0) || !(nuisance_energy >= 0.0)) {
    throw Error("synth: noise scales must be non-negative");
  }
  if (nonlinear && latent < 2) throw Error("synth: the nonlinear target needs latent >= 2");
}

namespace {

Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  // Fill row by row so the draw order does not depend on storage layout.
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

}  // namespace

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  const Index n = cfg.samples;
  const Index d = cfg.dim;
  const Index k = cfg.latent;
  const Index m = cfg.nuisance_dims;

  auto basis_rng = make_engine(derive_seed(cfg.seed, "synth-basis"));
  const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian(d, k + m, basis_rng)).householderQ() *
                   Matrix::Identity(d, k + m);
  Vector w = gaussian(k, 1, basis_rng).col(0);
  w /= w.norm();

  auto sample_rng = make_engine(derive_seed(cfg.seed, "synth-samples"));
  SynthResult out;
  out.basis = q.leftCols(k);
  out.weights = w;
  out.latent = gaussian(n, k, sample_rng);
  Matrix features = out.latent * out.basis.transpose();
  if (m > 0 && cfg.nuisance_energy > 0.0) {
    features += std::sqrt(cfg.nuisance_energy) * gaussian(n, m, sample_rng) * q.rightCols(m).transpose();
  }
  if (cfg.sigma_v > 0.0) features += cfg.sigma_v * gaussian(n, d, sample_rng);
  if (cfg.round_to_f32) features = features.cast<float>().cast<double>();

  out.signal = out.latent * w;
  if (cfg.nonlinear) {
    for (Index i = 0; i < n; ++i) {
      if (out.latent(i, 0) * out.latent(i, 1) < 0.0) out.signal[i] = -out.signal[i];
    }
  }
  Vector targets = out.signal;
  if (cfg.sigma_y > 0.0) targets += cfg.sigma_y * gaussian(n, 1, sample_rng).col(0);

  const double mean = out.signal.mean();
  const double var = (out.signal.array() - mean).square().mean();
  out.snr = cfg.sigma_y > 0.0 ? var / (cfg.sigma_y * cfg.sigma_y) : std::numeric_limits<double>::infinity();

  EmbeddingDataset& ds = out.dataset;
  ds.features = std::move(features);
  ds.targets = std::move(targets);
  ds.splits.assign(static_cast<std::size_t>(n), Split::Train);
  ds.doc_ids.reserve(static_cast<std::size_t>(n));
  char id[32];
  for (Index i = 0; i < n; ++i) {
    std::snprintf(id, sizeof id, "syn%06lld", static_cast<long long>(i));
    ds.doc_ids.emplace_back(id);
  }
  char prov[256];
  std::snprintf(prov, sizeof prov,
                "synthgen d=%lld k=%lld n=%lld sigma_y=%g sigma_v=%g nuisance=%lldx%g nonlinear=%d seed=%llu snr=%.6g",
                static_cast<long long>(d), static_cast<long long>(k), static_cast<long long>(n), cfg.sigma_y,
                cfg.sigma_v, static_cast<long long>(m), cfg.nuisance_energy, cfg.nonlinear ? 1 : 0,
                static_cast<unsigned long long>(cfg.seed.value), out.snr);
  ds.provenance = prov;

  SplitSpec split;
  split.train_fraction = cfg.train_fraction;
  split.val_fraction = cfg.val_fraction;
  split.test_fraction = cfg.test_fraction;
  split.seed = derive_seed(cfg.seed, "synth-split");
  ds = apply_split(std::move(ds), split);
  return out;
}

}  // namespace dimsweep
