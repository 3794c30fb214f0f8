#pragma once

// Small random models and batches for gradient checks.

#include <random>

#include "dimsweep/autoencoder.hpp"
#include "dimsweep/mlp.hpp"

namespace testing_support {

struct AeInstance {
  dimsweep::AutoencoderModel model;
  dimsweep::Matrix batch;
};

struct MlpInstance {
  dimsweep::MlpModel model;
  dimsweep::Matrix x;
  dimsweep::Vector y;
};

inline dimsweep::Matrix gaussian(dimsweep::Index rows, dimsweep::Index cols, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  dimsweep::Matrix m(rows, cols);
  for (dimsweep::Index i = 0; i < rows; ++i) {
    for (dimsweep::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

/// d <= 16, N <= 8, latent in [1, d]; every third instance has a ReLU hidden layer.
inline AeInstance random_ae_instance(int index, std::uint64_t root = 2024) {
  std::mt19937_64 rng(root + static_cast<std::uint64_t>(index) * 7919);
  std::uniform_int_distribution<int> dim(2, 16);
  std::uniform_int_distribution<int> rows(1, 8);
  const int d = dim(rng);
  const int dz = std::uniform_int_distribution<int>(1, d)(rng);
  const int hidden = index % 3 == 2 ? std::uniform_int_distribution<int>(2, 6)(rng) : 0;
  AeInstance inst{dimsweep::AutoencoderModel::initialize(d, dz, hidden, dimsweep::RngSeed{rng()}),
                  gaussian(rows(rng), d, 1.0, rng)};
  return inst;
}

inline MlpInstance random_mlp_instance(int index, std::uint64_t root = 4048) {
  std::mt19937_64 rng(root + static_cast<std::uint64_t>(index) * 104729);
  const int d = std::uniform_int_distribution<int>(1, 16)(rng);
  const int n = std::uniform_int_distribution<int>(2, 8)(rng);
  dimsweep::MlpConfig cfg;
  cfg.hidden_dim = std::uniform_int_distribution<int>(2, 12)(rng);
  cfg.dropout = 0.0;
  cfg.seed = dimsweep::RngSeed{rng()};
  MlpInstance inst{dimsweep::MlpModel::initialize(d, cfg), gaussian(n, d, 1.0, rng), {}};
  inst.y = gaussian(n, 1, 1.5, rng).col(0);
  return inst;
}

}  // namespace testing_support
