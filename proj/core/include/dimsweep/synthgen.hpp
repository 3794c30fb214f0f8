#pragma once

// Synthetic embedding/target datasets with a known latent rank and a tunable
// signal-to-noise ratio:
//   v = A u + sqrt(nuisance_energy) B n + sigma_v e,   y = w.u + sigma_y eta
// with A (d x k) and B (d x m) sharing one orthonormal basis, u ~ N(0, I_k),
// n ~ N(0, I_m), e ~ N(0, I_d), eta ~ N(0, 1) and |w| = 1.

#include <string>

#include "dimsweep/core.hpp"

namespace dimsweep {

struct SynthConfig {
  Index dim = 768;
  Index latent = 8;
  Index samples = 5000;
  double sigma_y = 1.0;
  double sigma_v = 0.0;
  Index nuisance_dims = 0;
  double nuisance_energy = 0.0;  // variance per nuisance direction
  bool nonlinear = false;        // y = (w.u) sign(u0 u1) + noise
  bool round_to_f32 = true;      // store features at EMB1 precision
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  RngSeed seed{};

  void validate() const;
};

struct SynthResult {
  EmbeddingDataset dataset;  // raw (unstandardized) targets, tagged splits
  Matrix latent;             // N x k
  Vector weights;            // w
  Matrix basis;              // A, d x k
  Vector signal;             // noiseless target per row
  double snr = 0.0;          // var(signal) / sigma_y^2, infinite when sigma_y = 0
};

/// With round_to_f32 the dataset survives an EMB1 round trip unchanged.
SynthResult generate(const SynthConfig& cfg);

}  // namespace dimsweep
