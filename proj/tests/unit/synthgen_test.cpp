#include <cmath>

#include "doctest.h"
#include "dimsweep/analysis.hpp"
#include "dimsweep/binary_io.hpp"
#include "dimsweep/ingest.hpp"
#include "dimsweep/synthgen.hpp"
#include "support/scratch.hpp"

using namespace dimsweep;

namespace {

SynthConfig small(double sigma_y, double sigma_v, Index k = 4) {
  SynthConfig cfg;
  cfg.dim = 48;
  cfg.latent = k;
  cfg.samples = 600;
  cfg.sigma_y = sigma_y;
  cfg.sigma_v = sigma_v;
  cfg.seed = RngSeed{17};
  return cfg;
}

double mean_huber(const Vector& y, const Vector& pred) { return error_distribution(y, pred).mean(); }

/// Train-mean constant predictor scored on the test split.
double constant_test_huber(const EmbeddingDataset& ds) {
  const Vector test = ds.targets_of(Split::Test);
  return mean_huber(test, Vector::Constant(test.size(), ds.targets_of(Split::Train).mean()));
}

}  // namespace

TEST_SUITE("synthgen") {
  TEST_CASE("shapes, splits and provenance") {
    const auto out = generate(small(1.0, 0.1));
    const auto& ds = out.dataset;
    CHECK(ds.size() == 600);
    CHECK(ds.dim() == 48);
    CHECK(ds.indices(Split::Train).size() == 480);
    CHECK(ds.indices(Split::Val).size() == 60);
    CHECK(ds.indices(Split::Test).size() == 60);
    CHECK(out.latent.cols() == 4);
    CHECK(out.weights.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((out.basis.transpose() * out.basis - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ds.provenance.find("snr=") != std::string::npos);
    CHECK(ds.doc_ids[12] == "syn000012");
  }

  TEST_CASE("noiseless rank-one data is predicted exactly by a linear oracle") {
    const auto out = generate(small(0.0, 0.0, 1));
    const auto& ds = out.dataset;
    const Matrix xtr = ds.rows(Split::Train);
    const Vector ytr = ds.targets_of(Split::Train);
    const Vector coef = xtr.completeOrthogonalDecomposition().solve(ytr);
    const Vector pred = ds.rows(Split::Test) * coef;
    CHECK(mean_huber(ds.targets_of(Split::Test), pred) < 1e-10);
    CHECK(std::isinf(out.snr));
  }

  TEST_CASE("huge target noise leaves the oracle near the constant predictor") {
    SynthConfig cfg = small(100.0, 0.0);
    cfg.samples = 5000;
    const auto out = generate(cfg);
    const auto& ds = out.dataset;
    const auto test = ds.indices(Split::Test);
    Vector oracle(static_cast<Index>(test.size()));
    for (std::size_t i = 0; i < test.size(); ++i) oracle[static_cast<Index>(i)] = out.signal[test[i]];
    const double oracle_loss = mean_huber(ds.targets_of(Split::Test), oracle);
    const double constant_loss = constant_test_huber(ds);
    CHECK(std::abs(oracle_loss - constant_loss) <= 0.05 * constant_loss);
    CHECK(out.snr < 1e-3);
  }

  TEST_CASE("same seed gives identical bytes") {
    testing_support::ScratchDir dir("synth");
    const auto cfg = small(0.5, 0.2);
    save_embedding_file(generate(cfg).dataset, dir / "a.emb", dir / "a.csv");
    save_embedding_file(generate(cfg).dataset, dir / "b.emb", dir / "b.csv");
    CHECK(read_file(dir / "a.emb") == read_file(dir / "b.emb"));
    CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));
    auto other = cfg;
    other.seed = RngSeed{18};
    save_embedding_file(generate(other).dataset, dir / "c.emb", dir / "c.csv");
    CHECK(read_file(dir / "a.emb") != read_file(dir / "c.emb"));
  }

  TEST_CASE("feature rank follows the latent rank") {
    SynthConfig cfg = small(1.0, 0.0, 5);
    cfg.round_to_f32 = false;
    const Vector sv = Eigen::JacobiSVD<Matrix>(generate(cfg).dataset.features).singularValues();
    for (Index i = 0; i < 5; ++i) CHECK(sv[i] > 1e-3 * sv[0]);
    CHECK(sv.tail(sv.size() - 5).maxCoeff() <= 1e-8 * sv[0]);

    // f32 storage adds rounding noise near 2^-24 relative.
    cfg.round_to_f32 = true;
    const Vector stored = Eigen::JacobiSVD<Matrix>(generate(cfg).dataset.features).singularValues();
    CHECK(stored[4] > 1e-3 * stored[0]);
    CHECK(stored.tail(stored.size() - 5).maxCoeff() <= 1e-7 * stored[0]);

    const auto noisy = generate(small(1.0, 0.05, 5));
    const Vector nsv = Eigen::JacobiSVD<Matrix>(noisy.dataset.features).singularValues();
    CHECK(nsv[4] > 10.0 * nsv[5]);
  }

  TEST_CASE("constant-predictor gap grows with target noise") {
    double previous = 0.0;
    for (double sigma_y : {0.5, 2.0, 8.0}) {
      SynthConfig cfg = small(sigma_y, 0.0);
      cfg.samples = 4000;
      const auto out = generate(cfg);
      const auto& ds = out.dataset;
      const auto test = ds.indices(Split::Test);
      Vector oracle(static_cast<Index>(test.size()));
      for (std::size_t i = 0; i < test.size(); ++i) oracle[static_cast<Index>(i)] = out.signal[test[i]];
      const double constant_loss = constant_test_huber(ds);
      CHECK(constant_loss > previous);
      previous = constant_loss;
      CHECK(mean_huber(ds.targets_of(Split::Test), oracle) <= constant_loss);
    }
  }

  TEST_CASE("nuisance directions and nonlinear targets") {
    SynthConfig cfg = small(0.0, 0.0, 3);
    cfg.nuisance_dims = 6;
    cfg.nuisance_energy = 0.25;
    const auto out = generate(cfg);
    const Vector sv = Eigen::JacobiSVD<Matrix>(out.dataset.features).singularValues();
    CHECK(sv[8] > 1e-3 * sv[0]);
    CHECK(sv[9] <= 1e-6 * sv[0]);

    cfg.nonlinear = true;
    const auto nl = generate(cfg);
    for (Index i = 0; i < 50; ++i) {
      const double linear = nl.latent.row(i).dot(nl.weights);
      const double sign = nl.latent(i, 0) * nl.latent(i, 1) < 0.0 ? -1.0 : 1.0;
      CHECK(nl.signal[i] == sign * linear);
    }
  }

  TEST_CASE("invalid configs") {
    SynthConfig cfg = small(1.0, 0.0);
    cfg.latent = 49;
    CHECK_THROWS_WITH_AS(generate(cfg), doctest::Contains("exceeds"), Error);
    cfg = small(-1.0, 0.0);
    CHECK_THROWS_AS(generate(cfg), Error);
    cfg = small(1.0, 0.0, 1);
    cfg.nonlinear = true;
    CHECK_THROWS_AS(generate(cfg), Error);
  }
}
