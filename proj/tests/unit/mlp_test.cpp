#include <cmath>

#include "doctest.h"
#include "dimsweep/analysis.hpp"
#include "dimsweep/mlp.hpp"
#include "support/instances.hpp"
#include "support/scratch.hpp"

using namespace dimsweep;
using testing_support::gaussian;

namespace {

MlpConfig quiet_config() {
  MlpConfig cfg;
  cfg.dropout = 0.0;
  cfg.seed = RngSeed{3};
  return cfg;
}

}  // namespace

TEST_SUITE("mlp") {
  TEST_CASE("layer shapes") {
    MlpConfig cfg;
    cfg.hidden_dim = 7;
    const auto m = MlpModel::initialize(5, cfg);
    REQUIRE(m.net.layers().size() == 3);
    CHECK(m.net.layers()[0].weight.rows() == 7);
    CHECK(m.net.layers()[0].weight.cols() == 5);
    CHECK(m.net.layers()[1].weight.rows() == 7);
    CHECK(m.net.output_dim() == 1);
    CHECK(m.net.layers()[0].activation == Activation::Relu);
    CHECK(m.net.layers()[2].activation == Activation::Identity);
  }

  TEST_CASE("all-zero parameters predict zero") {
    auto m = MlpModel::initialize(3, quiet_config());
    for (auto& layer : m.net.layers()) {
      layer.weight.setZero();
      layer.bias.setZero();
    }
    std::mt19937_64 rng(1);
    CHECK(mlp_predict(m, gaussian(6, 3, 1.0, rng)) == Vector::Zero(6));
  }

  TEST_CASE("hand-computed forward pass") {
    MlpConfig cfg = quiet_config();
    cfg.hidden_dim = 1;
    auto m = MlpModel::initialize(1, cfg);
    auto& l = m.net.layers();
    l[0].weight(0, 0) = 1.0;
    l[0].bias(0) = 0.0;
    l[1].weight(0, 0) = 1.0;
    l[1].bias(0) = -0.5;
    l[2].weight(0, 0) = 2.0;
    l[2].bias(0) = 0.25;
    Matrix x(3, 1);
    x << 2.0, -1.0, 0.3;
    const Vector y = mlp_predict(m, x);
    CHECK(y[0] == 3.25);
    CHECK(y[1] == 0.25);
    CHECK(y[2] == 0.25);
  }

  TEST_CASE("inference ignores dropout") {
    MlpConfig cfg;
    cfg.dropout = 0.5;
    const auto m = MlpModel::initialize(4, cfg);
    std::mt19937_64 rng(2);
    const Matrix x = gaussian(10, 4, 1.0, rng);
    CHECK(mlp_predict(m, x) == mlp_predict(m, x));
    CHECK_THROWS_AS(mlp_predict(m, gaussian(2, 5, 1.0, rng)), Error);
  }

  TEST_CASE("analytic gradients match finite differences") {
    for (int i = 0; i < 20; ++i) {
      const auto inst = testing_support::random_mlp_instance(i);
      CAPTURE(i);
      CHECK(mlp_gradient_check(inst.model, inst.x, inst.y, 1.0, RngSeed{static_cast<std::uint64_t>(i)}) < 1e-4);
    }
  }

  TEST_CASE("zero output layer starts at the Huber loss of predicting zero") {
    std::mt19937_64 rng(4);
    const Matrix x = gaussian(200, 3, 1.0, rng);
    Vector w(3);
    w << 0.8, -1.2, 0.5;
    const Vector y = x * w;
    const Matrix xv = gaussian(50, 3, 1.0, rng);
    const Vector yv = xv * w;
    MlpConfig cfg = quiet_config();
    cfg.zero_init_output = true;
    cfg.max_epochs = 10;
    cfg.batch_size = 32;
    const auto result = mlp_fit(x, y, xv, yv, cfg);
    const auto zero = error_distribution(y, Vector::Zero(y.size()), 1.0);
    CHECK(result.report.initial_train_loss == doctest::Approx(zero.mean()).epsilon(1e-12));
    CHECK(*std::min_element(result.report.train_loss.begin(), result.report.train_loss.end()) <
          result.report.initial_train_loss);

    const auto flat = mlp_fit(x, Vector::Zero(200), xv, Vector::Zero(50), cfg);
    CHECK(flat.report.initial_train_loss == 0.0);
  }

  TEST_CASE("early stopping restores the best epoch") {
    std::mt19937_64 rng(5);
    const Matrix x = gaussian(64, 4, 1.0, rng);
    const Vector y = gaussian(64, 1, 1.0, rng).col(0);
    const Matrix xv = gaussian(32, 4, 1.0, rng);
    const Vector yv = gaussian(32, 1, 1.0, rng).col(0);
    MlpConfig cfg = quiet_config();
    cfg.hidden_dim = 32;
    cfg.batch_size = 8;
    cfg.adam.learning_rate = 1e-2;
    const auto result = mlp_fit(x, y, xv, yv, cfg);
    const auto& rep = result.report;
    REQUIRE(rep.stopped_early);
    CHECK(static_cast<int>(rep.val_loss.size()) == rep.best_epoch + cfg.patience);
    CHECK(rep.best_val_loss == *std::min_element(rep.val_loss.begin(), rep.val_loss.end()));
    CHECK(mlp_loss(result.model, xv, yv, 1.0) == rep.best_val_loss);
  }

  TEST_CASE("training is deterministic") {
    std::mt19937_64 rng(6);
    const Matrix x = gaussian(50, 3, 1.0, rng);
    const Vector y = gaussian(50, 1, 1.0, rng).col(0);
    MlpConfig cfg;
    cfg.max_epochs = 5;
    cfg.seed = RngSeed{9};
    const auto a = mlp_fit(x, y, x, y, cfg);
    const auto b = mlp_fit(x, y, x, y, cfg);
    CHECK(serialize_mlp(a.model) == serialize_mlp(b.model));
    CHECK(a.report.val_loss == b.report.val_loss);
  }

  TEST_CASE("config validation") {
    MlpConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.dropout = 1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = MlpConfig{};
    cfg.hidden_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = MlpConfig{};
    cfg.huber_delta = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
  }

  TEST_CASE("serialization round trip") {
    testing_support::ScratchDir dir("mlp");
    MlpConfig cfg;
    cfg.hidden_dim = 6;
    auto m = MlpModel::initialize(4, cfg);
    m.net.round_to_storage();
    save_mlp(dir / "m.bin", m);
    const auto back = load_mlp(dir / "m.bin");
    std::mt19937_64 rng(7);
    const Matrix x = gaussian(5, 4, 1.0, rng);
    CHECK(mlp_predict(back, x) == mlp_predict(m, x));
    CHECK(back.dropout == m.dropout);
  }
}
