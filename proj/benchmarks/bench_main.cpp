#include <random>

#include <benchmark/benchmark.h>

#include "dimsweep/analysis.hpp"
#include "dimsweep/autoencoder.hpp"
#include "dimsweep/forest.hpp"

using namespace dimsweep;

namespace {

Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

void BM_ForestFit(benchmark::State& state) {
  const Index n = state.range(0);
  const Index d = state.range(1);
  const Matrix x = gaussian(n, d, 1);
  const Vector y = gaussian(n, 1, 2).col(0);
  ForestConfig cfg;
  cfg.n_trees = 10;
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(forest_fit(x, y, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.n_trees);
}
BENCHMARK(BM_ForestFit)->Args({1000, 8})->Args({1000, 64})->Args({4000, 32})->Unit(benchmark::kMillisecond);

void BM_ForestPredict(benchmark::State& state) {
  const Matrix x = gaussian(4000, 32, 3);
  const Vector y = gaussian(4000, 1, 4).col(0);
  ForestConfig cfg;
  cfg.n_trees = 20;
  const auto model = forest_fit(x, y, cfg);
  const Matrix probe = gaussian(500, 32, 5);
  for (auto _ : state) benchmark::DoNotOptimize(forest_predict(model, probe));
}
BENCHMARK(BM_ForestPredict)->Unit(benchmark::kMicrosecond);

// Two epochs over 4000 rows of 768-dim embeddings.
void BM_AutoencoderEpochs(benchmark::State& state) {
  const Matrix train = gaussian(4000, 768, 6);
  const Matrix val = gaussian(450, 768, 7);
  AeTrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.patience = 1;
  for (auto _ : state) benchmark::DoNotOptimize(ae_train(train, val, cfg, state.range(0)));
}
BENCHMARK(BM_AutoencoderEpochs)->Arg(8)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_AutoencoderGradient(benchmark::State& state) {
  const auto model = AutoencoderModel::initialize(768, state.range(0), 0, RngSeed{8});
  const Matrix batch = gaussian(256, 768, 9);
  for (auto _ : state) benchmark::DoNotOptimize(ae_loss_gradient(model, batch));
}
BENCHMARK(BM_AutoencoderGradient)->Arg(8)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_HuberErrors(benchmark::State& state) {
  const Vector y = gaussian(state.range(0), 1, 10).col(0);
  const Vector pred = gaussian(state.range(0), 1, 11).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(error_distribution(y, pred));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_HuberErrors)->Arg(500)->Arg(50000);

void BM_PairedTTest(benchmark::State& state) {
  const Vector y = gaussian(state.range(0), 1, 12).col(0);
  const auto a = error_distribution(y, gaussian(state.range(0), 1, 13).col(0));
  const auto b = error_distribution(y, gaussian(state.range(0), 1, 14).col(0));
  for (auto _ : state) benchmark::DoNotOptimize(t_test(a, b));
}
BENCHMARK(BM_PairedTTest)->Arg(500)->Arg(50000);

}  // namespace

BENCHMARK_MAIN();
