#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "dimsweep/binary_io.hpp"
#include "dimsweep/report.hpp"
#include "dimsweep/sweep.hpp"
#include "dimsweep/synthgen.hpp"
#include "support/scratch.hpp"

using namespace dimsweep;
using testing_support::ScratchDir;

namespace {

EmbeddingDataset small_dataset(double sigma_y = 0.5, double sigma_v = 0.05, std::uint64_t seed = 3) {
  SynthConfig s;
  s.dim = 16;
  s.latent = 2;
  s.samples = 300;
  s.sigma_y = sigma_y;
  s.sigma_v = sigma_v;
  s.seed = RngSeed{seed};
  return generate(s).dataset;
}

SweepConfig quick_config() {
  SweepConfig cfg;
  cfg.ladder = parse_ladder("1,2,4,raw");
  cfg.autoencoder.max_epochs = 30;
  cfg.autoencoder.batch_size = 32;
  cfg.autoencoder.adam.learning_rate = 1e-2;
  cfg.forest.n_trees = 10;
  cfg.seed = RngSeed{5};
  return cfg;
}

std::vector<CacheStatus> statuses(const SweepReport& r) {
  std::vector<CacheStatus> out;
  for (const auto& e : r.run_info.entries) out.push_back(e.cache);
  return out;
}

std::vector<std::filesystem::path> cache_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_SUITE("sweep") {
  TEST_CASE("ladders") {
    const auto def = default_ladder();
    REQUIRE(def.size() == 11);
    CHECK(def.front() == Dimension{1, false});
    CHECK(def[9] == Dimension{512, false});
    CHECK(def.back().raw);

    const auto l = parse_ladder("1, 8,32,raw");
    REQUIRE(l.size() == 4);
    CHECK(l[1].value == 8);
    CHECK(l[3].raw);
    CHECK(parse_ladder("raw").size() == 1);
    CHECK_THROWS_AS(parse_ladder("8,4"), Error);
    CHECK_THROWS_AS(parse_ladder("4,4"), Error);
    CHECK_THROWS_AS(parse_ladder("raw,4"), Error);
    CHECK_THROWS_AS(parse_ladder("0,4"), Error);
    CHECK_THROWS_AS(parse_ladder("4,,8"), Error);
    CHECK_THROWS_AS(parse_ladder("four"), Error);
    CHECK(parse_regressor("rf") == RegressorKind::Forest);
    CHECK(parse_regressor("mlp") == RegressorKind::Mlp);
  }

  TEST_CASE("report is internally consistent") {
    const auto ds = small_dataset();
    const auto report = run_sweep(ds, quick_config());
    REQUIRE(report.entries.size() == 4);
    CHECK(report.entries.back().dim == Dimension{16, true});
    CHECK(report.n_test == 30);
    for (std::size_t i = 0; i + 1 < report.entries.size(); ++i) CHECK(report.entries[i].dim < report.entries[i + 1].dim);

    const auto& best = report.entry(report.best);
    for (const auto& e : report.entries) {
      CHECK(best.mean_huber <= e.mean_huber);
      CHECK(e.errors.errors.size() == report.n_test);
      CHECK(e.normalized >= 0.0);
      CHECK(e.normalized <= 1.0);
      CHECK(e.vs_best.p_value >= 0.0);
      CHECK(e.reconstruction_cosine.has_value() == !e.dim.raw);
      CHECK(e.autoencoder.has_value() == !e.dim.raw);
    }
    CHECK(best.vs_best.p_value == 1.0);
    CHECK(best.normalized == 0.0);
    CHECK(report.p_matrix.size() == 4);
    CHECK(report.p_matrix[1][2] == report.p_matrix[2][1]);
    CHECK(report.curve.points.size() == 4);
    CHECK(intrinsic_dimension(report.curve, report.intrinsic_threshold) == report.intrinsic);
  }

  TEST_CASE("targets are standardized with train statistics") {
    auto ds = small_dataset();
    for (Index i = 0; i < ds.size(); ++i) ds.targets[i] = 40.0 + 9.0 * ds.targets[i];
    const auto report = run_sweep(ds, quick_config());
    const Vector train = ds.targets_of(Split::Train);
    CHECK(report.target_mean == doctest::Approx(train.mean()).epsilon(1e-12));
    const double pop = std::sqrt((train.array() - train.mean()).square().mean());
    CHECK(report.target_std == doctest::Approx(pop).epsilon(1e-12));

    const auto plain = run_sweep(small_dataset(), quick_config());
    for (std::size_t i = 0; i < plain.entries.size(); ++i) {
      CHECK(report.entries[i].mean_huber == doctest::Approx(plain.entries[i].mean_huber).epsilon(1e-9));
    }
  }

  TEST_CASE("cold runs are byte-identical") {
    const auto ds = small_dataset();
    auto cfg = quick_config();
    const std::string a = report_json(run_sweep(ds, cfg));
    cfg.workers = 3;
    const std::string b = report_json(run_sweep(ds, cfg));
    CHECK(a == b);
    cfg.seed = RngSeed{6};
    CHECK(report_json(run_sweep(ds, cfg)) != a);
  }

  TEST_CASE("adding a ladder entry leaves the others unchanged") {
    const auto ds = small_dataset();
    auto cfg = quick_config();
    const auto base = run_sweep(ds, cfg);
    cfg.ladder = parse_ladder("1,2,3,4,raw");
    const auto more = run_sweep(ds, cfg);
    for (const auto& e : base.entries) CHECK(more.entry(e.dim).errors.errors == e.errors.errors);
  }

  TEST_CASE("warm cache reproduces the cold report") {
    ScratchDir cache("cache");
    const auto ds = small_dataset();
    auto cfg = quick_config();
    cfg.cache_dir = cache.path();
    const auto cold = run_sweep(ds, cfg);
    CHECK(statuses(cold) ==
          std::vector<CacheStatus>{CacheStatus::Miss, CacheStatus::Miss, CacheStatus::Miss, CacheStatus::Unused});
    const auto warm = run_sweep(ds, cfg);
    CHECK(statuses(warm) ==
          std::vector<CacheStatus>{CacheStatus::Hit, CacheStatus::Hit, CacheStatus::Hit, CacheStatus::Unused});
    CHECK(report_json(cold) == report_json(warm));

    auto uncached = quick_config();
    CHECK(report_json(run_sweep(ds, uncached)) == report_json(cold));

    const auto files = cache_files(cache.path());
    REQUIRE(files.size() == 3);
    std::filesystem::remove(files[1]);
    const auto partial = run_sweep(ds, cfg);
    int misses = 0;
    for (auto s : statuses(partial)) misses += s == CacheStatus::Miss ? 1 : 0;
    CHECK(misses == 1);
    CHECK(report_json(partial) == report_json(cold));
  }

  TEST_CASE("corrupt cache entries are retrained") {
    ScratchDir cache("corrupt");
    const auto ds = small_dataset();
    auto cfg = quick_config();
    cfg.ladder = parse_ladder("2,raw");
    cfg.cache_dir = cache.path();
    const auto cold = run_sweep(ds, cfg);
    const auto files = cache_files(cache.path());
    REQUIRE(files.size() == 1);
    std::string blob = read_file(files[0]);
    blob[blob.size() / 2] ^= 0x5a;
    write_file_atomic(files[0], blob);
    const auto healed = run_sweep(ds, cfg);
    CHECK(healed.run_info.entries[0].cache == CacheStatus::Corrupt);
    CHECK(report_json(healed) == report_json(cold));
    CHECK(run_sweep(ds, cfg).run_info.entries[0].cache == CacheStatus::Hit);
  }

  TEST_CASE("cache keys depend on data, config and width") {
    const auto ds = small_dataset();
    const std::string digest = dataset_digest(ds);
    AeTrainConfig cfg;
    const auto key = autoencoder_cache_key(digest, cfg, 8);
    CHECK(key == autoencoder_cache_key(digest, cfg, 8));
    CHECK(key != autoencoder_cache_key(digest, cfg, 4));
    auto other = cfg;
    other.batch_size = 64;
    CHECK(key != autoencoder_cache_key(digest, other, 8));
    other = cfg;
    other.seed = RngSeed{1};
    CHECK(key != autoencoder_cache_key(digest, other, 8));
    auto moved = ds;
    moved.features(0, 0) += 1e-3;
    CHECK(dataset_digest(moved) != digest);
    auto resplit = ds;
    std::swap(resplit.splits[static_cast<std::size_t>(resplit.indices(Split::Train).front())],
              resplit.splits[static_cast<std::size_t>(resplit.indices(Split::Test).front())]);
    CHECK(dataset_digest(resplit) != digest);
  }

  TEST_CASE("full-width compression tracks the raw entry on noiseless data") {
    SynthConfig s;
    s.dim = 16;
    s.latent = 4;
    s.samples = 2000;
    s.sigma_y = 0.0;
    s.seed = RngSeed{8};
    const auto ds = generate(s).dataset;
    SweepConfig cfg;
    cfg.ladder = parse_ladder("16,raw");
    cfg.autoencoder.max_epochs = 200;
    cfg.autoencoder.patience = 10;
    cfg.autoencoder.batch_size = 32;
    cfg.forest.n_trees = 30;
    cfg.seed = RngSeed{1};
    const auto report = run_sweep(ds, cfg);
    const double full = report.entries[0].mean_huber;
    const double raw = report.entries[1].mean_huber;
    CHECK(std::abs(full - raw) < 0.02);
  }

  TEST_CASE("reconstruction similarity rises with width") {
    SynthConfig s;
    s.dim = 24;
    s.latent = 4;
    s.samples = 800;
    s.sigma_v = 0.05;
    s.seed = RngSeed{12};
    const auto ds = generate(s).dataset;
    auto cfg = quick_config();
    cfg.ladder = parse_ladder("1,2,4,8,16,24");
    cfg.autoencoder.max_epochs = 150;
    cfg.autoencoder.patience = 10;
    const auto report = run_sweep(ds, cfg);
    for (std::size_t i = 0; i + 1 < report.entries.size(); ++i) {
      CHECK(*report.entries[i + 1].reconstruction_cosine >= *report.entries[i].reconstruction_cosine - 0.02);
    }
  }

  TEST_CASE("informative and uninformative baselines") {
    auto ds = small_dataset();
    const Index n = ds.size();
    Matrix onehot = Matrix::Zero(n, 3);
    for (Index i = 0; i < n; ++i) {
      const int cls = static_cast<int>(i % 3);
      onehot(i, cls) = 1.0;
      ds.targets[i] = cls;
    }
    auto cfg = quick_config();
    cfg.ladder = parse_ladder("2,raw");
    const auto informative = run_baseline(ds, {"onehot", onehot}, cfg);
    CHECK(informative.dimension == 3);
    CHECK(informative.mean_huber < 1e-12);

    const auto noisy = small_dataset(1.0, 0.05, 9);
    const Matrix uniform = Matrix::Constant(noisy.size(), 4, 0.25);
    const auto flat = run_baseline(noisy, {"uniform", uniform}, cfg);
    const Vector train = noisy.targets_of(Split::Train);
    const double mu = train.mean();
    const double sd = std::sqrt((train.array() - mu).square().mean());
    const Vector test = (noisy.targets_of(Split::Test).array() - mu) / sd;
    const double constant = error_distribution(test, Vector::Zero(test.size())).mean();
    CHECK(std::abs(flat.mean_huber - constant) <= 0.05 * constant);

    cfg.baselines = {{"uniform", uniform}};
    const auto report = run_sweep(noisy, cfg);
    REQUIRE(report.baselines.size() == 1);
    CHECK(report.baselines[0].label == "uniform");
    CHECK(report.baselines[0].mean_huber == flat.mean_huber);
  }

  TEST_CASE("simplex violations name the rows") {
    Matrix rows = Matrix::Constant(6, 3, 1.0 / 3.0);
    rows.row(4) << 0.5, 0.2, 0.1;
    CHECK_THROWS_WITH_AS(validate_probability_rows(rows), "probability rows failing the simplex check (1): 4", Error);
    rows.row(1) << 1.2, -0.1, -0.1;
    CHECK_THROWS_WITH_AS(validate_probability_rows(rows), doctest::Contains("1, 4"), Error);
    rows.row(1) << 0.2, 0.3, 0.50005;
    CHECK_THROWS_WITH_AS(validate_probability_rows(rows), doctest::Contains("(1): 4"), Error);

    const auto ds = small_dataset();
    Matrix probs = Matrix::Constant(ds.size(), 3, 1.0 / 3.0);
    probs.row(7) << 0.4, 0.2, 0.2;
    CHECK_THROWS_WITH_AS(run_baseline(ds, {"sentiment", probs}, quick_config()),
                         doctest::Contains("[baseline=sentiment stage=validate]"), Error);
  }

  TEST_CASE("stage failures name the dimension and stage") {
    const auto ds = small_dataset();
    auto cfg = quick_config();
    cfg.ladder = parse_ladder("2,raw");
    cfg.autoencoder.adam.learning_rate = 1e300;
    CHECK_THROWS_WITH_AS(run_sweep(ds, cfg), doctest::Contains("[dz=2 stage=autoencoder]"), Error);

    auto no_test = ds;
    for (auto& s : no_test.splits) {
      if (s == Split::Test) s = Split::Train;
    }
    CHECK_THROWS_WITH_AS(run_sweep(no_test, quick_config()), doctest::Contains("stage=dataset"), Error);

    auto mlp = quick_config();
    mlp.ladder = parse_ladder("raw");
    mlp.regressor = RegressorKind::Mlp;
    mlp.mlp.adam.learning_rate = 1e300;
    CHECK_THROWS_WITH_AS(run_sweep(ds, mlp), doctest::Contains("[dz=raw stage=regressor]"), Error);
  }

  TEST_CASE("mlp regressor runs through the sweep") {
    auto cfg = quick_config();
    cfg.regressor = RegressorKind::Mlp;
    cfg.mlp.max_epochs = 10;
    const auto report = run_sweep(small_dataset(), cfg);
    CHECK(report.regressor == RegressorKind::Mlp);
    for (const auto& e : report.entries) CHECK(std::isfinite(e.mean_huber));
  }
}
