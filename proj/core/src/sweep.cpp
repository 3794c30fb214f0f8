#include "dimsweep/sweep.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>

#include <spdlog/spdlog.h>

#include "dimsweep/binary_io.hpp"

namespace dimsweep {

std::string_view to_string(RegressorKind kind) { return kind == RegressorKind::Forest ? "forest" : "mlp"; }

RegressorKind parse_regressor(std::string_view text) {
  if (text == "forest" || text == "rf") return RegressorKind::Forest;
  if (text == "mlp") return RegressorKind::Mlp;
  throw Error("unknown regressor '" + std::string(text) + "' (expected forest or mlp)");
}

std::string_view to_string(CacheStatus s) {
  switch (s) {
    case CacheStatus::Unused: return "unused";
    case CacheStatus::Miss: return "miss";
    case CacheStatus::Hit: return "hit";
    case CacheStatus::Corrupt: return "corrupt";
  }
  return "?";
}

std::vector<Dimension> default_ladder() {
  std::vector<Dimension> out;
  for (int d = 1; d <= 512; d *= 2) out.push_back({d, false});
  out.push_back({0, true});
  return out;
}

std::vector<Dimension> parse_ladder(std::string_view text) {
  std::vector<Dimension> out;
  bool raw = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string_view item = text.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    pos = comma + 1;
    if (item.empty()) throw Error("ladder: empty entry in '" + std::string(text) + "'");
    if (item == "raw") {
      if (raw) throw Error("ladder: 'raw' listed twice");
      raw = true;
      continue;
    }
    if (raw) throw Error("ladder: 'raw' must come last");
    int value = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || end != item.data() + item.size() || value < 1) {
      throw Error("ladder: '" + std::string(item) + "' is not a positive integer or 'raw'");
    }
    if (!out.empty() && value <= out.back().value) throw Error("ladder: widths must be strictly increasing");
    out.push_back({value, false});
  }
  if (raw) out.push_back({0, true});
  return out;
}

void validate_probability_rows(const Matrix& rows, double tolerance) {
  std::vector<Index> bad;
  for (Index i = 0; i < rows.rows(); ++i) {
    const bool negative = (rows.row(i).array() < 0.0).any();
    const bool finite = rows.row(i).allFinite();
    if (negative || !finite || std::abs(rows.row(i).sum() - 1.0) > tolerance) bad.push_back(i);
  }
  if (bad.empty()) return;
  std::string msg = "probability rows failing the simplex check (" + std::to_string(bad.size()) + "): ";
  for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 20); ++k) {
    if (k) msg += ", ";
    msg += std::to_string(bad[k]);
  }
  if (bad.size() > 20) msg += ", ...";
  throw Error(msg);
}

void SweepConfig::validate() const {
  if (ladder.empty()) throw Error("sweep: empty ladder");
  bool raw = false;
  int last = 0;
  for (const auto& d : ladder) {
    if (d.raw) {
      if (raw) throw Error("sweep: ladder lists raw twice");
      raw = true;
      continue;
    }
    if (d.value < 1) throw Error("sweep: ladder widths must be positive");
    if (d.value <= last) throw Error("sweep: ladder widths must be strictly increasing");
    last = d.value;
  }
  if (!(intrinsic_threshold >= 0.0)) throw Error("sweep: intrinsic threshold must be non-negative");
  if (!(huber_delta > 0.0)) throw Error("sweep: Huber delta must be positive");
  if (workers < 0) throw Error("sweep: worker count must be non-negative");
  autoencoder.validate();
  if (regressor == RegressorKind::Forest) {
    forest.validate();
  } else {
    mlp.validate();
  }
  for (const auto& b : baselines) {
    if (b.label.empty()) throw Error("sweep: baseline without a label");
  }
}

const EntryResult& SweepReport::entry(const Dimension& dim) const {
  for (const auto& e : entries) {
    if (e.dim == dim) return e;
  }
  throw Error("report has no entry for dimension " + dim.label());
}

std::string dataset_digest(const EmbeddingDataset& dataset) {
  std::string bytes;
  BinaryWriter w(bytes);
  w.u64(static_cast<std::uint64_t>(dataset.size()));
  w.u64(static_cast<std::uint64_t>(dataset.dim()));
  for (Index i = 0; i < dataset.size(); ++i) {
    for (Index j = 0; j < dataset.dim(); ++j) w.f64(dataset.features(i, j));
  }
  for (Split s : dataset.splits) w.u8(static_cast<std::uint8_t>(s));
  return sha256_hex(bytes);
}

std::string autoencoder_cache_key(std::string_view digest, const AeTrainConfig& cfg, Index latent_dim) {
  std::string bytes = "ae|";
  bytes += kCodeVersion;
  bytes += '|';
  bytes += digest;
  BinaryWriter w(bytes);
  w.u64(static_cast<std::uint64_t>(latent_dim));
  w.i32(cfg.max_epochs);
  w.i32(cfg.patience);
  w.i32(cfg.batch_size);
  w.f64(cfg.adam.learning_rate);
  w.f64(cfg.adam.beta1);
  w.f64(cfg.adam.beta2);
  w.f64(cfg.adam.epsilon);
  w.u64(static_cast<std::uint64_t>(cfg.hidden_width));
  w.u64(cfg.seed.value);
  return sha256_hex(bytes);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string serialize_checkpoint(const AeTrainResult& r) {
  const std::string model = serialize_autoencoder(r.model);
  std::string payload;
  BinaryWriter w(payload);
  w.u64(model.size());
  w.bytes(model);
  w.u32(static_cast<std::uint32_t>(r.report.train_loss.size()));
  for (double v : r.report.train_loss) w.f64(v);
  for (double v : r.report.val_loss) w.f64(v);
  w.i32(r.report.best_epoch);
  w.f64(r.report.best_val_loss);
  w.u8(r.report.stopped_early ? 1 : 0);
  w.u8(r.report.latent_exceeds_input ? 1 : 0);
  return wrap_envelope(ModelKind::AeCheckpoint, payload);
}

AeTrainResult deserialize_checkpoint(std::string_view blob) {
  const std::string payload = unwrap_envelope(blob, ModelKind::AeCheckpoint);
  BinaryReader r(payload);
  const auto model_size = r.u64();
  if (model_size > r.remaining()) throw Error("checkpoint: truncated model");
  AeTrainResult out{deserialize_autoencoder(r.bytes(static_cast<std::size_t>(model_size))), {}};
  const auto epochs = r.u32();
  if (static_cast<std::size_t>(epochs) * 16 > r.remaining()) throw Error("checkpoint: truncated report");
  out.report.train_loss.resize(epochs);
  out.report.val_loss.resize(epochs);
  for (auto& v : out.report.train_loss) v = r.f64();
  for (auto& v : out.report.val_loss) v = r.f64();
  out.report.best_epoch = r.i32();
  out.report.best_val_loss = r.f64();
  out.report.stopped_early = r.u8() != 0;
  out.report.latent_exceeds_input = r.u8() != 0;
  if (!r.done()) throw Error("checkpoint: trailing bytes");
  return out;
}

struct Splits {
  Matrix x_train, x_val, x_test;
  Vector y_train, y_val, y_test;
};

Splits split_rows(const Matrix& features, const EmbeddingDataset& ds, const Vector& y) {
  const auto tr = ds.indices(Split::Train);
  const auto va = ds.indices(Split::Val);
  const auto te = ds.indices(Split::Test);
  return {select_rows(features, tr), select_rows(features, va), select_rows(features, te),
          select_rows(y, tr),        select_rows(y, va),        select_rows(y, te)};
}

Vector fit_predict(const SweepConfig& cfg, RngSeed seed, const Matrix& x_train, const Vector& y_train,
                   const Matrix& x_val, const Vector& y_val, const Matrix& x_test) {
  if (cfg.regressor == RegressorKind::Forest) {
    ForestConfig fc = cfg.forest;
    fc.seed = derive_seed(seed, "forest");
    return forest_predict(forest_fit(x_train, y_train, fc), x_test);
  }
  MlpConfig mc = cfg.mlp;
  mc.seed = derive_seed(seed, "mlp");
  return mlp_predict(mlp_fit(x_train, y_train, x_val, y_val, mc).model, x_test);
}

RngSeed entry_seed(RngSeed root, const Dimension& dim) {
  return dim.raw ? derive_seed(root, "raw") : derive_seed(root, static_cast<std::uint64_t>(dim.value));
}

/// Runs `body`, prefixing any failure with the ladder entry and stage.
template <class F>
auto staged(const std::string& where, std::string_view stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const std::exception& e) {
    throw Error("[" + where + " stage=" + std::string(stage) + "] " + e.what());
  }
}

struct Prepared {
  Standardizer standardizer;
  Vector y;  // standardized targets for every row
};

Prepared prepare_targets(const EmbeddingDataset& ds) {
  const Vector train = ds.targets_of(Split::Train);
  Standardizer s = fit_standardizer(std::span<const double>(train.data(), static_cast<std::size_t>(train.size())));
  Vector y = s.transform(ds.targets);
  return {s, std::move(y)};
}

AeTrainResult obtain_autoencoder(const SweepConfig& cfg, const AeTrainConfig& ae_cfg, const std::string& digest,
                                 const Splits& sp, int width, CacheStatus& status) {
  std::filesystem::path path;
  if (cfg.cache_dir) {
    path = *cfg.cache_dir / ("ae-" + autoencoder_cache_key(digest, ae_cfg, width) + ".bin");
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) {
      try {
        AeTrainResult cached = deserialize_checkpoint(read_file(path));
        if (cached.model.input_dim() != sp.x_train.cols() || cached.model.latent_dim() != width) {
          throw Error("dimension mismatch");
        }
        status = CacheStatus::Hit;
        return cached;
      } catch (const std::exception& e) {
        spdlog::warn("cache entry {} is unreadable ({}); retraining", path.string(), e.what());
        status = CacheStatus::Corrupt;
      }
    } else {
      status = CacheStatus::Miss;
    }
  }
  AeTrainResult trained = ae_train(sp.x_train, sp.x_val, ae_cfg, width);
  if (cfg.cache_dir) write_file_atomic(path, serialize_checkpoint(trained));
  return trained;
}

}  // namespace

BaselineRow run_baseline(const EmbeddingDataset& dataset, const BaselineInput& input, const SweepConfig& cfg) {
  const std::string where = "baseline=" + input.label;
  const Prepared prep = staged(where, "validate", [&] {
    if (input.features.rows() != dataset.size()) {
      throw Error("feature file has " + std::to_string(input.features.rows()) + " rows, dataset has " +
                  std::to_string(dataset.size()));
    }
    if (input.features.cols() < 1) throw Error("baseline features have no columns");
    validate_probability_rows(input.features);
    dataset.require_all_splits();
    return prepare_targets(dataset);
  });
  const Splits sp = split_rows(input.features, dataset, prep.y);
  const RngSeed seed = derive_seed(cfg.seed, "baseline:" + input.label);
  const Vector pred = staged(where, "regressor", [&] {
    return fit_predict(cfg, seed, sp.x_train, sp.y_train, sp.x_val, sp.y_val, sp.x_test);
  });
  BaselineRow row;
  row.label = input.label;
  row.dimension = static_cast<int>(input.features.cols());
  row.errors = error_distribution(sp.y_test, pred, cfg.huber_delta, input.label);
  row.mean_huber = row.errors.mean();
  return row;
}

void attach_baseline(SweepReport& report, BaselineRow row) {
  const EntryResult& best = report.entry(report.best);
  row.vs_best = t_test(row.errors, best.errors, report.ttest);
  report.baselines.push_back(std::move(row));
}

SweepReport run_sweep(const EmbeddingDataset& dataset, const SweepConfig& cfg) {
  const auto t0 = Clock::now();
  cfg.validate();
  staged("sweep", "dataset", [&] {
    dataset.validate();
    dataset.require_all_splits();
  });
  const Prepared prep = staged("sweep", "standardize", [&] { return prepare_targets(dataset); });
  const Splits raw = split_rows(dataset.features, dataset, prep.y);
  const std::string digest = cfg.cache_dir ? dataset_digest(dataset) : std::string();

  std::vector<Dimension> ladder = cfg.ladder;
  for (auto& d : ladder) {
    if (d.raw) d.value = static_cast<int>(dataset.dim());
  }
  std::sort(ladder.begin(), ladder.end());

  SweepReport report;
  report.provenance = dataset.provenance;
  report.input_dim = dataset.dim();
  report.n_train = static_cast<std::size_t>(raw.x_train.rows());
  report.n_val = static_cast<std::size_t>(raw.x_val.rows());
  report.n_test = static_cast<std::size_t>(raw.x_test.rows());
  report.target_mean = prep.standardizer.mean();
  report.target_std = prep.standardizer.stddev();
  report.regressor = cfg.regressor;
  report.ttest = cfg.ttest;
  report.intrinsic_rule = cfg.intrinsic_rule;
  report.intrinsic_threshold = cfg.intrinsic_threshold;
  report.huber_delta = cfg.huber_delta;
  report.seed = cfg.seed.value;
  report.entries.resize(ladder.size());
  report.run_info.entries.resize(ladder.size());
  report.run_info.workers = cfg.workers;

  parallel_for(ladder.size(), cfg.workers, [&](std::size_t i) {
    const Dimension dim = ladder[i];
    const std::string where = "dz=" + dim.label();
    const RngSeed seed = entry_seed(cfg.seed, dim);
    EntryResult& entry = report.entries[i];
    RunInfo::Entry& info = report.run_info.entries[i];
    entry.dim = dim;
    info.dimension = dim.label();
    spdlog::debug("{}: start", where);

    const Splits* features = &raw;
    Splits coded;
    if (!dim.raw) {
      const auto t_ae = Clock::now();
      AeTrainConfig ae_cfg = cfg.autoencoder;
      ae_cfg.seed = derive_seed(seed, "autoencoder");
      AeTrainResult ae = staged(where, "autoencoder", [&] {
        return obtain_autoencoder(cfg, ae_cfg, digest, raw, dim.value, info.cache);
      });
      staged(where, "encode", [&] {
        coded.x_train = ae_encode_batch(ae.model, raw.x_train);
        coded.x_val = ae_encode_batch(ae.model, raw.x_val);
        coded.x_test = ae_encode_batch(ae.model, raw.x_test);
        const SimilarityResult sim = reconstruction_similarity(ae.model, raw.x_test);
        entry.reconstruction_cosine = sim.mean_cosine;
        entry.similarity_excluded = sim.excluded;
      });
      coded.y_train = raw.y_train;
      coded.y_val = raw.y_val;
      coded.y_test = raw.y_test;
      entry.autoencoder = std::move(ae.report);
      features = &coded;
      info.autoencoder_seconds = seconds_since(t_ae);
    }

    const auto t_reg = Clock::now();
    const Vector pred = staged(where, "regressor", [&] {
      return fit_predict(cfg, seed, features->x_train, features->y_train, features->x_val, features->y_val,
                         features->x_test);
    });
    info.regressor_seconds = seconds_since(t_reg);
    staged(where, "evaluate", [&] {
      entry.errors = error_distribution(raw.y_test, pred, cfg.huber_delta, where);
      entry.mean_huber = entry.errors.mean();
    });
    spdlog::debug("{}: mean Huber {:.6f}", where, entry.mean_huber);
  });

  // Ascending ladder order, so strict < keeps the lowest dimension on ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < report.entries.size(); ++i) {
    if (report.entries[i].mean_huber < report.entries[best].mean_huber) best = i;
  }
  report.best = report.entries[best].dim;

  staged("sweep", "ttest", [&] {
    const std::size_t n = report.entries.size();
    report.p_matrix.assign(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double p = t_test(report.entries[i].errors, report.entries[j].errors, cfg.ttest).p_value;
        report.p_matrix[i][j] = p;
        report.p_matrix[j][i] = p;
      }
      report.entries[i].vs_best = t_test(report.entries[i].errors, report.entries[best].errors, cfg.ttest);
    }
  });

  for (const auto& e : report.entries) report.curve.points.push_back({e.dim, e.mean_huber});
  double lo = report.entries[best].mean_huber;
  double hi = lo;
  for (const auto& e : report.entries) hi = std::max(hi, e.mean_huber);
  if (hi > lo) {
    report.curve = normalize_curve(report.curve);
    report.intrinsic = intrinsic_dimension(report.curve, cfg.intrinsic_threshold, cfg.intrinsic_rule);
  } else {
    report.curve.normalized.assign(report.curve.points.size(), 0.0);
    report.intrinsic = report.entries.front().dim;
  }
  for (std::size_t i = 0; i < report.entries.size(); ++i) report.entries[i].normalized = report.curve.normalized[i];

  for (const auto& b : cfg.baselines) attach_baseline(report, run_baseline(dataset, b, cfg));

  report.run_info.total_seconds = seconds_since(t0);
  return report;
}

}  // namespace dimsweep
