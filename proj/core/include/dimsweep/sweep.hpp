#pragma once

// Latent-dimension sweep: for each ladder entry train (or load) an
// autoencoder, encode every split, fit the regression head on the train
// codes and score Huber errors on the test split. Entries are compared
// against the best one with t-tests; class-probability feature sets can be
// scored alongside as baselines.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dimsweep/analysis.hpp"
#include "dimsweep/autoencoder.hpp"
#include "dimsweep/core.hpp"
#include "dimsweep/forest.hpp"
#include "dimsweep/mlp.hpp"

namespace dimsweep {

enum class RegressorKind { Forest, Mlp };

std::string_view to_string(RegressorKind kind);
RegressorKind parse_regressor(std::string_view text);

/// {1, 2, 4, ..., 512, raw}. The raw entry's value is filled in from the
/// dataset when the sweep runs.
std::vector<Dimension> default_ladder();
/// Comma list such as "1,2,4,raw". Widths must be positive and strictly
/// increasing; "raw" may appear once.
std::vector<Dimension> parse_ladder(std::string_view text);

/// Fixed feature set (for instance classifier softmax outputs) aligned row by
/// row with the sweep dataset.
struct BaselineInput {
  std::string label;
  Matrix features;  // N x k probability rows
};

/// Throws unless every row is non-negative and sums to 1 within `tolerance`;
/// the message lists the offending row indices.
void validate_probability_rows(const Matrix& rows, double tolerance = 1e-4);

struct SweepConfig {
  std::vector<Dimension> ladder = default_ladder();
  RegressorKind regressor = RegressorKind::Forest;
  AeTrainConfig autoencoder{};
  ForestConfig forest{};
  MlpConfig mlp{};
  TTestVariant ttest = TTestVariant::Paired;
  IntrinsicRule intrinsic_rule = IntrinsicRule::NormalizedThreshold;
  double intrinsic_threshold = 0.10;
  double huber_delta = 1.0;
  RngSeed seed{};
  std::optional<std::filesystem::path> cache_dir;
  int workers = 1;  // ladder entries trained concurrently; 0 = hardware concurrency
  std::vector<BaselineInput> baselines;

  void validate() const;
};

struct EntryResult {
  Dimension dim;
  ErrorDistribution errors;
  double mean_huber = 0.0;
  double normalized = 0.0;
  TTestResult vs_best;
  std::optional<double> reconstruction_cosine;  // test split; empty for raw
  std::size_t similarity_excluded = 0;
  std::optional<AeTrainReport> autoencoder;     // empty for raw
};

struct BaselineRow {
  std::string label;
  int dimension = 0;  // class count
  ErrorDistribution errors;
  double mean_huber = 0.0;
  TTestResult vs_best;
};

enum class CacheStatus { Unused, Miss, Hit, Corrupt };

std::string_view to_string(CacheStatus s);

/// Wall-clock and cache bookkeeping. Written beside the report, never into it.
struct RunInfo {
  struct Entry {
    std::string dimension;
    CacheStatus cache = CacheStatus::Unused;
    double autoencoder_seconds = 0.0;
    double regressor_seconds = 0.0;
  };
  std::vector<Entry> entries;
  double total_seconds = 0.0;
  int workers = 1;
};

struct SweepReport {
  std::string provenance;
  Index input_dim = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  double target_mean = 0.0;
  double target_std = 1.0;

  RegressorKind regressor = RegressorKind::Forest;
  TTestVariant ttest = TTestVariant::Paired;
  IntrinsicRule intrinsic_rule = IntrinsicRule::NormalizedThreshold;
  double intrinsic_threshold = 0.10;
  double huber_delta = 1.0;
  std::uint64_t seed = 0;

  std::vector<EntryResult> entries;  // ascending dimension
  LossCurve curve;
  Dimension best;
  Dimension intrinsic;
  std::vector<std::vector<double>> p_matrix;  // pairwise p-values between entries
  std::vector<BaselineRow> baselines;

  RunInfo run_info;  // not serialized with the report

  [[nodiscard]] const EntryResult& entry(const Dimension& dim) const;
};

/// Runs the whole ladder on a dataset with train/val/test tags. Targets are
/// standardized with train-split statistics before anything is fitted.
SweepReport run_sweep(const EmbeddingDataset& dataset, const SweepConfig& cfg);

/// Scores one probability feature set with the configured regressor on the
/// dataset's splits and targets (standardized with train statistics). The
/// comparison against the sweep's best entry is left to the caller.
BaselineRow run_baseline(const EmbeddingDataset& dataset, const BaselineInput& input, const SweepConfig& cfg);

/// Adds a baseline row to an existing report, t-testing it against the best
/// entry's stored errors.
void attach_baseline(SweepReport& report, BaselineRow row);

/// SHA-256 over the feature matrix and split tags, the dataset part of every
/// autoencoder cache key.
std::string dataset_digest(const EmbeddingDataset& dataset);

/// Hex key naming one cached autoencoder (stored as ae-<key>.bin).
std::string autoencoder_cache_key(std::string_view dataset_digest, const AeTrainConfig& cfg, Index latent_dim);

}  // namespace dimsweep
