#pragma once

// Interchange formats, chunk pooling, returns targets and split assignment.
//
// Embedding matrix files ("EMB1"):
//   "EMB1" | u32 rows | u32 dim | rows*dim little-endian f32, row-major
//
// Targets CSV (one row per embedding row, same order):
//   doc_id,target[,date][,split]
//
// Chunk files pair an EMB1 matrix (one row per chunk) with a CSV of
//   doc_id,token_count
// where consecutive rows sharing a doc_id belong to one document.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dimsweep/core.hpp"

namespace dimsweep {

// ---------------------------------------------------------------------------
// Chunk pooling

struct ChunkedEmbeddingRecord {
  std::string doc_id;
  std::vector<Vector> chunk_vectors;
  std::vector<std::uint32_t> chunk_token_counts;  // non-pad tokens per chunk
};

enum class PoolingMode {
  TokenWeighted,  // weight each chunk by its non-pad token count
  FlatChunkMean,  // plain mean over chunk vectors
};

/// Document vector from per-chunk vectors. With `max_context` set, token
/// counts above it are rejected.
Vector pool_chunks(const ChunkedEmbeddingRecord& rec, PoolingMode mode = PoolingMode::TokenWeighted,
                   std::optional<std::uint32_t> max_context = std::nullopt);

std::vector<ChunkedEmbeddingRecord> load_chunk_file(const std::filesystem::path& embeddings,
                                                    const std::filesystem::path& chunk_csv);

// ---------------------------------------------------------------------------
// Returns

/// (p_next - p_prev) / p_prev. Throws unless p_prev > 0.
double compute_return(double p_prev, double p_next);

struct PriceRow {
  std::string ticker;
  Date date;
  double price;  // closing bid/ask average
};

struct ReturnsRow {
  std::string ticker;
  Date date;
  double p_prev;
  double p_next;
  double r;
};

/// Price table indexed by ticker and date.
class PriceTable {
 public:
  explicit PriceTable(std::vector<PriceRow> rows);

  /// Return straddling `date`: last close strictly before it to the first close
  /// strictly after it. Empty when either side is missing.
  [[nodiscard]] std::optional<ReturnsRow> straddling_return(const std::string& ticker, Date date) const;

  /// One row per interior trading day of every ticker.
  [[nodiscard]] std::vector<ReturnsRow> daily_returns() const;

 private:
  std::vector<PriceRow> rows_;  // sorted by (ticker, date)
};

std::vector<PriceRow> read_prices_csv(const std::filesystem::path& path);

struct ArticleRow {
  std::string doc_id;
  std::string ticker;
  Date date;
};

std::vector<ArticleRow> read_articles_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Files

Matrix read_embedding_matrix(const std::filesystem::path& path);
void write_embedding_matrix(const std::filesystem::path& path, const Matrix& m);

struct TargetRecord {
  std::string doc_id;
  double target = 0.0;
  std::optional<Date> date;
  std::optional<Split> split;
};

std::vector<TargetRecord> read_targets_csv(const std::filesystem::path& path);
void write_targets_csv(const std::filesystem::path& path, const std::vector<TargetRecord>& rows);

/// Loads features and targets. Rows without a split column are tagged Train
/// until a split is applied; `has_split_column` reports which case occurred.
EmbeddingDataset load_embedding_file(const std::filesystem::path& embeddings,
                                     const std::filesystem::path& targets_csv, bool* has_split_column = nullptr);
void save_embedding_file(const EmbeddingDataset& ds, const std::filesystem::path& embeddings,
                         const std::filesystem::path& targets_csv);

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
  enum class Mode { Random, Temporal } mode = Mode::Random;

  // Random mode: train/val/test fractions summing to 1.
  double train_fraction = 0.855;
  double val_fraction = 0.045;
  double test_fraction = 0.10;
  RngSeed seed{};

  // Temporal mode: rows dated on/after test_start are test. Validation is
  // either [val_start, test_start) or, without val_start, the latest
  // `temporal_val_fraction` of the pre-test rows.
  std::optional<Date> test_start;
  std::optional<Date> val_start;
  double temporal_val_fraction = 0.10;

  void validate() const;
};

EmbeddingDataset apply_split(EmbeddingDataset dataset, const SplitSpec& spec);

}  // namespace dimsweep
