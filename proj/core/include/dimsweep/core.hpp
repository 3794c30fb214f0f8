#pragma once

// Shared domain types: embedding datasets, split tags, seeds, target
// standardization.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dimsweep {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Version string folded into cache keys; bump when training semantics change.
inline constexpr std::string_view kCodeVersion = "dimsweep-0.1.0";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split : std::uint8_t { Train, Val, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct RngSeed {
  std::uint64_t value = 0;
  friend bool operator==(RngSeed, RngSeed) = default;
};

/// Child seed for a numbered component (tree index, latent dimension, ...).
RngSeed derive_seed(RngSeed parent, std::uint64_t tag);
/// Child seed for a named component ("ae-init", "shuffle", ...).
RngSeed derive_seed(RngSeed parent, std::string_view tag);

inline std::mt19937_64 make_engine(RngSeed seed) { return std::mt19937_64(seed.value); }

/// Random permutation of [0, n).
std::vector<Index> shuffled_indices(Index n, std::mt19937_64& rng);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 means hardware
/// concurrency). The first exception is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

using Date = std::chrono::sys_days;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD).
Date parse_date(std::string_view text);
std::string format_date(Date date);

/// N feature vectors of dimension d with one scalar target and a split tag each.
///
/// doc_ids and dates are either empty or hold exactly one entry per row.
struct EmbeddingDataset {
  Matrix features;  // N x d
  Vector targets;   // N
  std::vector<Split> splits;
  std::vector<std::string> doc_ids;
  std::vector<std::optional<Date>> dates;
  std::string provenance;

  [[nodiscard]] Index size() const { return features.rows(); }
  [[nodiscard]] Index dim() const { return features.cols(); }

  /// Throws on non-finite features or targets and on length mismatches.
  void validate() const;
  /// Throws unless every one of train/val/test has at least one row.
  void require_all_splits() const;

  [[nodiscard]] std::vector<Index> indices(Split split) const;
  [[nodiscard]] Matrix rows(Split split) const;
  [[nodiscard]] Vector targets_of(Split split) const;
};

Matrix select_rows(const Matrix& m, std::span<const Index> rows);
Vector select_rows(const Vector& v, std::span<const Index> rows);

/// Affine target scaling fitted on training targets only.
class Standardizer {
 public:
  Standardizer(double mean, double stddev);

  [[nodiscard]] double mean() const { return mean_; }
  [[nodiscard]] double stddev() const { return stddev_; }

  [[nodiscard]] double transform(double y) const { return (y - mean_) / stddev_; }
  [[nodiscard]] double inverse(double z) const { return z * stddev_ + mean_; }
  [[nodiscard]] Vector transform(const Vector& y) const;
  [[nodiscard]] Vector inverse(const Vector& z) const;

 private:
  double mean_;
  double stddev_;
};

/// Arithmetic mean and population standard deviation. Throws on empty or
/// constant input.
Standardizer fit_standardizer(std::span<const double> train_targets);
Vector standardize(const Standardizer& s, const Vector& y);

}  // namespace dimsweep
