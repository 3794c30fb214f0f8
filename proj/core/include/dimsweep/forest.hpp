#pragma once

// Random forest of CART regression trees (squared-error splits, bootstrap
// resampling, exhaustive midpoint thresholds).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dimsweep/core.hpp"

namespace dimsweep {

struct ForestConfig {
  int n_trees = 100;
  std::optional<int> max_depth;  // unlimited when empty
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  int features_per_split = 0;  // 0 means all features
  bool bootstrap = true;       // resample of size N with replacement
  RngSeed seed{};
  int threads = 1;  // 0 means hardware concurrency

  void validate() const;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // mean target of the node's training samples
  std::uint32_t samples = 0;

  [[nodiscard]] bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  [[nodiscard]] double predict(const Matrix& x, Index row) const;
  [[nodiscard]] std::size_t leaf_count() const;
  [[nodiscard]] int depth() const;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  Index dim = 0;
};

/// Grows one tree on the given sample rows (duplicates allowed). Ties between
/// equally good splits go to the lowest feature index, then lowest threshold.
RegressionTree fit_tree(const Matrix& x, const Vector& y, std::span<const Index> sample_rows, const ForestConfig& cfg,
                        RngSeed seed);

ForestModel forest_fit(const Matrix& x, const Vector& y, const ForestConfig& cfg);
Vector forest_predict(const ForestModel& model, const Matrix& x);

std::string serialize_forest(const ForestModel& model);
ForestModel deserialize_forest(std::string_view blob);
void save_forest(const std::filesystem::path& path, const ForestModel& model);
ForestModel load_forest(const std::filesystem::path& path);

}  // namespace dimsweep
