#include "dimsweep/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dimsweep/binary_io.hpp"

namespace dimsweep {

void ForestConfig::validate() const {
  if (n_trees < 1) throw Error("forest needs at least one tree");
  if (min_samples_split < 2) throw Error("min_samples_split must be at least 2");
  if (min_samples_leaf < 1) throw Error("min_samples_leaf must be at least 1");
  if (max_depth && *max_depth < 0) throw Error("max_depth must be non-negative");
  if (features_per_split < 0) throw Error("features_per_split must be non-negative");
}

double RegressionTree::predict(const Matrix& x, Index row) const {
  std::int32_t at = 0;
  while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
    const auto& node = nodes[static_cast<std::size_t>(at)];
    at = x(row, node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(at)].value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int RegressionTree::depth() const {
  std::vector<int> depth(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (!nodes[i].is_leaf()) {
      depth[static_cast<std::size_t>(nodes[i].left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(nodes[i].right)] = depth[i] + 1;
    }
  }
  return deepest;
}

namespace {

// Two gains closer than this fraction of the node's sum of squared targets
// are treated as equal.
constexpr double kGainTieTolerance = 1e-10;

struct Task {
  std::int32_t node;
  std::size_t begin;
  std::size_t end;
  int depth;
};

}  // namespace

RegressionTree fit_tree(const Matrix& x, const Vector& y, std::span<const Index> sample_rows, const ForestConfig& cfg,
                        RngSeed seed) {
  const std::size_t n = sample_rows.size();
  const auto d = static_cast<std::size_t>(x.cols());
  if (n == 0) throw Error("cannot grow a tree on zero samples");
  if (d == 0) throw Error("cannot grow a tree on zero features");

  std::vector<double> ys(n);
  for (std::size_t s = 0; s < n; ++s) ys[s] = y[sample_rows[s]];

  // Every feature keeps the node's samples sorted by value inside the node's
  // [begin, end) range; splits stably partition each range.
  std::vector<std::uint32_t> order(d * n);
  std::vector<double> vals(d * n);
  for (std::size_t f = 0; f < d; ++f) {
    auto* ids = &order[f * n];
    std::iota(ids, ids + n, 0u);
    const auto col = static_cast<Index>(f);
    std::stable_sort(ids, ids + n,
                     [&](std::uint32_t a, std::uint32_t b) { return x(sample_rows[a], col) < x(sample_rows[b], col); });
    for (std::size_t k = 0; k < n; ++k) vals[f * n + k] = x(sample_rows[ids[k]], col);
  }

  auto rng = make_engine(derive_seed(seed, "features"));
  std::vector<std::size_t> candidates(d);
  std::iota(candidates.begin(), candidates.end(), std::size_t{0});
  const bool subsample = cfg.features_per_split > 0 && static_cast<std::size_t>(cfg.features_per_split) < d;

  std::vector<std::uint8_t> goes_left(n);
  std::vector<std::uint32_t> tmp_ids(n);
  std::vector<double> tmp_vals(n);

  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<Task> stack{{0, 0, n, 0}};
  while (!stack.empty()) {
    const Task task = stack.back();
    stack.pop_back();
    const std::size_t count = task.end - task.begin;
    const std::uint32_t* ids0 = &order[task.begin];

    double sum = 0.0;
    double sum_sq = 0.0;
    bool pure = true;
    const double first = ys[ids0[0]];
    for (std::size_t k = 0; k < count; ++k) {
      const double v = ys[ids0[k]];
      sum += v;
      sum_sq += v * v;
      pure = pure && v == first;
    }
    {
      auto& node = tree.nodes[static_cast<std::size_t>(task.node)];
      node.samples = static_cast<std::uint32_t>(count);
      node.value = pure ? first : sum / static_cast<double>(count);
    }
    if (pure || count < static_cast<std::size_t>(cfg.min_samples_split) ||
        (cfg.max_depth && task.depth >= *cfg.max_depth)) {
      continue;
    }

    if (subsample) {
      std::iota(candidates.begin(), candidates.end(), std::size_t{0});
      const auto k = static_cast<std::size_t>(cfg.features_per_split);
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, d - 1);
        std::swap(candidates[i], candidates[pick(rng)]);
      }
      std::sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
    }
    const std::size_t n_candidates = subsample ? static_cast<std::size_t>(cfg.features_per_split) : d;

    const double tolerance = kGainTieTolerance * sum_sq;
    const double parent_term = sum * sum / static_cast<double>(count);
    const auto min_leaf = static_cast<std::size_t>(cfg.min_samples_leaf);
    std::int32_t best_feature = -1;
    double best_gain = 0.0;
    double best_threshold = 0.0;
    for (std::size_t c = 0; c < n_candidates; ++c) {
      const std::size_t f = candidates[c];
      const std::uint32_t* ids = &order[f * n + task.begin];
      const double* v = &vals[f * n + task.begin];
      if (v[0] == v[count - 1]) continue;
      double sum_left = 0.0;
      for (std::size_t k = 0; k + 1 < count; ++k) {
        sum_left += ys[ids[k]];
        if (v[k] == v[k + 1]) continue;
        const std::size_t n_left = k + 1;
        const std::size_t n_right = count - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double sum_right = sum - sum_left;
        const double gain = sum_left * sum_left / static_cast<double>(n_left) +
                            sum_right * sum_right / static_cast<double>(n_right) - parent_term;
        if (best_feature < 0 || gain > best_gain + tolerance) {
          best_feature = static_cast<std::int32_t>(f);
          best_gain = gain;
          double mid = v[k] + (v[k + 1] - v[k]) / 2.0;
          if (mid >= v[k + 1]) mid = v[k];
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) continue;

    const auto bf = static_cast<std::size_t>(best_feature);
    std::size_t n_left = 0;
    for (std::size_t k = task.begin; k < task.end; ++k) {
      const bool left = vals[bf * n + k] <= best_threshold;
      goes_left[order[bf * n + k]] = left ? 1 : 0;
      n_left += left ? 1 : 0;
    }
    for (std::size_t f = 0; f < d; ++f) {
      std::uint32_t* ids = &order[f * n];
      double* v = &vals[f * n];
      std::size_t l = task.begin;
      std::size_t r = 0;
      for (std::size_t k = task.begin; k < task.end; ++k) {
        if (goes_left[ids[k]]) {
          ids[l] = ids[k];
          v[l] = v[k];
          ++l;
        } else {
          tmp_ids[r] = ids[k];
          tmp_vals[r] = v[k];
          ++r;
        }
      }
      std::copy_n(tmp_ids.begin(), r, ids + l);
      std::copy_n(tmp_vals.begin(), r, v + l);
    }

    const auto left_index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[static_cast<std::size_t>(task.node)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_index;
    node.right = left_index + 1;
    const std::size_t mid = task.begin + n_left;
    stack.push_back({left_index + 1, mid, task.end, task.depth + 1});
    stack.push_back({left_index, task.begin, mid, task.depth + 1});
  }
  return tree;
}

ForestModel forest_fit(const Matrix& x, const Vector& y, const ForestConfig& cfg) {
  cfg.validate();
  if (x.rows() == 0) throw Error("forest_fit: empty training set");
  if (y.size() != x.rows()) throw Error("forest_fit: target length does not match feature rows");
  if (!x.allFinite() || !y.allFinite()) throw Error("forest_fit: non-finite training data");

  ForestModel model;
  model.dim = x.cols();
  model.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  const Index n = x.rows();
  parallel_for(model.trees.size(), cfg.threads, [&](std::size_t t) {
    const RngSeed tree_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(t));
    std::vector<Index> rows(static_cast<std::size_t>(n));
    if (cfg.bootstrap) {
      auto rng = make_engine(derive_seed(tree_seed, "bootstrap"));
      std::uniform_int_distribution<Index> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), Index{0});
    }
    model.trees[t] = fit_tree(x, y, rows, cfg, tree_seed);
  });
  return model;
}

Vector forest_predict(const ForestModel& model, const Matrix& x) {
  if (model.trees.empty()) throw Error("forest_predict: model has no trees");
  if (x.cols() != model.dim) {
    throw Error("forest_predict: input has dimension " + std::to_string(x.cols()) + ", forest was trained on " +
                std::to_string(model.dim));
  }
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    // Running mean: exact when every tree agrees.
    double mean = 0.0;
    double k = 0.0;
    for (const auto& tree : model.trees) {
      k += 1.0;
      mean += (tree.predict(x, i) - mean) / k;
    }
    out[i] = mean;
  }
  return out;
}

std::string serialize_forest(const ForestModel& model) {
  std::string payload;
  BinaryWriter w(payload);
  w.u32(static_cast<std::uint32_t>(model.dim));
  w.u32(static_cast<std::uint32_t>(model.trees.size()));
  for (const auto& tree : model.trees) {
    w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
    for (const auto& node : tree.nodes) {
      w.i32(node.feature);
      w.f64(node.threshold);
      w.i32(node.left);
      w.i32(node.right);
      w.f64(node.value);
      w.u32(node.samples);
    }
  }
  return wrap_envelope(ModelKind::Forest, payload);
}

ForestModel deserialize_forest(std::string_view blob) {
  const std::string payload = unwrap_envelope(blob, ModelKind::Forest);
  BinaryReader r(payload);
  ForestModel model;
  model.dim = static_cast<Index>(r.u32());
  model.trees.resize(r.u32());
  for (auto& tree : model.trees) {
    tree.nodes.resize(r.u32());
    if (tree.nodes.empty()) throw Error("forest blob: empty tree");
    const auto size = static_cast<std::int32_t>(tree.nodes.size());
    for (auto& node : tree.nodes) {
      node.feature = r.i32();
      node.threshold = r.f64();
      node.left = r.i32();
      node.right = r.i32();
      node.value = r.f64();
      node.samples = r.u32();
      if (!node.is_leaf() && (node.feature >= model.dim || node.left <= 0 || node.left >= size || node.right <= 0 ||
                              node.right >= size)) {
        throw Error("forest blob: invalid node");
      }
    }
  }
  if (!r.done()) throw Error("forest blob: trailing bytes");
  return model;
}

void save_forest(const std::filesystem::path& path, const ForestModel& model) {
  write_file_atomic(path, serialize_forest(model));
}

ForestModel load_forest(const std::filesystem::path& path) { return deserialize_forest(read_file(path)); }

}  // namespace dimsweep
