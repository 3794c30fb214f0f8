#include "dimsweep/core.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace dimsweep {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val" || text == "valid" || text == "validation") return Split::Val;
  if (text == "test") return Split::Test;
  throw Error("unknown split tag '" + std::string(text) + "'");
}

RngSeed derive_seed(RngSeed parent, std::uint64_t tag) {
  return RngSeed{splitmix64(splitmix64(parent.value) ^ splitmix64(tag + 0x632be59bd9b4e019ULL))};
}

RngSeed derive_seed(RngSeed parent, std::string_view tag) { return derive_seed(parent, fnv1a(tag)); }

std::vector<Index> shuffled_indices(Index n, std::mt19937_64& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  auto bad = [&] { return Error("invalid ISO-8601 date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  auto parse = [&](std::string_view part, auto& out) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    if (ec != std::errc{} || ptr != part.data() + part.size()) throw bad();
  };
  parse(text.substr(0, 4), y);
  parse(text.substr(5, 2), m);
  parse(text.substr(8, 2), d);
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw bad();
  return Date{ymd};
}

std::string format_date(Date date) {
  std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

void EmbeddingDataset::validate() const {
  const Index n = features.rows();
  if (targets.size() != n) {
    throw Error("targets length " + std::to_string(targets.size()) + " does not match " +
                std::to_string(n) + " feature rows");
  }
  if (static_cast<Index>(splits.size()) != n) {
    throw Error("split tags length " + std::to_string(splits.size()) + " does not match " +
                std::to_string(n) + " feature rows");
  }
  if (!doc_ids.empty() && static_cast<Index>(doc_ids.size()) != n) {
    throw Error("doc_ids length does not match feature rows");
  }
  if (!dates.empty() && static_cast<Index>(dates.size()) != n) {
    throw Error("dates length does not match feature rows");
  }
  for (Index i = 0; i < n; ++i) {
    if (!features.row(i).allFinite()) throw Error("non-finite feature value at row " + std::to_string(i));
    if (!std::isfinite(targets[i])) throw Error("non-finite target at row " + std::to_string(i));
  }
}

void EmbeddingDataset::require_all_splits() const {
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    if (std::find(splits.begin(), splits.end(), s) == splits.end()) {
      throw Error("dataset has no rows in the " + std::string(to_string(s)) + " split");
    }
  }
}

std::vector<Index> EmbeddingDataset::indices(Split split) const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(static_cast<Index>(i));
  }
  return out;
}

Matrix EmbeddingDataset::rows(Split split) const { return select_rows(features, indices(split)); }

Vector EmbeddingDataset::targets_of(Split split) const { return select_rows(targets, indices(split)); }

Matrix select_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (Index c = 0; c < m.cols(); ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Index>(r), c) = m(rows[r], c);
  }
  return out;
}

Vector select_rows(const Vector& v, std::span<const Index> rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Index>(r)] = v[rows[r]];
  return out;
}

Standardizer::Standardizer(double mean, double stddev) : mean_(mean), stddev_(stddev) {
  if (!(stddev > 0.0) || !std::isfinite(stddev) || !std::isfinite(mean)) {
    throw Error("standardizer requires a finite mean and a strictly positive std");
  }
}

Vector Standardizer::transform(const Vector& y) const { return (y.array() - mean_) / stddev_; }

Vector Standardizer::inverse(const Vector& z) const { return z.array() * stddev_ + mean_; }

Standardizer fit_standardizer(std::span<const double> train_targets) {
  if (train_targets.empty()) throw Error("cannot fit standardizer on an empty target vector");
  const double first = train_targets.front();
  if (std::all_of(train_targets.begin(), train_targets.end(), [&](double v) { return v == first; })) {
    throw Error("cannot fit standardizer: targets have zero variance");
  }
  const double n = static_cast<double>(train_targets.size());
  double sum = 0.0;
  for (double v : train_targets) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : train_targets) ss += (v - mean) * (v - mean);
  return Standardizer(mean, std::sqrt(ss / n));
}

Vector standardize(const Standardizer& s, const Vector& y) { return s.transform(y); }

}  // namespace dimsweep
