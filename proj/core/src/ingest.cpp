#include "dimsweep/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "dimsweep/binary_io.hpp"

namespace dimsweep {

namespace {

constexpr std::string_view kEmbeddingMagic = "EMB1";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Header-indexed CSV table. Column lookup is by name.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }

  [[nodiscard]] std::size_t require(std::string_view name, const std::filesystem::path& path) const {
    auto c = column(name);
    if (!c) throw Error(path.string() + ": missing required column '" + std::string(name) + "'");
    return *c;
  }
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                  std::to_string(table.header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) throw Error(path.string() + ": empty CSV file");
  return table;
}

double parse_double(std::string_view text, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(where + ": cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string where(const std::filesystem::path& path, const CsvTable& t, std::size_t row) {
  return path.string() + ":" + std::to_string(t.line_numbers[row]);
}

}  // namespace

// ---------------------------------------------------------------------------

Vector pool_chunks(const ChunkedEmbeddingRecord& rec, PoolingMode mode, std::optional<std::uint32_t> max_context) {
  if (rec.chunk_vectors.empty()) throw Error("document '" + rec.doc_id + "' has no chunks");
  if (rec.chunk_vectors.size() != rec.chunk_token_counts.size()) {
    throw Error("document '" + rec.doc_id + "': chunk vector and token count lengths differ");
  }
  const Index d = rec.chunk_vectors.front().size();
  Vector acc = Vector::Zero(d);
  double total = 0.0;
  for (std::size_t m = 0; m < rec.chunk_vectors.size(); ++m) {
    const auto& v = rec.chunk_vectors[m];
    if (v.size() != d) {
      throw Error("document '" + rec.doc_id + "': chunk " + std::to_string(m) + " has dimension " +
                  std::to_string(v.size()) + ", expected " + std::to_string(d));
    }
    const auto count = rec.chunk_token_counts[m];
    if (count == 0) throw Error("document '" + rec.doc_id + "': chunk " + std::to_string(m) + " has no tokens");
    if (max_context && count > *max_context) {
      throw Error("document '" + rec.doc_id + "': chunk " + std::to_string(m) + " exceeds context length");
    }
    const double w = mode == PoolingMode::TokenWeighted ? static_cast<double>(count) : 1.0;
    acc += w * v;
    total += w;
  }
  return acc / total;
}

std::vector<ChunkedEmbeddingRecord> load_chunk_file(const std::filesystem::path& embeddings,
                                                    const std::filesystem::path& chunk_csv) {
  const Matrix chunks = read_embedding_matrix(embeddings);
  const CsvTable meta = read_csv(chunk_csv);
  const auto id_col = meta.require("doc_id", chunk_csv);
  const auto count_col = meta.require("token_count", chunk_csv);
  if (static_cast<Index>(meta.rows.size()) != chunks.rows()) {
    throw Error("chunk metadata has " + std::to_string(meta.rows.size()) + " rows but " + embeddings.string() +
                " has " + std::to_string(chunks.rows()));
  }
  std::vector<ChunkedEmbeddingRecord> out;
  for (std::size_t i = 0; i < meta.rows.size(); ++i) {
    const auto& id = meta.rows[i][id_col];
    const double count = parse_double(meta.rows[i][count_col], where(chunk_csv, meta, i));
    if (count < 1 || count != std::floor(count) || count > 4294967295.0) {
      throw Error(where(chunk_csv, meta, i) + ": token_count must be a positive integer");
    }
    if (out.empty() || out.back().doc_id != id) out.push_back({id, {}, {}});
    out.back().chunk_vectors.push_back(chunks.row(static_cast<Index>(i)).transpose());
    out.back().chunk_token_counts.push_back(static_cast<std::uint32_t>(count));
  }
  return out;
}

// ---------------------------------------------------------------------------

double compute_return(double p_prev, double p_next) {
  if (!(p_prev > 0.0)) throw Error("previous price must be positive, got " + format_double(p_prev));
  return (p_next - p_prev) / p_prev;
}

PriceTable::PriceTable(std::vector<PriceRow> rows) : rows_(std::move(rows)) {
  std::sort(rows_.begin(), rows_.end(),
            [](const PriceRow& a, const PriceRow& b) { return std::tie(a.ticker, a.date) < std::tie(b.ticker, b.date); });
  for (std::size_t i = 1; i < rows_.size(); ++i) {
    if (rows_[i].ticker == rows_[i - 1].ticker && rows_[i].date == rows_[i - 1].date) {
      throw Error("duplicate price for " + rows_[i].ticker + " on " + format_date(rows_[i].date));
    }
  }
}

std::optional<ReturnsRow> PriceTable::straddling_return(const std::string& ticker, Date date) const {
  auto lo = std::lower_bound(rows_.begin(), rows_.end(), ticker,
                             [](const PriceRow& r, const std::string& t) { return r.ticker < t; });
  auto hi = std::upper_bound(lo, rows_.end(), ticker,
                             [](const std::string& t, const PriceRow& r) { return t < r.ticker; });
  auto after = std::upper_bound(lo, hi, date, [](Date d, const PriceRow& r) { return d < r.date; });
  auto at_or_after = std::lower_bound(lo, hi, date, [](const PriceRow& r, Date d) { return r.date < d; });
  if (at_or_after == lo || after == hi) return std::nullopt;
  const auto& prev = *(at_or_after - 1);
  const auto& next = *after;
  return ReturnsRow{ticker, date, prev.price, next.price, compute_return(prev.price, next.price)};
}

std::vector<ReturnsRow> PriceTable::daily_returns() const {
  std::vector<ReturnsRow> out;
  for (std::size_t i = 1; i + 1 < rows_.size(); ++i) {
    const auto& prev = rows_[i - 1];
    const auto& next = rows_[i + 1];
    if (prev.ticker != rows_[i].ticker || next.ticker != rows_[i].ticker) continue;
    out.push_back({rows_[i].ticker, rows_[i].date, prev.price, next.price, compute_return(prev.price, next.price)});
  }
  return out;
}

std::vector<PriceRow> read_prices_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto tc = t.require("ticker", path);
  const auto dc = t.require("date", path);
  const auto pc = t.require("close_bid_ask_avg", path);
  std::vector<PriceRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out.push_back({t.rows[i][tc], parse_date(t.rows[i][dc]), parse_double(t.rows[i][pc], where(path, t, i))});
  }
  return out;
}

std::vector<ArticleRow> read_articles_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto ic = t.require("doc_id", path);
  const auto tc = t.require("ticker", path);
  const auto dc = t.require("date", path);
  std::vector<ArticleRow> out;
  for (const auto& row : t.rows) out.push_back({row[ic], row[tc], parse_date(row[dc])});
  return out;
}

// ---------------------------------------------------------------------------

Matrix read_embedding_matrix(const std::filesystem::path& path) {
  const std::string blob = read_file(path);
  BinaryReader r(blob);
  if (r.remaining() < 12 || r.bytes(4) != kEmbeddingMagic) {
    throw Error(path.string() + ": not an EMB1 embedding file (bad magic/version)");
  }
  const std::uint64_t n = r.u32();
  const std::uint64_t d = r.u32();
  if (n == 0) throw Error(path.string() + ": empty dataset (0 rows)");
  if (d == 0) throw Error(path.string() + ": zero embedding dimension");
  if (r.remaining() != n * d * 4) {
    throw Error(path.string() + ": payload holds " + std::to_string(r.remaining()) + " bytes, header declares " +
                std::to_string(n) + " x " + std::to_string(d) + " f32 values");
  }
  Matrix m(static_cast<Index>(n), static_cast<Index>(d));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const float v = r.f32();
      if (!std::isfinite(v)) {
        throw Error(path.string() + ": non-finite value at row " + std::to_string(i) + ", column " +
                    std::to_string(j));
      }
      m(i, j) = v;
    }
  }
  return m;
}

void write_embedding_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::string out;
  out.reserve(12 + static_cast<std::size_t>(m.size()) * 4);
  BinaryWriter w(out);
  w.bytes(kEmbeddingMagic);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) w.f32(static_cast<float>(m(i, j)));
  }
  write_file_atomic(path, out);
}

std::vector<TargetRecord> read_targets_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto ic = t.require("doc_id", path);
  const auto vc = t.require("target", path);
  const auto dc = t.column("date");
  const auto sc = t.column("split");
  std::vector<TargetRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    TargetRecord rec;
    rec.doc_id = row[ic];
    rec.target = parse_double(row[vc], where(path, t, i));
    if (!std::isfinite(rec.target)) throw Error(where(path, t, i) + ": non-finite target at row " + std::to_string(i));
    if (dc && !row[*dc].empty()) rec.date = parse_date(row[*dc]);
    if (sc && !row[*sc].empty()) rec.split = parse_split(row[*sc]);
    out.push_back(std::move(rec));
  }
  return out;
}

void write_targets_csv(const std::filesystem::path& path, const std::vector<TargetRecord>& rows) {
  const bool any_date = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.date.has_value(); });
  const bool any_split = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.split.has_value(); });
  std::string out = "doc_id,target";
  if (any_date) out += ",date";
  if (any_split) out += ",split";
  out += '\n';
  for (const auto& r : rows) {
    if (r.doc_id.find(',') != std::string::npos) throw Error("doc_id '" + r.doc_id + "' contains a comma");
    out += r.doc_id;
    out += ',';
    out += format_double(r.target);
    if (any_date) {
      out += ',';
      if (r.date) out += format_date(*r.date);
    }
    if (any_split) {
      out += ',';
      if (r.split) out += to_string(*r.split);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

EmbeddingDataset load_embedding_file(const std::filesystem::path& embeddings,
                                     const std::filesystem::path& targets_csv, bool* has_split_column) {
  EmbeddingDataset ds;
  ds.features = read_embedding_matrix(embeddings);
  const auto records = read_targets_csv(targets_csv);
  if (static_cast<Index>(records.size()) != ds.features.rows()) {
    throw Error("row count mismatch: " + embeddings.string() + " has " + std::to_string(ds.features.rows()) +
                " rows, " + targets_csv.string() + " has " + std::to_string(records.size()));
  }
  const auto n = records.size();
  ds.targets.resize(static_cast<Index>(n));
  ds.splits.assign(n, Split::Train);
  ds.doc_ids.reserve(n);
  bool any_date = false;
  std::size_t with_split = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.targets[static_cast<Index>(i)] = records[i].target;
    ds.doc_ids.push_back(records[i].doc_id);
    any_date = any_date || records[i].date.has_value();
    if (records[i].split) {
      ds.splits[i] = *records[i].split;
      ++with_split;
    }
  }
  if (with_split != 0 && with_split != n) {
    throw Error(targets_csv.string() + ": split column is set on only " + std::to_string(with_split) + " of " +
                std::to_string(n) + " rows");
  }
  if (any_date) {
    ds.dates.reserve(n);
    for (const auto& r : records) ds.dates.push_back(r.date);
  }
  ds.provenance = embeddings.filename().string();
  ds.validate();
  if (has_split_column != nullptr) *has_split_column = with_split == n;
  return ds;
}

void save_embedding_file(const EmbeddingDataset& ds, const std::filesystem::path& embeddings,
                         const std::filesystem::path& targets_csv) {
  ds.validate();
  write_embedding_matrix(embeddings, ds.features);
  std::vector<TargetRecord> rows(static_cast<std::size_t>(ds.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].doc_id = ds.doc_ids.empty() ? "row" + std::to_string(i) : ds.doc_ids[i];
    rows[i].target = ds.targets[static_cast<Index>(i)];
    if (!ds.dates.empty()) rows[i].date = ds.dates[i];
    rows[i].split = ds.splits[i];
  }
  write_targets_csv(targets_csv, rows);
}

// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
  if (mode == Mode::Random) {
    for (double f : {train_fraction, val_fraction, test_fraction}) {
      if (!(f >= 0.0 && f <= 1.0)) throw Error("split fractions must lie in [0, 1]");
    }
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
      throw Error("split fractions must sum to 1");
    }
  } else {
    if (!test_start) throw Error("temporal split requires a test start date");
    if (val_start && !(*val_start < *test_start)) {
      throw Error("temporal split boundaries must be strictly ordered (val start < test start)");
    }
    if (!val_start && !(temporal_val_fraction > 0.0 && temporal_val_fraction < 1.0)) {
      throw Error("temporal validation fraction must lie in (0, 1)");
    }
  }
}

EmbeddingDataset apply_split(EmbeddingDataset dataset, const SplitSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(dataset.size());
  if (spec.mode == SplitSpec::Mode::Random) {
    const auto n_val = static_cast<std::size_t>(std::llround(spec.val_fraction * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
    if (n_val + n_test > n) throw Error("split fractions leave no training rows");
    auto rng = make_engine(spec.seed);
    const auto order = shuffled_indices(static_cast<Index>(n), rng);
    const std::size_t n_train = n - n_val - n_test;
    for (std::size_t k = 0; k < n; ++k) {
      const auto row = static_cast<std::size_t>(order[k]);
      dataset.splits[row] = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
    }
  } else {
    if (dataset.dates.size() != n) throw Error("temporal split requires a date on every row");
    for (std::size_t i = 0; i < n; ++i) {
      if (!dataset.dates[i]) throw Error("temporal split: row " + std::to_string(i) + " has no date");
    }
    std::vector<std::size_t> pre;
    for (std::size_t i = 0; i < n; ++i) {
      const Date d = *dataset.dates[i];
      if (d >= *spec.test_start) {
        dataset.splits[i] = Split::Test;
      } else if (spec.val_start) {
        dataset.splits[i] = d >= *spec.val_start ? Split::Val : Split::Train;
      } else {
        pre.push_back(i);
      }
    }
    if (!spec.val_start) {
      std::stable_sort(pre.begin(), pre.end(),
                       [&](std::size_t a, std::size_t b) { return *dataset.dates[a] < *dataset.dates[b]; });
      const auto n_val =
          static_cast<std::size_t>(std::llround(spec.temporal_val_fraction * static_cast<double>(pre.size())));
      for (std::size_t k = 0; k < pre.size(); ++k) {
        dataset.splits[pre[k]] = k + n_val >= pre.size() ? Split::Val : Split::Train;
      }
    }
  }
  dataset.require_all_splits();
  return dataset;
}

}  // namespace dimsweep
