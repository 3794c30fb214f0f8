#include "dimsweep/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "dimsweep/binary_io.hpp"
#include "json.hpp"

namespace dimsweep {

using nlohmann::json;

namespace {

constexpr int kReportVersion = 1;

json ttest_json(const TTestResult& t) {
  return {{"t", t.t_statistic}, {"p", t.p_value}, {"dof", t.dof}, {"variant", to_string(t.variant)}};
}

TTestResult ttest_from(const json& j, const std::string& a, const std::string& b) {
  TTestResult t;
  t.t_statistic = j.at("t").get<double>();
  t.p_value = j.at("p").get<double>();
  t.dof = j.at("dof").get<double>();
  t.variant = parse_ttest_variant(j.at("variant").get<std::string>());
  t.label_a = a;
  t.label_b = b;
  return t;
}

json dimension_json(const Dimension& d) { return d.label(); }

Dimension dimension_from(const json& j, Index input_dim) {
  const auto s = j.get<std::string>();
  if (s == "raw") return {static_cast<int>(input_dim), true};
  return {std::stoi(s), false};
}

std::string entry_label(const Dimension& d) { return "dz=" + d.label(); }

}  // namespace

std::string report_json(const SweepReport& r) {
  json j;
  j["format"] = "dimsweep-report";
  j["version"] = kReportVersion;
  j["code_version"] = kCodeVersion;
  j["provenance"] = r.provenance;
  j["input_dim"] = r.input_dim;
  j["splits"] = {{"train", r.n_train}, {"val", r.n_val}, {"test", r.n_test}};
  j["target_standardizer"] = {{"mean", r.target_mean}, {"std", r.target_std}};
  j["config"] = {{"regressor", to_string(r.regressor)},
                 {"ttest", to_string(r.ttest)},
                 {"intrinsic_rule", to_string(r.intrinsic_rule)},
                 {"intrinsic_threshold", r.intrinsic_threshold},
                 {"huber_delta", r.huber_delta},
                 {"seed", r.seed}};
  j["best_dimension"] = dimension_json(r.best);
  j["intrinsic_dimension"] = dimension_json(r.intrinsic);

  json entries = json::array();
  for (const auto& e : r.entries) {
    json je;
    je["dimension"] = dimension_json(e.dim);
    je["value"] = e.dim.value;
    je["mean_huber"] = e.mean_huber;
    je["normalized"] = e.normalized;
    je["vs_best"] = ttest_json(e.vs_best);
    je["significance_band"] = to_string(significance_band(e.vs_best.p_value));
    je["reconstruction_cosine"] = e.reconstruction_cosine ? json(*e.reconstruction_cosine) : json(nullptr);
    je["similarity_excluded"] = e.similarity_excluded;
    if (e.autoencoder) {
      const auto& a = *e.autoencoder;
      je["autoencoder"] = {{"epochs", a.val_loss.size()},
                           {"best_epoch", a.best_epoch},
                           {"best_val_loss", a.best_val_loss},
                           {"stopped_early", a.stopped_early},
                           {"latent_exceeds_input", a.latent_exceeds_input},
                           {"train_loss", a.train_loss},
                           {"val_loss", a.val_loss}};
    } else {
      je["autoencoder"] = nullptr;
    }
    je["errors"] = e.errors.errors;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);

  json labels = json::array();
  for (const auto& e : r.entries) labels.push_back(dimension_json(e.dim));
  j["p_matrix"] = {{"labels", labels}, {"p", r.p_matrix}};

  json baselines = json::array();
  for (const auto& b : r.baselines) {
    baselines.push_back({{"label", b.label},
                         {"dimension", b.dimension},
                         {"mean_huber", b.mean_huber},
                         {"vs_best", ttest_json(b.vs_best)},
                         {"significance_band", to_string(significance_band(b.vs_best.p_value))},
                         {"errors", b.errors.errors}});
  }
  j["baselines"] = std::move(baselines);
  return j.dump(2) + "\n";
}

SweepReport parse_report_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("report: invalid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "dimsweep-report") throw Error("report: not a dimsweep report");
    if (j.at("version").get<int>() != kReportVersion) throw Error("report: unsupported version");
    SweepReport r;
    r.provenance = j.at("provenance").get<std::string>();
    r.input_dim = j.at("input_dim").get<Index>();
    r.n_train = j.at("splits").at("train").get<std::size_t>();
    r.n_val = j.at("splits").at("val").get<std::size_t>();
    r.n_test = j.at("splits").at("test").get<std::size_t>();
    r.target_mean = j.at("target_standardizer").at("mean").get<double>();
    r.target_std = j.at("target_standardizer").at("std").get<double>();
    const auto& c = j.at("config");
    r.regressor = parse_regressor(c.at("regressor").get<std::string>());
    r.ttest = parse_ttest_variant(c.at("ttest").get<std::string>());
    r.intrinsic_rule = parse_intrinsic_rule(c.at("intrinsic_rule").get<std::string>());
    r.intrinsic_threshold = c.at("intrinsic_threshold").get<double>();
    r.huber_delta = c.at("huber_delta").get<double>();
    r.seed = c.at("seed").get<std::uint64_t>();
    r.best = dimension_from(j.at("best_dimension"), r.input_dim);
    r.intrinsic = dimension_from(j.at("intrinsic_dimension"), r.input_dim);
    const std::string best_label = entry_label(r.best);

    for (const auto& je : j.at("entries")) {
      EntryResult e;
      e.dim = dimension_from(je.at("dimension"), r.input_dim);
      e.mean_huber = je.at("mean_huber").get<double>();
      e.normalized = je.at("normalized").get<double>();
      e.vs_best = ttest_from(je.at("vs_best"), entry_label(e.dim), best_label);
      if (!je.at("reconstruction_cosine").is_null()) e.reconstruction_cosine = je["reconstruction_cosine"].get<double>();
      e.similarity_excluded = je.at("similarity_excluded").get<std::size_t>();
      if (!je.at("autoencoder").is_null()) {
        const auto& a = je["autoencoder"];
        AeTrainReport ae;
        ae.best_epoch = a.at("best_epoch").get<int>();
        ae.best_val_loss = a.at("best_val_loss").get<double>();
        ae.stopped_early = a.at("stopped_early").get<bool>();
        ae.latent_exceeds_input = a.at("latent_exceeds_input").get<bool>();
        ae.train_loss = a.at("train_loss").get<std::vector<double>>();
        ae.val_loss = a.at("val_loss").get<std::vector<double>>();
        e.autoencoder = std::move(ae);
      }
      e.errors.errors = je.at("errors").get<std::vector<double>>();
      e.errors.label = entry_label(e.dim);
      e.errors.delta = r.huber_delta;
      r.curve.points.push_back({e.dim, e.mean_huber});
      r.curve.normalized.push_back(e.normalized);
      r.entries.push_back(std::move(e));
    }
    r.p_matrix = j.at("p_matrix").at("p").get<std::vector<std::vector<double>>>();
    for (const auto& jb : j.at("baselines")) {
      BaselineRow b;
      b.label = jb.at("label").get<std::string>();
      b.dimension = jb.at("dimension").get<int>();
      b.mean_huber = jb.at("mean_huber").get<double>();
      b.vs_best = ttest_from(jb.at("vs_best"), b.label, best_label);
      b.errors.errors = jb.at("errors").get<std::vector<double>>();
      b.errors.label = b.label;
      b.errors.delta = r.huber_delta;
      r.baselines.push_back(std::move(b));
    }
    if (r.entries.empty()) throw Error("report: no entries");
    return r;
  } catch (const json::exception& e) {
    throw Error(std::string("report: malformed field: ") + e.what());
  }
}

std::string report_csv(const SweepReport& r) {
  std::string out = "dimension,mean_huber,normalized,p_vs_best,significance_band\n";
  for (const auto& e : r.entries) {
    out += fmt::format("{},{},{},{},{}\n", e.dim.label(), e.mean_huber, e.normalized, e.vs_best.p_value,
                       to_string(significance_band(e.vs_best.p_value)));
  }
  return out;
}

std::string baselines_csv(const SweepReport& r) {
  std::string out = "label,dimension,mean_huber,p_vs_best,significance_band\n";
  for (const auto& b : r.baselines) {
    out += fmt::format("{},{},{},{},{}\n", b.label, b.dimension, b.mean_huber, b.vs_best.p_value,
                       to_string(significance_band(b.vs_best.p_value)));
  }
  return out;
}

std::string run_info_json(const RunInfo& info) {
  json j;
  j["total_seconds"] = info.total_seconds;
  j["workers"] = info.workers;
  json entries = json::array();
  for (const auto& e : info.entries) {
    entries.push_back({{"dimension", e.dimension},
                       {"cache", to_string(e.cache)},
                       {"autoencoder_seconds", e.autoencoder_seconds},
                       {"regressor_seconds", e.regressor_seconds}});
  }
  j["entries"] = std::move(entries);
  return j.dump(2) + "\n";
}

void write_report(const SweepReport& report, const std::filesystem::path& out_dir) {
  write_file_atomic(out_dir / "report.json", report_json(report));
  write_file_atomic(out_dir / "report.csv", report_csv(report));
  write_file_atomic(out_dir / "baselines.csv", baselines_csv(report));
  write_file_atomic(out_dir / "run_info.json", run_info_json(report.run_info));
}

SweepReport load_report(const std::filesystem::path& path) { return parse_report_json(read_file(path)); }

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 440;
constexpr double kLeft = 70;
constexpr double kRight = 30;
constexpr double kTop = 40;
constexpr double kBottom = 60;

std::string band_color(SignificanceBand b) {
  switch (b) {
    case SignificanceBand::NotSignificant: return "#2f9e44";
    case SignificanceBand::Below05: return "#f08c00";
    case SignificanceBand::Below01: return "#c92a2a";
  }
  return "#000000";
}

const char* const kPalette[] = {"#1c7ed6", "#e8590c", "#2f9e44", "#ae3ec9", "#f59f00", "#495057"};

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Log2 x axis over dimension values, linear y axis.
class Canvas {
 public:
  Canvas(std::string title, std::string y_label, double x_lo, double x_hi, double y_lo, double y_hi)
      : title_(std::move(title)), y_label_(std::move(y_label)) {
    lx_lo_ = std::log2(std::max(1.0, x_lo));
    lx_hi_ = std::log2(std::max(1.0, x_hi));
    if (lx_hi_ - lx_lo_ < 1e-9) {
      lx_lo_ -= 0.5;
      lx_hi_ += 0.5;
    }
    if (y_hi - y_lo < 1e-12) {
      y_lo -= 0.5;
      y_hi += 0.5;
    }
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo_ = y_lo - pad;
    y_hi_ = y_hi + pad;
  }

  [[nodiscard]] double x(double dim) const {
    const double t = (std::log2(std::max(1.0, dim)) - lx_lo_) / (lx_hi_ - lx_lo_);
    return kLeft + 0.04 * plot_w() + t * 0.92 * plot_w();
  }
  [[nodiscard]] double y(double v) const { return kTop + (1.0 - (v - y_lo_) / (y_hi_ - y_lo_)) * plot_h(); }

  void add(std::string element) { body_ += element + "\n"; }

  void x_tick(double dim, const std::string& label) {
    add(fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{0:.2f}" y2="{2:.2f}" stroke="#868e96"/>)", x(dim),
                    kTop + plot_h(), kTop + plot_h() + 5));
    add(fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="11" text-anchor="middle">{}</text>)", x(dim),
                    kTop + plot_h() + 18, escape(label)));
  }

  [[nodiscard]] std::string finish(const std::string& legend) const {
    std::string s = fmt::format(
        R"(<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}" font-family="sans-serif">)"
        "\n",
        kWidth, kHeight);
    s += fmt::format(R"(<rect x="0" y="0" width="{}" height="{}" fill="white"/>)"
                     "\n",
                     kWidth, kHeight);
    s += fmt::format(R"(<text x="{:.2f}" y="24" font-size="15" text-anchor="middle">{}</text>)"
                     "\n",
                     kWidth / 2, escape(title_));
    s += fmt::format(R"(<rect x="{}" y="{}" width="{:.2f}" height="{:.2f}" fill="none" stroke="#343a40"/>)"
                     "\n",
                     kLeft, kTop, plot_w(), plot_h());
    for (int i = 0; i <= 4; ++i) {
      const double v = y_lo_ + (y_hi_ - y_lo_) * i / 4.0;
      s += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="11" text-anchor="end">{:.3g}</text>)"
                       "\n",
                       kLeft - 6, y(v) + 4, v);
    }
    s += fmt::format(
        R"svg(<text x="16" y="{:.2f}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2f})">{}</text>)svg"
        "\n",
        kTop + plot_h() / 2, kTop + plot_h() / 2, escape(y_label_));
    s += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="12" text-anchor="middle">latent dimension</text>)"
                     "\n",
                     kLeft + plot_w() / 2, kHeight - 14);
    s += body_;
    s += legend;
    s += "</svg>\n";
    return s;
  }

 private:
  [[nodiscard]] static double plot_w() { return kWidth - kLeft - kRight; }
  [[nodiscard]] static double plot_h() { return kHeight - kTop - kBottom; }

  std::string title_;
  std::string y_label_;
  double lx_lo_, lx_hi_, y_lo_, y_hi_;
  std::string body_;
};

std::string legend_item(double x, double y, const std::string& color, const std::string& text, bool dashed = false) {
  std::string s;
  if (dashed) {
    s = fmt::format(R"(<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="{}" stroke-dasharray="6 4"/>)",
                    x - 8, y - 4, x + 8, y - 4, color);
  } else {
    s = fmt::format(R"(<rect x="{:.2f}" y="{:.2f}" width="10" height="10" fill="{}"/>)", x - 5, y - 9, color);
  }
  return s + fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="11">{}</text>)", x + 12, y, escape(text)) + "\n";
}

std::string diamond(double cx, double cy, double r) {
  return fmt::format("M{:.2f},{:.2f} L{:.2f},{:.2f} L{:.2f},{:.2f} L{:.2f},{:.2f} Z", cx, cy - r, cx + r, cy, cx,
                     cy + r, cx - r, cy);
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                     const std::string& cls) {
  std::string p;
  for (const auto& [x, y] : pts) p += fmt::format("{:.2f},{:.2f} ", x, y);
  if (!p.empty()) p.pop_back();
  return fmt::format(R"(<polyline class="{}" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>)", cls, p,
                     color);
}

void write_plot(PlotFiles& files, const std::filesystem::path& dir, const std::string& stem, const std::string& svg,
                const std::string& csv) {
  files.svg.push_back(dir / (stem + ".svg"));
  files.csv.push_back(dir / (stem + ".csv"));
  write_file_atomic(files.svg.back(), svg);
  write_file_atomic(files.csv.back(), csv);
}

void loss_plot(const SweepReport& r, const std::filesystem::path& dir, PlotFiles& files) {
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = 0.0;
  double y_lo = x_lo;
  double y_hi = -x_lo;
  auto extend = [&](double dim, double v) {
    x_lo = std::min(x_lo, dim);
    x_hi = std::max(x_hi, dim);
    y_lo = std::min(y_lo, v);
    y_hi = std::max(y_hi, v);
  };
  for (const auto& e : r.entries) extend(e.dim.value, e.mean_huber);
  for (const auto& b : r.baselines) extend(b.dimension, b.mean_huber);

  Canvas c("Mean test Huber loss by latent dimension", "mean Huber loss", x_lo, x_hi, y_lo, y_hi);
  std::string csv = "series,dimension,x,mean_huber,p_vs_best,significance_band\n";
  std::vector<std::pair<double, double>> line;
  for (const auto& e : r.entries) {
    if (!e.dim.raw) line.emplace_back(c.x(e.dim.value), c.y(e.mean_huber));
  }
  c.add(polyline(line, "#adb5bd", "curve"));
  for (const auto& e : r.entries) {
    c.x_tick(e.dim.value, e.dim.label());
    const auto band = significance_band(e.vs_best.p_value);
    const bool best = e.dim == r.best;
    c.add(fmt::format(
        R"(<circle class="point" data-dimension="{}" cx="{:.2f}" cy="{:.2f}" r="{}" fill="{}" stroke="{}" stroke-width="2"/>)",
        e.dim.label(), c.x(e.dim.value), c.y(e.mean_huber), best ? 7 : 5, band_color(band),
        best ? "#212529" : "none"));
    csv += fmt::format("ladder,{},{},{},{},{}\n", e.dim.label(), e.dim.value, e.mean_huber, e.vs_best.p_value,
                       to_string(band));
  }
  for (const auto& b : r.baselines) {
    const auto band = significance_band(b.vs_best.p_value);
    c.add(fmt::format(R"(<path class="baseline" data-label="{}" d="{}" fill="{}" stroke="#212529"/>)", escape(b.label),
                      diamond(c.x(b.dimension), c.y(b.mean_huber), 7), band_color(band)));
    c.add(fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="10">{}</text>)", c.x(b.dimension) + 9,
                      c.y(b.mean_huber) - 6, escape(b.label)));
    csv += fmt::format("{},{},{},{},{},{}\n", b.label, b.dimension, b.dimension, b.mean_huber, b.vs_best.p_value,
                       to_string(band));
  }
  std::string legend;
  legend += legend_item(kLeft + 20, kTop + 18, band_color(SignificanceBand::NotSignificant), "p > .05 vs best");
  legend += legend_item(kLeft + 20, kTop + 34, band_color(SignificanceBand::Below05), "p < .05");
  legend += legend_item(kLeft + 20, kTop + 50, band_color(SignificanceBand::Below01), "p < .01");
  write_plot(files, dir, "loss_vs_dimension", c.finish(legend), csv);
}

void similarity_plot(const SweepReport& r, const std::filesystem::path& dir, PlotFiles& files) {
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = 0.0;
  double y_lo = x_lo;
  double y_hi = -x_lo;
  for (const auto& e : r.entries) {
    if (!e.reconstruction_cosine) continue;
    x_lo = std::min<double>(x_lo, e.dim.value);
    x_hi = std::max<double>(x_hi, e.dim.value);
    y_lo = std::min(y_lo, *e.reconstruction_cosine);
    y_hi = std::max(y_hi, *e.reconstruction_cosine);
  }
  if (x_hi == 0.0) {
    x_lo = x_hi = 1.0;
    y_lo = 0.0;
    y_hi = 1.0;
  }
  Canvas c("Reconstruction cosine similarity (test split)", "mean cosine similarity", x_lo, x_hi, y_lo, y_hi);
  std::string csv = "dimension,mean_cosine,excluded\n";
  std::vector<std::pair<double, double>> line;
  for (const auto& e : r.entries) {
    if (!e.reconstruction_cosine) continue;
    line.emplace_back(c.x(e.dim.value), c.y(*e.reconstruction_cosine));
  }
  c.add(polyline(line, kPalette[0], "curve"));
  for (const auto& e : r.entries) {
    if (!e.reconstruction_cosine) continue;
    c.x_tick(e.dim.value, e.dim.label());
    c.add(fmt::format(R"(<circle class="point" data-dimension="{}" cx="{:.2f}" cy="{:.2f}" r="4" fill="{}"/>)",
                      e.dim.label(), c.x(e.dim.value), c.y(*e.reconstruction_cosine), kPalette[0]));
    csv += fmt::format("{},{},{}\n", e.dim.label(), *e.reconstruction_cosine, e.similarity_excluded);
  }
  write_plot(files, dir, "similarity_vs_dimension", c.finish(""), csv);
}

}  // namespace

PlotFiles emit_overlay(const std::vector<std::pair<std::string, SweepReport>>& tasks,
                       const std::filesystem::path& out_dir, const std::string& stem) {
  if (tasks.empty()) throw Error("overlay: no tasks");
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = 0.0;
  for (const auto& [name, r] : tasks) {
    for (const auto& e : r.entries) {
      if (e.dim.raw) continue;
      x_lo = std::min<double>(x_lo, e.dim.value);
      x_hi = std::max<double>(x_hi, e.dim.value);
    }
  }
  if (x_hi == 0.0) x_lo = x_hi = 1.0;

  Canvas c("Normalized loss by latent dimension", "normalized loss", x_lo, x_hi, 0.0, 1.0);
  std::string csv = "task,dimension,x,normalized,raw_reference\n";
  std::string legend;
  std::vector<int> ticks;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& [name, r] = tasks[t];
    const std::string color = kPalette[t % std::size(kPalette)];
    std::vector<std::pair<double, double>> line;
    for (const auto& e : r.entries) {
      if (!e.dim.raw) line.emplace_back(c.x(e.dim.value), c.y(e.normalized));
    }
    c.add(polyline(line, color, "curve"));
    for (const auto& e : r.entries) {
      csv += fmt::format("{},{},{},{},{}\n", name, e.dim.label(), e.dim.value, e.normalized, e.dim.raw ? 1 : 0);
      if (e.dim.raw) {
        c.add(fmt::format(
            R"(<line class="raw-reference" data-task="{}" x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="{}" stroke-dasharray="6 4"/>)",
            escape(name), c.x(x_lo), c.y(e.normalized), c.x(x_hi), c.y(e.normalized), color));
        continue;
      }
      ticks.push_back(e.dim.value);
      c.add(fmt::format(
          R"(<circle class="point" data-task="{}" data-dimension="{}" cx="{:.2f}" cy="{:.2f}" r="4" fill="{}"/>)",
          escape(name), e.dim.label(), c.x(e.dim.value), c.y(e.normalized), color));
    }
    const double ly = kTop + 18 + 16.0 * static_cast<double>(t);
    legend += legend_item(kWidth - kRight - 170, ly, color, name);
  }
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  for (int d : ticks) c.x_tick(d, std::to_string(d));
  legend += legend_item(kWidth - kRight - 170, kTop + 18 + 16.0 * static_cast<double>(tasks.size()), "#495057",
                        "raw embedding", true);
  PlotFiles files;
  write_plot(files, out_dir, stem, c.finish(legend), csv);
  return files;
}

PlotFiles emit_plots(const SweepReport& report, const std::filesystem::path& out_dir) {
  PlotFiles files;
  loss_plot(report, out_dir, files);
  const bool normalizable = report.entries.size() >= 2;
  if (normalizable) {
    const PlotFiles overlay = emit_overlay({{"task", report}}, out_dir);
    files.svg.insert(files.svg.end(), overlay.svg.begin(), overlay.svg.end());
    files.csv.insert(files.csv.end(), overlay.csv.begin(), overlay.csv.end());
  }
  similarity_plot(report, out_dir, files);
  return files;
}

}  // namespace dimsweep
