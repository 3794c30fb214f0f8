// dimsweep command-line tool.
//
//   dimsweep synth    --out-embeddings x.emb --out-targets y.csv [generator flags]
//   dimsweep sweep    --embeddings x.emb --targets y.csv --out DIR [sweep flags]
//   dimsweep baseline --targets y.csv --features probs.emb --label sentiment [--report DIR/report.json]
//   dimsweep report   --input DIR/report.json [--task name=other/report.json ...] --out DIR
//   dimsweep pool     --chunks c.emb --chunk-index c.csv --out-embeddings x.emb --out-ids ids.csv
//   dimsweep returns  --prices p.csv --articles a.csv --out-targets y.csv

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "dimsweep/binary_io.hpp"
#include "dimsweep/ingest.hpp"
#include "dimsweep/report.hpp"
#include "dimsweep/sweep.hpp"
#include "dimsweep/synthgen.hpp"

namespace fs = std::filesystem;
using namespace dimsweep;

namespace {

struct StageError : Error {
  StageError(std::string stage, const std::string& msg) : Error(msg), stage(std::move(stage)) {}
  std::string stage;
};

template <class F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

struct DataArgs {
  std::string embeddings;
  std::string targets;
  std::string split_mode = "auto";
  std::vector<double> fractions{0.855, 0.045, 0.10};
  std::uint64_t split_seed = 0;
  std::string test_start;
  std::string val_start;

  void add(CLI::App* app, bool need_embeddings) {
    auto* e = app->add_option("--embeddings", embeddings, "EMB1 feature matrix")->check(CLI::ExistingFile);
    if (need_embeddings) e->required();
    app->add_option("--targets", targets, "targets CSV (doc_id,target[,date][,split])")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--split", split_mode, "auto (use the split column when present), random or temporal")
        ->check(CLI::IsMember({"auto", "random", "temporal"}));
    app->add_option("--split-fractions", fractions, "train,val,test fractions for random splits")
        ->expected(3)
        ->delimiter(',');
    app->add_option("--split-seed", split_seed, "seed for random splits");
    app->add_option("--test-start", test_start, "first test date (temporal splits)");
    app->add_option("--val-start", val_start, "first validation date (temporal; default: last 10% of pre-test rows)");
  }

  [[nodiscard]] EmbeddingDataset load(const std::string& features) const {
    bool has_split = false;
    EmbeddingDataset ds = load_embedding_file(features, targets, &has_split);
    if (split_mode == "auto" && has_split) return ds;
    SplitSpec spec;
    if (split_mode == "temporal") {
      spec.mode = SplitSpec::Mode::Temporal;
      if (test_start.empty()) throw Error("temporal split needs --test-start");
      spec.test_start = parse_date(test_start);
      if (!val_start.empty()) spec.val_start = parse_date(val_start);
    } else {
      spec.train_fraction = fractions[0];
      spec.val_fraction = fractions[1];
      spec.test_fraction = fractions[2];
      spec.seed = RngSeed{split_seed};
    }
    return apply_split(std::move(ds), spec);
  }
};

struct ModelArgs {
  std::string ladder = "1,2,4,8,16,32,64,128,256,512,raw";
  std::string regressor = "forest";
  std::uint64_t seed = 0;
  std::string ttest = "paired";
  std::string intrinsic_rule = "normalized";
  double intrinsic_threshold = 0.10;
  int workers = 1;
  int epochs = 100;
  int patience = 5;
  int batch_size = 256;
  double learning_rate = 1e-3;
  long hidden_width = 0;
  int trees = 100;
  int tree_threads = 1;
  std::optional<int> max_depth;
  long mlp_hidden = 64;
  double mlp_dropout = 0.1;

  void add(CLI::App* app, bool ladder_flags) {
    if (ladder_flags) {
      app->add_option("--ladder", ladder, "comma list of latent widths, optionally ending in raw");
      app->add_option("--ttest", ttest, "paired or welch")->check(CLI::IsMember({"paired", "welch"}));
      app->add_option("--intrinsic-rule", intrinsic_rule, "normalized (max-min <= threshold) or relative")
          ->check(CLI::IsMember({"normalized", "relative"}));
      app->add_option("--intrinsic-threshold", intrinsic_threshold, "intrinsic-dimension threshold");
      app->add_option("--workers", workers, "ladder entries run concurrently (0 = all cores)");
      app->add_option("--epochs", epochs, "autoencoder max epochs");
      app->add_option("--patience", patience, "autoencoder early-stopping patience");
      app->add_option("--batch-size", batch_size, "autoencoder batch size");
      app->add_option("--lr", learning_rate, "autoencoder learning rate");
      app->add_option("--hidden-width", hidden_width, "ReLU hidden layer width on each side (0 = linear)");
    }
    app->add_option("--regressor", regressor, "forest or mlp")->check(CLI::IsMember({"forest", "mlp"}));
    app->add_option("--seed", seed, "root seed");
    app->add_option("--trees", trees, "forest size");
    app->add_option("--tree-threads", tree_threads, "threads per forest fit (0 = all cores)");
    app->add_option("--max-depth", max_depth, "forest depth limit");
    app->add_option("--mlp-hidden", mlp_hidden, "MLP hidden width");
    app->add_option("--mlp-dropout", mlp_dropout, "MLP dropout probability");
  }

  [[nodiscard]] SweepConfig config() const {
    SweepConfig cfg;
    cfg.ladder = parse_ladder(ladder);
    cfg.regressor = parse_regressor(regressor);
    cfg.seed = RngSeed{seed};
    cfg.ttest = parse_ttest_variant(ttest);
    cfg.intrinsic_rule = parse_intrinsic_rule(intrinsic_rule);
    cfg.intrinsic_threshold = intrinsic_threshold;
    cfg.workers = workers;
    cfg.autoencoder.max_epochs = epochs;
    cfg.autoencoder.patience = patience;
    cfg.autoencoder.batch_size = batch_size;
    cfg.autoencoder.adam.learning_rate = learning_rate;
    cfg.autoencoder.hidden_width = hidden_width;
    cfg.forest.n_trees = trees;
    cfg.forest.threads = tree_threads;
    cfg.forest.max_depth = max_depth;
    cfg.mlp.hidden_dim = mlp_hidden;
    cfg.mlp.dropout = mlp_dropout;
    return cfg;
  }
};

BaselineInput parse_baseline_spec(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("baseline spec '" + spec + "' is not label=path");
  return {spec.substr(0, eq), read_embedding_matrix(spec.substr(eq + 1))};
}

void print_summary(const SweepReport& r) {
  std::cout << "dimension  mean_huber   normalized  p_vs_best  band\n";
  for (const auto& e : r.entries) {
    std::printf("%-9s  %-11.6f  %-10.4f  %-9.3g  %s\n", e.dim.label().c_str(), e.mean_huber, e.normalized,
                e.vs_best.p_value, std::string(to_string(significance_band(e.vs_best.p_value))).c_str());
  }
  for (const auto& b : r.baselines) {
    std::printf("%-9s  %-11.6f  %-10s  %-9.3g  %s (k=%d)\n", b.label.c_str(), b.mean_huber, "-", b.vs_best.p_value,
                std::string(to_string(significance_band(b.vs_best.p_value))).c_str(), b.dimension);
  }
  std::cout << "best dimension: " << r.best.label() << "\nintrinsic dimension: " << r.intrinsic.label() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-dimension sweeps over text embeddings"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  SynthConfig sc;
  std::string synth_emb;
  std::string synth_targets;
  synth->add_option("--dim", sc.dim, "ambient dimension");
  synth->add_option("--latent", sc.latent, "generative rank k");
  synth->add_option("--samples", sc.samples, "row count");
  synth->add_option("--sigma-y", sc.sigma_y, "target noise scale");
  synth->add_option("--sigma-v", sc.sigma_v, "embedding noise scale");
  synth->add_option("--nuisance-dims", sc.nuisance_dims, "directions carrying target-free variance");
  synth->add_option("--nuisance-energy", sc.nuisance_energy, "variance per nuisance direction");
  synth->add_flag("--nonlinear", sc.nonlinear, "y = (w.u) sign(u0 u1) + noise");
  synth->add_option("--seed", sc.seed.value, "seed");
  synth->add_option("--out-embeddings", synth_emb, "EMB1 output")->required();
  synth->add_option("--out-targets", synth_targets, "targets CSV output (with split column)")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a latent-dimension sweep");
  DataArgs sweep_data;
  ModelArgs sweep_model;
  std::string cache_dir;
  bool no_cache = false;
  bool no_plots = false;
  std::string out_dir;
  std::vector<std::string> baseline_specs;
  sweep_data.add(sweep, true);
  sweep_model.add(sweep, true);
  sweep->add_option("--cache-dir", cache_dir, "autoencoder cache directory")->envname("DIMSWEEP_CACHE");
  sweep->add_flag("--no-cache", no_cache, "train every autoencoder from scratch without caching");
  sweep->add_option("--baseline", baseline_specs, "label=probabilities.emb, repeatable");
  sweep->add_option("--out", out_dir, "output directory")->required();
  sweep->add_flag("--no-plots", no_plots, "skip SVG/CSV plot emission");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "score a class-probability feature set");
  DataArgs base_data;
  ModelArgs base_model;
  std::string base_features;
  std::string base_label;
  std::string base_report;
  std::string base_out;
  base_data.add(baseline, false);
  base_model.add(baseline, false);
  baseline->add_option("--features", base_features, "EMB1 probability rows")->required()->check(CLI::ExistingFile);
  baseline->add_option("--label", base_label, "row label, e.g. sentiment")->required();
  baseline->add_option("--report", base_report, "report.json to extend with the row")->check(CLI::ExistingFile);
  baseline->add_option("--out", base_out, "output directory (default: next to --report)");

  // report
  auto* report = app.add_subcommand("report", "re-emit tables and plots from report.json files");
  std::string report_in;
  std::vector<std::string> report_tasks;
  std::string report_out;
  report->add_option("--input", report_in, "report.json")->required()->check(CLI::ExistingFile);
  report->add_option("--task", report_tasks, "name=report.json for the normalized overlay, repeatable");
  report->add_option("--out", report_out, "output directory")->required();

  // pool
  auto* pool = app.add_subcommand("pool", "mean-pool chunk embeddings into document vectors");
  std::string pool_chunks_path;
  std::string pool_index;
  std::string pool_mode = "token";
  std::optional<std::uint32_t> pool_context;
  std::string pool_out;
  std::string pool_ids;
  pool->add_option("--chunks", pool_chunks_path, "EMB1 chunk matrix")->required()->check(CLI::ExistingFile);
  pool->add_option("--chunk-index", pool_index, "CSV doc_id,token_count per chunk")
      ->required()
      ->check(CLI::ExistingFile);
  pool->add_option("--mode", pool_mode, "token (count-weighted) or flat")->check(CLI::IsMember({"token", "flat"}));
  pool->add_option("--max-context", pool_context, "reject chunks longer than this");
  pool->add_option("--out-embeddings", pool_out, "EMB1 output")->required();
  pool->add_option("--out-ids", pool_ids, "CSV of doc_id per output row")->required();

  // returns
  auto* returns = app.add_subcommand("returns", "build return targets for dated articles");
  std::string prices_path;
  std::string articles_path;
  std::string returns_out;
  returns->add_option("--prices", prices_path, "CSV ticker,date,close_bid_ask_avg")
      ->required()
      ->check(CLI::ExistingFile);
  returns->add_option("--articles", articles_path, "CSV doc_id,ticker,date")->required()->check(CLI::ExistingFile);
  returns->add_option("--out-targets", returns_out, "targets CSV output")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*synth) {
      const SynthResult r = stage("generate", [&] { return generate(sc); });
      stage("write", [&] { save_embedding_file(r.dataset, synth_emb, synth_targets); });
      std::cout << r.dataset.provenance << "\n";
    } else if (*sweep) {
      EmbeddingDataset ds = stage("load", [&] { return sweep_data.load(sweep_data.embeddings); });
      if (ds.provenance.empty()) ds.provenance = fs::path(sweep_data.embeddings).filename().string();
      SweepConfig cfg = stage("config", [&] {
        SweepConfig c = sweep_model.config();
        if (!no_cache && !cache_dir.empty()) c.cache_dir = fs::path(cache_dir);
        for (const auto& spec : baseline_specs) c.baselines.push_back(parse_baseline_spec(spec));
        return c;
      });
      const SweepReport r = stage("sweep", [&] { return run_sweep(ds, cfg); });
      stage("write", [&] {
        write_report(r, out_dir);
        if (!no_plots) emit_plots(r, out_dir);
      });
      print_summary(r);
    } else if (*baseline) {
      const EmbeddingDataset ds = stage("load", [&] { return base_data.load(base_features); });
      const SweepConfig cfg = stage("config", [&] { return base_model.config(); });
      const BaselineInput input{base_label, ds.features};
      BaselineRow row = stage("baseline", [&] { return run_baseline(ds, input, cfg); });
      if (!base_report.empty()) {
        SweepReport r = stage("report", [&] { return load_report(base_report); });
        stage("report", [&] { attach_baseline(r, std::move(row)); });
        const fs::path out = base_out.empty() ? fs::path(base_report).parent_path() : fs::path(base_out);
        stage("write", [&] {
          write_report(r, out);
          emit_plots(r, out);
        });
        print_summary(r);
      } else {
        std::printf("%s (k=%d): mean Huber %.6f over %zu test rows\n", row.label.c_str(), row.dimension,
                    row.mean_huber, row.errors.errors.size());
      }
    } else if (*report) {
      const SweepReport r = stage("load", [&] { return load_report(report_in); });
      stage("write", [&] {
        write_file_atomic(fs::path(report_out) / "report.csv", report_csv(r));
        write_file_atomic(fs::path(report_out) / "baselines.csv", baselines_csv(r));
        emit_plots(r, report_out);
        if (!report_tasks.empty()) {
          std::vector<std::pair<std::string, SweepReport>> tasks{{"input", r}};
          for (const auto& t : report_tasks) {
            const auto eq = t.find('=');
            if (eq == std::string::npos || eq == 0) throw Error("task spec '" + t + "' is not name=report.json");
            tasks.emplace_back(t.substr(0, eq), load_report(t.substr(eq + 1)));
          }
          emit_overlay(tasks, report_out, "tasks_overlay");
        }
      });
      print_summary(r);
    } else if (*pool) {
      const auto records = stage("load", [&] { return load_chunk_file(pool_chunks_path, pool_index); });
      const PoolingMode mode = pool_mode == "flat" ? PoolingMode::FlatChunkMean : PoolingMode::TokenWeighted;
      Matrix docs;
      std::vector<TargetRecord> ids;
      stage("pool", [&] {
        for (std::size_t i = 0; i < records.size(); ++i) {
          const Vector v = pool_chunks(records[i], mode, pool_context);
          if (i == 0) docs.resize(static_cast<Index>(records.size()), v.size());
          docs.row(static_cast<Index>(i)) = v.transpose();
        }
      });
      stage("write", [&] {
        write_embedding_matrix(pool_out, docs);
        std::string csv = "doc_id\n";
        for (const auto& r : records) csv += r.doc_id + "\n";
        write_file_atomic(pool_ids, csv);
      });
      std::cout << records.size() << " documents pooled\n";
    } else if (*returns) {
      const PriceTable prices(stage("load", [&] { return read_prices_csv(prices_path); }));
      const auto articles = stage("load", [&] { return read_articles_csv(articles_path); });
      std::vector<TargetRecord> rows;
      std::size_t dropped = 0;
      stage("returns", [&] {
        for (const auto& a : articles) {
          const auto r = prices.straddling_return(a.ticker, a.date);
          if (!r) {
            ++dropped;
            continue;
          }
          rows.push_back({a.doc_id, r->r, a.date, std::nullopt});
        }
      });
      if (dropped) spdlog::warn("{} articles without prices on both sides of their date were dropped", dropped);
      stage("write", [&] { write_targets_csv(returns_out, rows); });
      std::cout << rows.size() << " targets written\n";
    }
  } catch (const StageError& e) {
    const std::string msg = e.what();
    // core errors that already carry a [key=value] tag are printed as is
    if (msg.starts_with("[")) {
      std::cerr << "dimsweep " << command << ": " << msg << "\n";
    } else {
      std::cerr << "dimsweep " << command << ": [" << e.stage << "] " << msg << "\n";
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "dimsweep " << command << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
