#pragma once

// Sweep report serialization and plot emission.
//
// report.json holds the full curve, per-entry error arrays, the pairwise
// p-value matrix and baseline rows; report.csv has one line per ladder entry:
//   dimension,mean_huber,normalized,p_vs_best,significance_band
// Plots are standalone SVG files, each with a CSV sidecar carrying the
// plotted numbers.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dimsweep/sweep.hpp"

namespace dimsweep {

std::string report_json(const SweepReport& report);
SweepReport parse_report_json(std::string_view text);
std::string report_csv(const SweepReport& report);
std::string baselines_csv(const SweepReport& report);
std::string run_info_json(const RunInfo& info);

/// Writes report.json, report.csv, baselines.csv and run_info.json.
void write_report(const SweepReport& report, const std::filesystem::path& out_dir);
SweepReport load_report(const std::filesystem::path& path);

struct PlotFiles {
  std::vector<std::filesystem::path> svg;
  std::vector<std::filesystem::path> csv;
};

/// loss_vs_dimension, normalized_overlay (this report alone) and
/// similarity_vs_dimension.
PlotFiles emit_plots(const SweepReport& report, const std::filesystem::path& out_dir);

/// Max-min normalized curves of several tasks on one axis, with each task's
/// raw-embedding value drawn as a dashed line.
PlotFiles emit_overlay(const std::vector<std::pair<std::string, SweepReport>>& tasks,
                       const std::filesystem::path& out_dir, const std::string& stem = "normalized_overlay");

}  // namespace dimsweep
