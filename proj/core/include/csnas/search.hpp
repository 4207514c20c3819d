/* Copyright 2026 The csnas Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csnas/config.hpp"
#include "csnas/data_pipeline.hpp"
#include "csnas/tpe.hpp"

namespace csnas {

struct Provenance {
  std::string version;
  std::string build_hash;
  std::uint64_t master_seed = 0;
  std::uint64_t data_seed = 0;
  std::string dataset_source;  // "none" for the tabular evaluator
  std::size_t dataset_size = 0;
  std::string dataset_fingerprint;
};

struct SearchRun {
  std::string config_hash;
  std::string evaluator;
  TrialHistory history;
  std::optional<TrialRecord> best;
  Provenance provenance;
  std::filesystem::path run_dir;  // empty when nothing was written
};

struct SearchOptions {
  /// Run directory; empty keeps everything in memory.
  std::filesystem::path out_dir;
  /// Continue from out_dir/checkpoints/latest.json.
  bool resume = false;
  /// Copied verbatim to config.copy (the canonical form when empty).
  std::string config_text;
  /// Stop once this many trials exist (0: run to tpe.iterations). Leaves a
  /// resumable run directory, as an interruption would.
  std::size_t stop_after = 0;
  /// Reuse an already loaded dataset.
  std::shared_ptr<const Dataset> dataset;
};

/// Run directory layout.
inline constexpr const char* kConfigCopyFile = "config.copy";
inline constexpr const char* kTrialsFile = "trials.csv";
inline constexpr const char* kCheckpointFile = "checkpoints/latest.json";
inline constexpr const char* kBestGenotypeFile = "best_genotype.json";
inline constexpr const char* kBestDotFile = "best_cells.dot";
inline constexpr const char* kReportFile = "report.json";

/// TPE search. Writes trials.csv and a checkpoint after every trial, and the
/// best genotype (JSON, DOT) plus report.json at the end.
SearchRun run_search(const RunConfig& config, const SearchOptions& options = {});

/// The same loop with uniform suggestions (n_startup = iterations).
SearchRun random_search_baseline(const RunConfig& config, const SearchOptions& options = {});

/// Type-7 sample quantile (linear interpolation between order statistics).
/// Throws DegenerateInputError on an empty sample.
double quantile(std::vector<double> values, double q);

struct HistorySummary {
  std::size_t trials = 0;
  std::size_t successful = 0;
  std::size_t failed = 0;
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

/// Quantiles of the successful losses.
HistorySummary summarize(const TrialHistory& history);

/// "trial,loss,best_so_far" rows; failed trials have an empty loss.
std::string best_so_far_csv(const TrialHistory& history);

nlohmann::ordered_json make_report(const SearchRun& run);

struct PairedResult {
  std::uint64_t seed = 0;
  double tpe_best = 0.0;
  double random_best = 0.0;
};

struct CompareReport {
  std::vector<PairedResult> pairs;
  double tpe_median = 0.0;
  double random_median = 0.0;
};

/// TPE and random search from identical seeds, nothing written to disk.
CompareReport compare_with_random(const RunConfig& config, std::span<const std::uint64_t> seeds,
                                  std::shared_ptr<const Dataset> dataset = {});

nlohmann::ordered_json to_json(const CompareReport& report);

}  // namespace csnas
