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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csnas/cell_space.hpp"
#include "csnas/rng.hpp"

namespace csnas {

enum class TrialStatus { ok, failed };

std::string_view status_name(TrialStatus s) noexcept;

struct TrialRecord {
  std::size_t index = 0;
  std::vector<int> theta;
  TrialStatus status = TrialStatus::ok;
  double loss = 0.0;  // NaN for failed trials
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string error;  // diagnostics of a failed trial

  bool ok() const noexcept { return status == TrialStatus::ok; }
};

/// Append-only, index-ordered trial log.
class TrialHistory {
 public:
  /// Throws std::invalid_argument unless record.index == size() and a
  /// successful record carries a finite loss.
  void append(TrialRecord record);

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const TrialRecord& operator[](std::size_t i) const { return records_[i]; }
  std::span<const TrialRecord> records() const noexcept { return records_; }

  /// Lowest-loss successful trial; the earliest one on ties.
  std::optional<TrialRecord> best() const;

  /// Running minimum of successful losses after each trial (NaN until the
  /// first success).
  std::vector<double> best_so_far() const;

 private:
  std::vector<TrialRecord> records_;
};

/// Per-dimension categorical distribution over {0, ..., vocab - 1}.
class CategoricalDensity {
 public:
  CategoricalDensity(std::size_t dims, int vocab);  // uniform

  std::size_t dims() const noexcept { return dims_; }
  int vocab() const noexcept { return vocab_; }
  double prob(std::size_t d, int c) const { return probs_[d * static_cast<std::size_t>(vocab_) + c]; }
  double& prob(std::size_t d, int c) { return probs_[d * static_cast<std::size_t>(vocab_) + c]; }
  /// sum_d log p_d(theta_d).
  double log_prob(std::span<const int> theta) const;
  /// One independent draw per dimension.
  std::vector<int> sample(Rng& rng) const;

 private:
  std::size_t dims_;
  int vocab_;
  std::vector<double> probs_;
};

/// density[d][c] = (count_d(c) + prior) / (|records| + prior * vocab).
/// Records of any status are counted; callers pass successful ones.
CategoricalDensity fit_density(std::span<const TrialRecord> records, std::size_t dims, int vocab,
                               double prior_weight);

struct HistorySplit {
  std::vector<TrialRecord> below;  // the ceil(gamma * n) best, ordered by (loss, index)
  std::vector<TrialRecord> above;
  double threshold = 0.0;  // largest loss in `below`
};

/// gamma-quantile split of the successful records. Throws
/// DegenerateInputError when none succeeded.
HistorySplit split_history(std::span<const TrialRecord> records, double gamma);

struct ParzenModel {
  double gamma = 0.25;
  double threshold = 0.0;
  CategoricalDensity below;  // l(theta)
  CategoricalDensity above;  // g(theta)
};

ParzenModel fit_parzen(std::span<const TrialRecord> records, double gamma, std::size_t dims, int vocab,
                       double prior_weight);

/// log l(theta) - log g(theta). Ranks candidates exactly as ei_score does.
double log_ratio(std::span<const int> theta, const ParzenModel& model);

/// (gamma + (1 - gamma) g(theta) / l(theta))^-1, evaluated from log_ratio.
double ei_score(std::span<const int> theta, const ParzenModel& model);

enum class Selection {
  top_fraction,  // uniform pick among the best top_fraction of candidates
  argmax,        // single best candidate
};

struct TpeConfig {
  double gamma = 0.25;
  std::size_t n_startup = 20;
  std::size_t n_candidates = 20000;
  double top_fraction = 0.2;
  double prior_weight = 1.0;
  std::size_t iterations = 100;
  std::size_t workers = 1;
  Selection selection = Selection::top_fraction;
  int vocab = kVocabSize;

  /// Throws ConfigError naming the offending "tpe.*" key.
  void validate() const;
};

/// Uniform draw of `dims` codes.
std::vector<int> random_theta(std::size_t dims, int vocab, Rng& rng);

/// Next architecture vector given the history. Uniform while fewer than
/// n_startup trials exist (or none succeeded); otherwise samples
/// n_candidates vectors from l, ranks them by EI and selects per
/// config.selection.
std::vector<int> suggest(std::span<const TrialRecord> history, std::size_t dims, const TpeConfig& config,
                         Rng& rng);

struct TrialOutcome {
  bool ok = true;
  double loss = 0.0;
  std::string error;
};

/// Scores one architecture vector. Must be a pure function of
/// (theta, seed) and safe to call concurrently.
using Objective = std::function<TrialOutcome(std::span<const int> theta, std::uint64_t seed)>;

/// Called after each trial is appended, in trial order.
using TrialCallback = std::function<void(const TrialHistory&, const TrialRecord&)>;

/// Stream seeds of trial i under a master seed.
std::uint64_t suggestion_seed(std::uint64_t master_seed, std::size_t trial);
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial);

/// Sequential model-based optimization loop.
///
/// Trials are processed in batches of config.workers: batch b covers trials
/// [bW, (b+1)W) and every suggestion in it is drawn from the model fitted on
/// trials [0, bW). Batch members are evaluated concurrently and appended in
/// index order. Suggestion and evaluation randomness of trial i come from
/// streams derived from (master_seed, i), so a run resumed from any prefix
/// of its history continues identically. Runs until `history` holds
/// config.iterations records.
void run_smbo(const Objective& objective, std::size_t dims, const TpeConfig& config, std::uint64_t master_seed,
              TrialHistory& history, const TrialCallback& on_trial = {});

}  // namespace csnas
