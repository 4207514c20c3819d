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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "csnas/config.hpp"
#include "csnas/data_pipeline.hpp"
#include "csnas/mini_encoder.hpp"
#include "csnas/tpe.hpp"

namespace csnas {

/// Scores architecture vectors. evaluate() is a pure function of
/// (theta, seed) and may be called from several threads at once.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::string name() const = 0;
  virtual TrialOutcome evaluate(std::span<const int> theta, std::uint64_t seed) const = 0;
};

struct ContrastiveEvalConfig {
  int n_intermediate = 4;
  EncoderConfig encoder;
  AugmentPolicy augment;
  int epochs = 2;
  int batch_size = 150;
  double temperature = 0.07;
  double blend = 0.5;
  double lr = 0.001;
  double momentum = 0.9;
  double bank_momentum = 0.5;

  static ContrastiveEvalConfig from(const RunConfig& config);
};

/// Trains the candidate network for E epochs on unlabeled images and
/// reports the last epoch's mean batch loss.
///
/// Each epoch visits a seeded permutation of the dataset in batches of K
/// (a trailing partial batch is dropped). With E = 0 one forward-only pass
/// is scored. Shape or numerical faults make the trial fail.
class ContrastiveEvaluator : public Evaluator {
 public:
  /// Throws ConfigError when the dataset is smaller than one batch.
  ContrastiveEvaluator(std::shared_ptr<const Dataset> data, ContrastiveEvalConfig config);

  std::string name() const override { return "contrastive"; }
  TrialOutcome evaluate(std::span<const int> theta, std::uint64_t seed) const override;

  /// Same as evaluate() but throws instead of reporting a failed trial.
  double score(const Genotype& genotype, std::uint64_t seed) const;

  const ContrastiveEvalConfig& config() const noexcept { return config_; }

 private:
  std::shared_ptr<const Dataset> data_;
  ContrastiveEvalConfig config_;
};

/// Synthetic objective: sum_d cost[d][theta_d] + N(0, noise^2).
class TabularEvaluator : public Evaluator {
 public:
  TabularEvaluator(std::vector<std::vector<double>> costs, double noise);

  /// cost 0 for `target`, 1 for every other code.
  static TabularEvaluator indicator(std::size_t dims, int vocab, int target, double noise);

  std::string name() const override { return "tabular"; }
  TrialOutcome evaluate(std::span<const int> theta, std::uint64_t seed) const override;

  std::size_t dims() const noexcept { return costs_.size(); }

 private:
  std::vector<std::vector<double>> costs_;
  double noise_;
};

/// Evaluator described by config.evaluator; loads the dataset when needed.
std::unique_ptr<Evaluator> make_evaluator(const RunConfig& config, std::shared_ptr<const Dataset> data);

/// Dataset selected by config.data.
Dataset load_dataset(const RunConfig& config);

}  // namespace csnas
