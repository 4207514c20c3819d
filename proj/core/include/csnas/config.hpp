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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csnas/data_pipeline.hpp"
#include "csnas/mini_encoder.hpp"
#include "csnas/tpe.hpp"

namespace csnas {

struct SpaceSection {
  int n_intermediate = 4;
  int vocab = kVocabSize;
};

struct DataSection {
  std::string source = "cifar10";  // "cifar10" or "synthetic"
  std::string path;                  // CIFAR-10 batch directory
  double fraction = 0.1;
  bool balanced = true;
  std::uint64_t seed = 0;
  SyntheticConfig synthetic;
  AugmentPolicy augment;
};

struct ContrastiveSection {
  int views = 2;
  double temperature = 0.07;
  double blend = 0.5;
  int proj_dim = 128;
  double bank_momentum = 0.5;
};

struct EncoderSection {
  int layers = 8;
  int channels = 32;
  int input_size = 0;  // 0: follow data.augment.crop
  std::vector<Fraction> reduction_fractions = {{1, 3}, {2, 3}};
  ViewHead view_head = ViewHead::project_then_concat;
};

struct TabularSection {
  std::string kind = "indicator";  // "indicator" or "table"
  int target = 3;                  // indicator: cost 1 unless the code equals target
  std::vector<std::vector<double>> costs;  // table: dims x vocab
  double noise = 0.1;
};

struct EvaluatorSection {
  std::string kind = "contrastive";  // "contrastive" or "tabular"
  int epochs = 2;
  int batch_size = 150;
  double lr = 0.001;
  double momentum = 0.9;
  TabularSection tabular;
};

struct OutputSection {
  bool record_wall_time = false;
};

struct RunConfig {
  SpaceSection space;
  DataSection data;
  ContrastiveSection contrastive;
  EncoderSection encoder;
  TpeConfig tpe;
  EvaluatorSection evaluator;
  std::uint64_t seed = 0;
  OutputSection output;

  /// Architecture vector length: 2 * encoding_length(n_intermediate).
  std::size_t dims() const;
  /// Encoder input side (encoder.input_size or the crop size).
  int input_size() const;
  EncoderConfig encoder_config() const;
  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Parses JSON with // and /* */ comments. Unknown keys and wrongly typed
/// values raise ConfigError with the dotted key path.
RunConfig parse_config(const std::string& text);

/// Reads and parses a config file. A missing file raises ConfigError whose
/// message contains the path.
RunConfig load_config(const std::filesystem::path& path, std::string* raw_text = nullptr);

/// Canonical form of every field, defaults included.
nlohmann::ordered_json to_json(const RunConfig& config);

/// SHA-256 of the canonical form; changes iff a field changes.
std::string config_hash(const RunConfig& config);

/// Applies the CSNAS_SEED environment variable, if set, to config.seed.
void apply_seed_env(RunConfig& config);

}  // namespace csnas
