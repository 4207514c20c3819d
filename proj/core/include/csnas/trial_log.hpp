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

#include <filesystem>
#include <string>

#include "csnas/tpe.hpp"

namespace csnas {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

inline constexpr const char* kTrialCsvHeader = "trial,status,loss,wall_seconds,seed,theta";

/// One CSV row (no newline). Failed trials carry "nan" as loss.
/// wall_seconds is written as 0 unless `with_wall_time`, keeping files from
/// repeated runs byte-identical.
std::string trial_csv_row(const TrialRecord& r, bool with_wall_time);

/// Writes header plus one row per record.
void write_trials_csv(const std::filesystem::path& path, const TrialHistory& history, bool with_wall_time);
/// Appends one row, creating the file with a header if needed.
void append_trial_csv(const std::filesystem::path& path, const TrialRecord& r, bool with_wall_time);

/// Parses a trials.csv. Throws FormatError on malformed rows.
TrialHistory read_trials_csv(const std::filesystem::path& path);

struct Checkpoint {
  std::string config_hash;
  std::uint64_t master_seed = 0;
  TrialHistory history;
};

/// JSON checkpoint, written to a temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes `text` to path via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace csnas
