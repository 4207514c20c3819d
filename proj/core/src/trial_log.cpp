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

#include "csnas/trial_log.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "csnas/errors.hpp"

namespace csnas {

namespace {

constexpr int kCheckpointVersion = 1;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw FormatError("trials.csv: bad " + what + " \"" + s + "\"");
  return v;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trial_csv_row(const TrialRecord& r, bool with_wall_time) {
  std::string row = std::to_string(r.index);
  row += ',';
  row += status_name(r.status);
  row += ',';
  row += r.ok() ? format_double(r.loss) : "nan";
  row += ',';
  row += with_wall_time ? format_double(r.wall_seconds) : "0";
  row += ',';
  row += std::to_string(r.seed);
  row += ',';
  for (std::size_t i = 0; i < r.theta.size(); ++i) {
    if (i) row += ';';
    row += std::to_string(r.theta[i]);
  }
  return row;
}

void write_trials_csv(const std::filesystem::path& path, const TrialHistory& history, bool with_wall_time) {
  std::string text = std::string(kTrialCsvHeader) + "\n";
  for (const auto& r : history.records()) text += trial_csv_row(r, with_wall_time) + "\n";
  write_file_atomic(path, text);
}

void append_trial_csv(const std::filesystem::path& path, const TrialRecord& r, bool with_wall_time) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream f(path, std::ios::binary | std::ios::app);
  if (!f) throw FormatError("cannot append to " + path.string());
  if (fresh) f << kTrialCsvHeader << '\n';
  f << trial_csv_row(r, with_wall_time) << '\n';
  f.flush();
  if (!f) throw FormatError("write failed: " + path.string());
}

TrialHistory read_trials_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != kTrialCsvHeader) {
    throw FormatError(path.string() + ": missing or unexpected header");
  }
  TrialHistory h;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 6) throw FormatError(path.string() + ": expected 6 columns in \"" + line + "\"");
    TrialRecord r;
    r.index = parse_number<std::size_t>(cols[0], "trial index");
    if (cols[1] == "ok") {
      r.status = TrialStatus::ok;
      r.loss = parse_number<double>(cols[2], "loss");
    } else if (cols[1] == "failed") {
      r.status = TrialStatus::failed;
      r.loss = std::numeric_limits<double>::quiet_NaN();
    } else {
      throw FormatError(path.string() + ": bad status \"" + cols[1] + "\"");
    }
    r.wall_seconds = parse_number<double>(cols[3], "wall_seconds");
    r.seed = parse_number<std::uint64_t>(cols[4], "seed");
    if (!cols[5].empty()) {
      for (const auto& c : split(cols[5], ';')) r.theta.push_back(parse_number<int>(c, "theta code"));
    }
    try {
      h.append(std::move(r));
    } catch (const std::invalid_argument& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  return h;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot write " + tmp.string());
    f << text;
    f.flush();
    if (!f) throw FormatError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  nlohmann::ordered_json j;
  j["version"] = kCheckpointVersion;
  j["config_hash"] = cp.config_hash;
  j["master_seed"] = cp.master_seed;
  auto& trials = j["trials"] = nlohmann::ordered_json::array();
  for (const auto& r : cp.history.records()) {
    nlohmann::ordered_json t;
    t["trial"] = r.index;
    t["status"] = status_name(r.status);
    if (r.ok()) {
      t["loss"] = r.loss;
    } else {
      t["loss"] = nullptr;
    }
    t["wall_seconds"] = r.wall_seconds;
    t["seed"] = r.seed;
    t["theta"] = r.theta;
    if (!r.error.empty()) t["error"] = r.error;
    trials.push_back(std::move(t));
  }
  write_file_atomic(path, j.dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint " + path.string());
  Checkpoint cp;
  try {
    const auto j = nlohmann::json::parse(f);
    if (j.at("version").get<int>() != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
    cp.config_hash = j.at("config_hash").get<std::string>();
    cp.master_seed = j.at("master_seed").get<std::uint64_t>();
    for (const auto& t : j.at("trials")) {
      TrialRecord r;
      r.index = t.at("trial").get<std::size_t>();
      const auto status = t.at("status").get<std::string>();
      if (status == "ok") {
        r.status = TrialStatus::ok;
        r.loss = t.at("loss").get<double>();
      } else if (status == "failed") {
        r.status = TrialStatus::failed;
        r.loss = std::numeric_limits<double>::quiet_NaN();
      } else {
        throw FormatError("bad trial status \"" + status + "\"");
      }
      r.wall_seconds = t.at("wall_seconds").get<double>();
      r.seed = t.at("seed").get<std::uint64_t>();
      r.theta = t.at("theta").get<std::vector<int>>();
      if (t.contains("error")) r.error = t.at("error").get<std::string>();
      cp.history.append(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return cp;
}

}  // namespace csnas
