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

#include "csnas/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csnas/cell_space.hpp"
#include "csnas/errors.hpp"
#include "csnas/evaluators.hpp"
#include "csnas/trial_log.hpp"
#include "csnas/version.hpp"

namespace csnas {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

ordered_json record_json(const TrialRecord& r) {
  return {{"trial", r.index}, {"loss", number_or_null(r.loss)}, {"seed", r.seed}, {"theta", r.theta}};
}

}  // namespace

SearchRun run_search(const RunConfig& config, const SearchOptions& options) {
  config.validate();
  SearchRun run;
  run.config_hash = config_hash(config);

  auto data = options.dataset;
  if (config.evaluator.kind == "contrastive" && !data) data = std::make_shared<const Dataset>(load_dataset(config));
  const auto evaluator = make_evaluator(config, data);
  run.evaluator = evaluator->name();

  auto& prov = run.provenance;
  prov.version = kVersion;
  prov.build_hash = kBuildHash;
  prov.master_seed = config.seed;
  prov.data_seed = config.data.seed;
  if (config.evaluator.kind == "contrastive") {
    prov.dataset_source = data->source;
    prov.dataset_size = data->size();
    prov.dataset_fingerprint = data->fingerprint();
  } else {
    prov.dataset_source = "none";
  }

  const bool write = !options.out_dir.empty();
  const bool wall = config.output.record_wall_time;
  const fs::path out = options.out_dir;
  const fs::path trials = out / kTrialsFile;
  const fs::path checkpoint = out / kCheckpointFile;
  if (write) {
    fs::create_directories(checkpoint.parent_path());
    if (options.resume) {
      if (fs::exists(checkpoint)) {
        auto cp = load_checkpoint(checkpoint);
        if (cp.config_hash != run.config_hash || cp.master_seed != config.seed) {
          throw ConfigError("<resume>", "configuration or seed differs from the checkpointed run in " + out.string());
        }
        run.history = std::move(cp.history);
      } else if (fs::exists(trials)) {
        throw FormatError("cannot resume " + out.string() + ": trials.csv exists but the checkpoint is missing");
      }
    } else if (fs::exists(trials) || fs::exists(checkpoint)) {
      throw ConfigError("<out>", out.string() + " already holds a run; resume it or choose a fresh directory");
    }
    if (!options.resume || !fs::exists(out / kConfigCopyFile)) {
      write_file_atomic(out / kConfigCopyFile,
                        options.config_text.empty() ? to_json(config).dump(2) + "\n" : options.config_text);
    }
    // Rows past the checkpoint belong to trials that will be re-run.
    write_trials_csv(trials, run.history, wall);
  }

  auto tpe = config.tpe;
  if (options.stop_after > 0) tpe.iterations = std::min(options.stop_after, tpe.iterations);
  const Objective objective = [&](std::span<const int> theta, std::uint64_t seed) {
    return evaluator->evaluate(theta, seed);
  };
  const TrialCallback on_trial = [&](const TrialHistory& h, const TrialRecord& r) {
    if (!write) return;
    append_trial_csv(trials, r, wall);
    save_checkpoint(checkpoint, Checkpoint{run.config_hash, config.seed, h});
  };
  if (run.history.size() < tpe.iterations) {
    run_smbo(objective, config.dims(), tpe, config.seed, run.history, on_trial);
  }
  run.best = run.history.best();

  if (write) {
    if (run.best && config.space.vocab == kVocabSize) {
      const auto g = Genotype::from_theta(config.space.n_intermediate, run.best->theta);
      write_file_atomic(out / kBestGenotypeFile, export_genotype(g, GenotypeFormat::json));
      write_file_atomic(out / kBestDotFile, export_genotype(g, GenotypeFormat::dot));
    }
    write_file_atomic(out / kReportFile, make_report(run).dump(2) + "\n");
    run.run_dir = out;
  }
  return run;
}

SearchRun random_search_baseline(const RunConfig& config, const SearchOptions& options) {
  auto c = config;
  c.tpe.n_startup = c.tpe.iterations;
  return run_search(c, options);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DegenerateInputError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

HistorySummary summarize(const TrialHistory& history) {
  HistorySummary s;
  s.trials = history.size();
  std::vector<double> losses;
  for (const auto& r : history.records()) {
    if (r.ok()) losses.push_back(r.loss);
  }
  s.successful = losses.size();
  s.failed = s.trials - s.successful;
  if (losses.empty()) {
    s.min = s.q25 = s.median = s.q75 = s.max = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.min = quantile(losses, 0.0);
  s.q25 = quantile(losses, 0.25);
  s.median = quantile(losses, 0.5);
  s.q75 = quantile(losses, 0.75);
  s.max = quantile(losses, 1.0);
  return s;
}

std::string best_so_far_csv(const TrialHistory& history) {
  std::string out = "trial,loss,best_so_far\n";
  const auto curve = history.best_so_far();
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& r = history[i];
    out += std::to_string(r.index) + ',' + (r.ok() ? format_double(r.loss) : std::string()) + ',' +
           (std::isnan(curve[i]) ? std::string() : format_double(curve[i])) + '\n';
  }
  return out;
}

ordered_json make_report(const SearchRun& run) {
  ordered_json j;
  const auto& p = run.provenance;
  j["version"] = p.version;
  j["build_hash"] = p.build_hash;
  j["config_hash"] = run.config_hash;
  j["evaluator"] = run.evaluator;
  j["seed"] = p.master_seed;
  j["data_seed"] = p.data_seed;
  j["dataset"] = {{"source", p.dataset_source}, {"size", p.dataset_size}, {"fingerprint", p.dataset_fingerprint}};
  const auto s = summarize(run.history);
  j["trials"] = s.trials;
  j["successful"] = s.successful;
  j["best"] = run.best ? record_json(*run.best) : ordered_json(nullptr);
  j["summary"] = {{"min", number_or_null(s.min)},
                  {"q25", number_or_null(s.q25)},
                  {"median", number_or_null(s.median)},
                  {"q75", number_or_null(s.q75)},
                  {"max", number_or_null(s.max)}};
  auto curve = ordered_json::array();
  for (double v : run.history.best_so_far()) curve.push_back(number_or_null(v));
  j["best_so_far"] = std::move(curve);
  auto failures = ordered_json::array();
  for (const auto& r : run.history.records()) {
    if (!r.ok()) failures.push_back({{"trial", r.index}, {"error", r.error}});
  }
  j["failures"] = std::move(failures);
  return j;
}

CompareReport compare_with_random(const RunConfig& config, std::span<const std::uint64_t> seeds,
                                  std::shared_ptr<const Dataset> dataset) {
  if (seeds.empty()) throw ConfigError("--seeds", "at least one seed is required");
  if (config.evaluator.kind == "contrastive" && !dataset) {
    dataset = std::make_shared<const Dataset>(load_dataset(config));
  }
  const auto best_of = [](const SearchRun& r) {
    return r.best ? r.best->loss : std::numeric_limits<double>::quiet_NaN();
  };
  CompareReport report;
  std::vector<double> tpe, rnd;
  for (const auto seed : seeds) {
    auto c = config;
    c.seed = seed;
    SearchOptions opt;
    opt.dataset = dataset;
    const auto a = run_search(c, opt);
    const auto b = random_search_baseline(c, opt);
    report.pairs.push_back({seed, best_of(a), best_of(b)});
    tpe.push_back(best_of(a));
    rnd.push_back(best_of(b));
  }
  report.tpe_median = quantile(tpe, 0.5);
  report.random_median = quantile(rnd, 0.5);
  return report;
}

ordered_json to_json(const CompareReport& report) {
  ordered_json j;
  auto pairs = ordered_json::array();
  for (const auto& p : report.pairs) {
    pairs.push_back({{"seed", p.seed}, {"tpe_best", number_or_null(p.tpe_best)},
                     {"random_best", number_or_null(p.random_best)}});
  }
  j["pairs"] = std::move(pairs);
  j["tpe_median"] = number_or_null(report.tpe_median);
  j["random_median"] = number_or_null(report.random_median);
  return j;
}

}  // namespace csnas
