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

#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "csnas/cell_space.hpp"
#include "csnas/config.hpp"
#include "csnas/errors.hpp"
#include "csnas/evaluators.hpp"
#include "csnas/search.hpp"
#include "csnas/trial_log.hpp"
#include "csnas/version.hpp"

namespace csnas::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path, const char* what) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(what, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_output(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + out_path);
  f << text;
}

std::string version_line() { return std::string("csnas ") + kVersion + " (build " + kBuildHash + ")"; }

// File values, then flags, then CSNAS_SEED.
RunConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed,
                         std::optional<std::size_t> iterations, std::optional<std::size_t> workers,
                         std::string* raw) {
  auto config = load_config(path, raw);
  if (seed) config.seed = *seed;
  if (iterations) config.tpe.iterations = *iterations;
  if (workers) config.tpe.workers = *workers;
  apply_seed_env(config);
  config.validate();
  return config;
}

struct SearchArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> workers;
  bool resume = false;
  bool random = false;
};

int cmd_search(const SearchArgs& a, std::ostream& out) {
  std::string raw;
  const auto config = resolve_config(a.config, a.seed, a.iterations, a.workers, &raw);
  SearchOptions opt;
  opt.out_dir = a.out;
  opt.resume = a.resume;
  opt.config_text = raw;
  const auto run = a.random ? random_search_baseline(config, opt) : run_search(config, opt);
  const auto s = summarize(run.history);
  out << "trials: " << s.trials << " (" << s.failed << " failed)\n";
  if (run.best) {
    out << "best loss: " << format_double(run.best->loss) << " at trial " << run.best->index << "\n";
    if (config.space.vocab == kVocabSize) out << "best genotype: " << (fs::path(a.out) / kBestGenotypeFile).string() << "\n";
  } else {
    out << "no successful trial\n";
  }
  out << "report: " << (fs::path(a.out) / kReportFile).string() << "\n";
  return run.best ? kExitOk : kExitRuntime;
}

int cmd_space_stats(int n, int vocab, std::ostream& out) {
  if (vocab < 1) throw InvalidSpaceError("vocabulary size must be >= 1");
  const auto len = encoding_length(n);
  const auto card = space_cardinality(n, vocab);
  const auto digits = card.str().size();
  out << "n_intermediate: " << n << "\n";
  out << "vocab: " << vocab << "\n";
  out << "encoding length per cell: " << len << "\n";
  out << "architecture vector length: " << 2 * len << "\n";
  out << "cardinality: (" << vocab << "^" << len << ")^2 = " << vocab << "^" << 2 * len << " = " << card.str() << "\n";
  out << "decimal digits: " << digits << "\n";
  if (n > 1) {
    const auto prev = space_cardinality(n - 1, vocab);
    const boost::multiprecision::cpp_int growth = card / prev;
    const auto extra = 2 * (len - encoding_length(n - 1));
    out << "growth vs n=" << n - 1 << ": " << vocab << "^" << extra << " = " << growth.str() << "\n";
  } else {
    out << "growth vs n=" << n - 1 << ": n/a\n";
  }
  return kExitOk;
}

Genotype read_genotype(const std::string& path) { return import_genotype_json(read_text(path, "--genotype")); }

int cmd_eval(const std::string& genotype_path, const std::string& config_path, std::optional<std::uint64_t> seed,
             std::ostream& out) {
  auto config = resolve_config(config_path, seed, std::nullopt, std::nullopt, nullptr);
  const auto g = read_genotype(genotype_path);
  if (g.n_intermediate() != config.space.n_intermediate) {
    throw ConfigError("space.n_intermediate", "genotype has N=" + std::to_string(g.n_intermediate()) +
                                                  " but the config has N=" +
                                                  std::to_string(config.space.n_intermediate));
  }
  const auto evaluator = make_evaluator(config, nullptr);
  const auto theta = g.theta();
  const auto r = evaluator->evaluate(theta, config.seed);
  if (!r.ok) throw Error("evaluation failed: " + r.error);
  out << "loss: " << format_double(r.loss) << "\n";
  return kExitOk;
}

int cmd_export(const std::string& genotype_path, const std::string& format, const std::string& out_path,
               std::ostream& out) {
  const auto fmt = parse_genotype_format(format);
  write_output(export_genotype(read_genotype(genotype_path), fmt), out_path, out);
  return kExitOk;
}

int cmd_history(const std::string& run_dir, const std::string& out_path, std::ostream& out) {
  const auto trials = fs::path(run_dir) / kTrialsFile;
  if (!fs::exists(trials)) throw Error("no " + std::string(kTrialsFile) + " in " + run_dir);
  const auto history = read_trials_csv(trials);
  if (history.empty()) throw Error(run_dir + " holds no trials");
  write_output(best_so_far_csv(history), out_path, out);
  const auto s = summarize(history);
  std::ostream& sink = out;
  if (out_path.empty()) sink << "\n";
  sink << "trials: " << s.trials << "\n"
       << "successful: " << s.successful << "\n"
       << "failed: " << s.failed << "\n";
  if (s.successful > 0) {
    sink << "min: " << format_double(s.min) << "\n"
         << "q25: " << format_double(s.q25) << "\n"
         << "median: " << format_double(s.median) << "\n"
         << "q75: " << format_double(s.q75) << "\n"
         << "max: " << format_double(s.max) << "\n";
  }
  return kExitOk;
}

int cmd_compare(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
                std::optional<std::size_t> iterations, const std::string& out_path, std::ostream& out) {
  const auto config = resolve_config(config_path, std::nullopt, iterations, std::nullopt, nullptr);
  const auto report = compare_with_random(config, seeds);
  write_output(to_json(report).dump(2) + "\n", out_path, out);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive self-supervised cell search", "csnas"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print version and build hash");

  SearchArgs search;
  auto* c_search = app.add_subcommand("search", "Run a TPE architecture search");
  c_search->add_option("--config", search.config, "Config file")->required();
  c_search->add_option("--out", search.out, "Run directory")->required();
  c_search->add_option("--seed", search.seed, "Master seed (overrides the file)");
  c_search->add_option("--iterations", search.iterations, "Trial budget (overrides tpe.iterations)");
  c_search->add_option("--workers", search.workers, "Trials per batch (overrides tpe.workers)");
  c_search->add_flag("--resume", search.resume, "Continue from the run directory's checkpoint");
  c_search->add_flag("--random", search.random, "Uniform random search instead of TPE");

  int n = 0;
  int vocab = kVocabSize;
  auto* c_stats = app.add_subcommand("space-stats", "Encoding length and cardinality of the search space");
  c_stats->add_option("--n", n, "Intermediate nodes per cell")->required();
  c_stats->add_option("--vocab", vocab, "Operation vocabulary size")->capture_default_str();

  std::string genotype_path, config_path, format, out_path, run_dir;
  std::optional<std::uint64_t> eval_seed;
  auto* c_eval = app.add_subcommand("eval", "Contrastive loss of one genotype");
  c_eval->add_option("--genotype", genotype_path, "Genotype JSON")->required();
  c_eval->add_option("--config", config_path, "Config file")->required();
  c_eval->add_option("--seed", eval_seed, "Evaluation seed (overrides the file)");

  auto* c_export = app.add_subcommand("export", "Render a genotype as DOT or JSON");
  c_export->add_option("--genotype", genotype_path, "Genotype JSON")->required();
  c_export->add_option("--format", format, "dot or json")->required();
  c_export->add_option("--out", out_path, "Output file (default: stdout)");

  auto* c_history = app.add_subcommand("history", "Best-so-far curve and loss quantiles of a run");
  c_history->add_option("--run", run_dir, "Run directory")->required();
  c_history->add_option("--out", out_path, "Curve CSV file (default: stdout)");

  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> compare_iterations;
  auto* c_compare = app.add_subcommand("compare", "Paired TPE vs random search over several seeds");
  c_compare->add_option("--config", config_path, "Config file")->required();
  c_compare->add_option("--seeds", seeds, "Seeds, comma separated")->required()->delimiter(',');
  c_compare->add_option("--iterations", compare_iterations, "Trial budget (overrides tpe.iterations)");
  c_compare->add_option("--out", out_path, "Report file (default: stdout)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (show_version) {
      out << version_line() << "\n";
      return kExitOk;
    }
    if (c_search->parsed()) return cmd_search(search, out);
    if (c_stats->parsed()) return cmd_space_stats(n, vocab, out);
    if (c_eval->parsed()) return cmd_eval(genotype_path, config_path, eval_seed, out);
    if (c_export->parsed()) return cmd_export(genotype_path, format, out_path, out);
    if (c_history->parsed()) return cmd_history(run_dir, out_path, out);
    if (c_compare->parsed()) return cmd_compare(config_path, seeds, compare_iterations, out_path, out);
    out << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "csnas: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidSpaceError& e) {
    err << "csnas: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "csnas: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace csnas::cli
