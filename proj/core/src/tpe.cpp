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

#include "csnas/tpe.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "csnas/errors.hpp"

namespace csnas {

std::string_view status_name(TrialStatus s) noexcept { return s == TrialStatus::ok ? "ok" : "failed"; }

void TrialHistory::append(TrialRecord record) {
  if (record.index != records_.size()) {
    throw std::invalid_argument("trial history: expected index " + std::to_string(records_.size()) + ", got " +
                                std::to_string(record.index));
  }
  if (record.ok() && !std::isfinite(record.loss)) {
    throw std::invalid_argument("trial history: successful trial with non-finite loss");
  }
  records_.push_back(std::move(record));
}

std::optional<TrialRecord> TrialHistory::best() const {
  const TrialRecord* best = nullptr;
  for (const auto& r : records_) {
    if (r.ok() && (best == nullptr || r.loss < best->loss)) best = &r;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

std::vector<double> TrialHistory::best_so_far() const {
  std::vector<double> out;
  out.reserve(records_.size());
  double cur = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : records_) {
    if (r.ok() && (std::isnan(cur) || r.loss < cur)) cur = r.loss;
    out.push_back(cur);
  }
  return out;
}

CategoricalDensity::CategoricalDensity(std::size_t dims, int vocab)
    : dims_(dims), vocab_(vocab), probs_(dims * static_cast<std::size_t>(vocab), 1.0 / vocab) {
  if (vocab < 1) throw ConfigError("space.vocab", "must be >= 1");
}

double CategoricalDensity::log_prob(std::span<const int> theta) const {
  double s = 0.0;
  for (std::size_t d = 0; d < dims_; ++d) s += std::log(prob(d, theta[d]));
  return s;
}

std::vector<int> CategoricalDensity::sample(Rng& rng) const {
  std::vector<int> theta(dims_);
  for (std::size_t d = 0; d < dims_; ++d) {
    const double u = rng.uniform01();
    double acc = 0.0;
    int c = vocab_ - 1;
    for (int k = 0; k < vocab_; ++k) {
      acc += prob(d, k);
      if (u < acc) {
        c = k;
        break;
      }
    }
    theta[d] = c;
  }
  return theta;
}

CategoricalDensity fit_density(std::span<const TrialRecord> records, std::size_t dims, int vocab,
                               double prior_weight) {
  if (!(prior_weight > 0.0)) throw ConfigError("tpe.prior_weight", "must be > 0");
  CategoricalDensity density(dims, vocab);
  std::vector<double> counts(dims * static_cast<std::size_t>(vocab), 0.0);
  for (const auto& r : records) {
    if (r.theta.size() != dims) throw EncodingError("trial theta has the wrong length", r.theta.size());
    for (std::size_t d = 0; d < dims; ++d) {
      const int c = r.theta[d];
      if (c < 0 || c >= vocab) throw EncodingError("trial theta code out of range", d);
      counts[d * static_cast<std::size_t>(vocab) + c] += 1.0;
    }
  }
  const double denom = static_cast<double>(records.size()) + prior_weight * vocab;
  for (std::size_t d = 0; d < dims; ++d) {
    for (int c = 0; c < vocab; ++c) {
      density.prob(d, c) = (counts[d * static_cast<std::size_t>(vocab) + c] + prior_weight) / denom;
    }
  }
  return density;
}

HistorySplit split_history(std::span<const TrialRecord> records, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("tpe.gamma", "must lie in (0, 1)");
  std::vector<TrialRecord> ok;
  for (const auto& r : records) {
    if (r.ok()) ok.push_back(r);
  }
  if (ok.empty()) throw DegenerateInputError("split_history: no successful trials");
  std::stable_sort(ok.begin(), ok.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return a.loss < b.loss || (a.loss == b.loss && a.index < b.index);
  });
  const auto n = ok.size();
  auto n_below = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n) - 1e-9));
  n_below = std::clamp<std::size_t>(n_below, 1, n);
  HistorySplit split;
  split.below.assign(ok.begin(), ok.begin() + static_cast<std::ptrdiff_t>(n_below));
  split.above.assign(ok.begin() + static_cast<std::ptrdiff_t>(n_below), ok.end());
  split.threshold = split.below.back().loss;
  return split;
}

ParzenModel fit_parzen(std::span<const TrialRecord> records, double gamma, std::size_t dims, int vocab,
                       double prior_weight) {
  auto split = split_history(records, gamma);
  return ParzenModel{gamma, split.threshold, fit_density(split.below, dims, vocab, prior_weight),
                     fit_density(split.above, dims, vocab, prior_weight)};
}

double log_ratio(std::span<const int> theta, const ParzenModel& model) {
  return model.below.log_prob(theta) - model.above.log_prob(theta);
}

double ei_score(std::span<const int> theta, const ParzenModel& model) {
  const double g = model.gamma;
  return 1.0 / (g + (1.0 - g) * std::exp(-log_ratio(theta, model)));
}

void TpeConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("tpe.gamma", "must lie in (0, 1)");
  if (n_candidates < 1) throw ConfigError("tpe.n_candidates", "must be >= 1");
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw ConfigError("tpe.top_fraction", "must lie in (0, 1]");
  if (!(prior_weight > 0.0)) throw ConfigError("tpe.prior_weight", "must be > 0");
  if (iterations < 1) throw ConfigError("tpe.iterations", "must be >= 1");
  if (workers < 1) throw ConfigError("tpe.workers", "must be >= 1");
  if (vocab < 1) throw ConfigError("space.vocab", "must be >= 1");
}

std::vector<int> random_theta(std::size_t dims, int vocab, Rng& rng) {
  std::vector<int> theta(dims);
  for (auto& c : theta) c = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(vocab)));
  return theta;
}

std::vector<int> suggest(std::span<const TrialRecord> history, std::size_t dims, const TpeConfig& config,
                         Rng& rng) {
  const bool any_ok = std::any_of(history.begin(), history.end(), [](const TrialRecord& r) { return r.ok(); });
  if (history.size() < config.n_startup || !any_ok) return random_theta(dims, config.vocab, rng);

  const auto model = fit_parzen(history, config.gamma, dims, config.vocab, config.prior_weight);
  // Log-density tables so scoring a candidate is dims additions.
  std::vector<double> log_diff(dims * static_cast<std::size_t>(config.vocab));
  for (std::size_t d = 0; d < dims; ++d) {
    for (int c = 0; c < config.vocab; ++c) {
      log_diff[d * static_cast<std::size_t>(config.vocab) + c] =
          std::log(model.below.prob(d, c)) - std::log(model.above.prob(d, c));
    }
  }
  const auto n = config.n_candidates;
  std::vector<std::vector<int>> candidates;
  std::vector<std::pair<double, std::size_t>> ranked;
  candidates.reserve(n);
  ranked.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto theta = model.below.sample(rng);
    double s = 0.0;
    for (std::size_t d = 0; d < dims; ++d) s += log_diff[d * static_cast<std::size_t>(config.vocab) + theta[d]];
    ranked.emplace_back(s, i);
    candidates.push_back(std::move(theta));
  }
  auto keep = static_cast<std::size_t>(std::ceil(config.top_fraction * static_cast<double>(n) - 1e-9));
  if (config.selection == Selection::argmax) keep = 1;
  keep = std::clamp<std::size_t>(keep, 1, n);
  const auto by_score = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(), by_score);
  const auto pick = keep == 1 ? 0 : rng.uniform_index(keep);
  return std::move(candidates[ranked[pick].second]);
}

std::uint64_t suggestion_seed(std::uint64_t master_seed, std::size_t trial) {
  return derive_seed(master_seed, {1, trial});
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial) { return derive_seed(master_seed, {2, trial}); }

namespace {

TrialRecord evaluate_trial(const Objective& objective, std::size_t index, std::vector<int> theta,
                           std::uint64_t seed) {
  TrialRecord rec;
  rec.index = index;
  rec.seed = seed;
  rec.theta = std::move(theta);
  const auto start = std::chrono::steady_clock::now();
  TrialOutcome out;
  try {
    out = objective(rec.theta, seed);
  } catch (const std::exception& e) {
    out = {false, 0.0, e.what()};
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (out.ok && !std::isfinite(out.loss)) out = {false, 0.0, "non-finite loss"};
  rec.status = out.ok ? TrialStatus::ok : TrialStatus::failed;
  rec.loss = out.ok ? out.loss : std::numeric_limits<double>::quiet_NaN();
  rec.error = std::move(out.error);
  return rec;
}

}  // namespace

void run_smbo(const Objective& objective, std::size_t dims, const TpeConfig& config, std::uint64_t master_seed,
              TrialHistory& history, const TrialCallback& on_trial) {
  config.validate();
  const std::size_t W = config.workers;
  while (history.size() < config.iterations) {
    const std::size_t first = history.size();
    const std::size_t batch_start = first / W * W;
    const std::size_t batch_end = std::min(batch_start + W, config.iterations);
    const auto prefix = history.records().first(batch_start);

    std::vector<std::vector<int>> thetas;
    for (std::size_t i = first; i < batch_end; ++i) {
      Rng rng(suggestion_seed(master_seed, i));
      thetas.push_back(suggest(prefix, dims, config, rng));
    }
    std::vector<TrialRecord> done(thetas.size());
    if (thetas.size() == 1) {
      done[0] = evaluate_trial(objective, first, std::move(thetas[0]), trial_seed(master_seed, first));
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < thetas.size(); ++k) {
        pool.emplace_back([&, k] {
          done[k] = evaluate_trial(objective, first + k, std::move(thetas[k]), trial_seed(master_seed, first + k));
        });
      }
      for (auto& t : pool) t.join();
    }
    for (auto& rec : done) {
      history.append(std::move(rec));
      if (on_trial) on_trial(history, history[history.size() - 1]);
    }
  }
}

}  // namespace csnas
