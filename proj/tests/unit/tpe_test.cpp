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
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <gtest/gtest.h>

#include "csnas/errors.hpp"

namespace csnas {
namespace {

TrialRecord record(std::size_t index, double loss, std::vector<int> theta = {0}) {
  TrialRecord r;
  r.index = index;
  r.loss = loss;
  r.theta = std::move(theta);
  return r;
}

TrialRecord failed(std::size_t index, std::vector<int> theta = {0}) {
  TrialRecord r = record(index, std::nan(""), std::move(theta));
  r.status = TrialStatus::failed;
  return r;
}

std::vector<double> losses_of(const std::vector<TrialRecord>& rs) {
  std::vector<double> out;
  for (const auto& r : rs) out.push_back(r.loss);
  return out;
}

std::vector<std::size_t> indices_of(const std::vector<TrialRecord>& rs) {
  std::vector<std::size_t> out;
  for (const auto& r : rs) out.push_back(r.index);
  return out;
}

TEST(TrialHistory, AppendEnforcesOrderAndFiniteLoss) {
  TrialHistory h;
  h.append(record(0, 1.0));
  EXPECT_THROW(h.append(record(2, 1.0)), std::invalid_argument);
  EXPECT_THROW(h.append(record(1, INFINITY)), std::invalid_argument);
  h.append(failed(1));
  EXPECT_EQ(h.size(), 2u);
}

TEST(TrialHistory, BestPrefersEarliestOnTies) {
  TrialHistory h;
  h.append(failed(0));
  h.append(record(1, 3.0));
  h.append(record(2, 2.0));
  h.append(record(3, 2.0));
  ASSERT_TRUE(h.best());
  EXPECT_EQ(h.best()->index, 2u);
  const auto curve = h.best_so_far();
  EXPECT_TRUE(std::isnan(curve[0]));
  EXPECT_EQ((std::vector<double>(curve.begin() + 1, curve.end())), (std::vector<double>{3.0, 2.0, 2.0}));
}

TEST(SplitHistory, QuartileOfFour) {
  std::vector<TrialRecord> h = {record(0, 3), record(1, 1), record(2, 4), record(3, 2)};
  const auto s = split_history(h, 0.25);
  EXPECT_EQ(losses_of(s.below), (std::vector<double>{1}));
  EXPECT_EQ(s.threshold, 1.0);
  EXPECT_EQ(s.above.size(), 3u);
}

TEST(SplitHistory, TiesGoToEarlierTrials) {
  std::vector<TrialRecord> h;
  for (std::size_t i = 0; i < 7; ++i) h.push_back(record(i, 5.0));
  const auto s = split_history(h, 0.5);
  EXPECT_EQ(indices_of(s.below), (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(SplitHistory, SortOracleOnRandomLosses) {
  Rng rng(1);
  std::vector<TrialRecord> h;
  for (std::size_t i = 0; i < 1000; ++i) h.push_back(record(i, rng.normal()));
  const auto s = split_history(h, 0.2);
  ASSERT_EQ(s.below.size(), 200u);
  auto sorted = losses_of(h);
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(losses_of(s.below), std::vector<double>(sorted.begin(), sorted.begin() + 200));
  const double worst_below = std::max_element(s.below.begin(), s.below.end(), [](auto& a, auto& b) {
                               return a.loss < b.loss;
                             })->loss;
  for (const auto& r : s.above) EXPECT_LE(worst_below, r.loss);
  EXPECT_EQ(s.threshold, sorted[199]);
}

TEST(SplitHistory, FailedTrialsExcluded) {
  std::vector<TrialRecord> h = {failed(0), record(1, 2.0), failed(2), record(3, 1.0)};
  const auto s = split_history(h, 0.5);
  EXPECT_EQ(indices_of(s.below), (std::vector<std::size_t>{3}));
  EXPECT_EQ(indices_of(s.above), (std::vector<std::size_t>{1}));
  EXPECT_THROW(split_history(std::vector<TrialRecord>{failed(0)}, 0.5), DegenerateInputError);
  EXPECT_THROW(split_history(std::vector<TrialRecord>{}, 0.5), DegenerateInputError);
}

TEST(FitDensity, EmptyIsUniform) {
  const auto d = fit_density({}, 5, 8, 1.0);
  for (std::size_t i = 0; i < 5; ++i)
    for (int c = 0; c < 8; ++c) EXPECT_DOUBLE_EQ(d.prob(i, c), 1.0 / 8);
}

TEST(FitDensity, AddOneSmoothing) {
  std::vector<TrialRecord> rs;
  for (std::size_t i = 0; i < 10; ++i) rs.push_back(record(i, 0.0, {3, static_cast<int>(i % 8)}));
  const auto d = fit_density(rs, 2, 8, 1.0);
  EXPECT_DOUBLE_EQ(d.prob(0, 3), 11.0 / 18);
  for (int c = 0; c < 8; ++c) {
    if (c != 3) EXPECT_DOUBLE_EQ(d.prob(0, c), 1.0 / 18);
  }
}

TEST(FitDensity, NormalizedAndPositive) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto n = rng.uniform_index(30);
    const double prior = 0.1 + rng.uniform01();
    std::vector<TrialRecord> rs;
    for (std::size_t i = 0; i < n; ++i) rs.push_back(record(i, 0.0, random_theta(6, 8, rng)));
    const auto d = fit_density(rs, 6, 8, prior);
    for (std::size_t i = 0; i < 6; ++i) {
      double sum = 0.0;
      for (int c = 0; c < 8; ++c) {
        sum += d.prob(i, c);
        EXPECT_GE(d.prob(i, c), prior / (static_cast<double>(n) + prior * 8) * (1 - 1e-15));
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

ParzenModel one_dim_model(double l, double g) {
  ParzenModel m{0.25, 0.0, CategoricalDensity(1, 8), CategoricalDensity(1, 8)};
  m.below.prob(0, 0) = l;
  m.above.prob(0, 0) = g;
  return m;
}

TEST(EiScore, EqualDensitiesScoreOne) {
  const auto m = one_dim_model(0.3, 0.3);
  EXPECT_DOUBLE_EQ(ei_score(std::vector<int>{0}, m), 1.0);
}

TEST(EiScore, RatioThree) {
  const auto m = one_dim_model(0.1, 0.3);
  EXPECT_NEAR(ei_score(std::vector<int>{0}, m), 0.4, 1e-15);
}

std::vector<TrialRecord> random_history(Rng& rng, std::size_t n, std::size_t dims) {
  std::vector<TrialRecord> h;
  for (std::size_t i = 0; i < n; ++i) {
    auto theta = random_theta(dims, 8, rng);
    const double loss = theta[0] + 0.5 * theta[1] + rng.uniform01();
    h.push_back(record(i, loss, std::move(theta)));
  }
  return h;
}

TEST(EiScore, RankingMatchesDensityRatio) {
  Rng rng(3);
  const std::size_t dims = 10;
  const auto model = fit_parzen(random_history(rng, 60, dims), 0.25, dims, 8, 1.0);
  std::vector<std::vector<int>> thetas;
  for (int i = 0; i < 1000; ++i) thetas.push_back(random_theta(dims, 8, rng));
  auto ratio = [&](const std::vector<int>& t) {
    long double l = 1, g = 1;
    for (std::size_t d = 0; d < dims; ++d) {
      l *= model.below.prob(d, t[d]);
      g *= model.above.prob(d, t[d]);
    }
    return l / g;
  };
  std::vector<std::size_t> by_ei(thetas.size()), by_ratio(thetas.size());
  std::iota(by_ei.begin(), by_ei.end(), 0);
  std::iota(by_ratio.begin(), by_ratio.end(), 0);
  std::stable_sort(by_ei.begin(), by_ei.end(),
                   [&](auto a, auto b) { return ei_score(thetas[a], model) > ei_score(thetas[b], model); });
  std::stable_sort(by_ratio.begin(), by_ratio.end(),
                   [&](auto a, auto b) { return ratio(thetas[a]) > ratio(thetas[b]); });
  // Equal scores can differ in the last bit; compare the ratio sequence.
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    EXPECT_NEAR(static_cast<double>(ratio(thetas[by_ei[k]]) / ratio(thetas[by_ratio[k]])), 1.0, 1e-9);
  }
}

TEST(EiScore, InvariantUnderIncreasingLossTransform) {
  Rng rng(4);
  auto h = random_history(rng, 40, 6);
  const auto m1 = fit_parzen(h, 0.25, 6, 8, 1.0);
  for (auto& r : h) r.loss = 2 * r.loss + 7;
  const auto m2 = fit_parzen(h, 0.25, 6, 8, 1.0);
  for (int i = 0; i < 200; ++i) {
    const auto t = random_theta(6, 8, rng);
    EXPECT_EQ(ei_score(t, m1), ei_score(t, m2));
  }
}

TEST(Suggest, StartupIsUniformRandom) {
  TpeConfig cfg;
  Rng a(5), b(5);
  EXPECT_EQ(suggest({}, 10, cfg, a), random_theta(10, 8, b));
}

TEST(Suggest, Deterministic) {
  Rng rng(6);
  const auto h = random_history(rng, 30, 8);
  TpeConfig cfg;
  cfg.n_candidates = 500;
  Rng a(9), b(9);
  EXPECT_EQ(suggest(h, 8, cfg, a), suggest(h, 8, cfg, b));
}

TEST(Suggest, FavoursCodesOfGoodTrials) {
  Rng rng(7);
  std::vector<TrialRecord> h;
  for (std::size_t i = 0; i < 40; ++i) {
    auto theta = random_theta(4, 8, rng);
    const bool good = i % 4 == 0;
    if (good) theta[0] = 2;
    else if (theta[0] == 2) theta[0] = 3;
    h.push_back(record(i, good ? 0.0 : 1.0 + rng.uniform01(), std::move(theta)));
  }
  TpeConfig cfg;
  cfg.n_candidates = 200;
  int hits = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng r(s);
    hits += suggest(h, 4, cfg, r)[0] == 2;
  }
  EXPECT_GT(hits / 200.0, 1.0 / 8);
  EXPECT_GT(hits / 200.0, fit_parzen(h, 0.25, 4, 8, 1.0).below.prob(0, 2));
}

TEST(Suggest, ArgmaxReturnsBestCandidate) {
  Rng rng(8);
  const auto h = random_history(rng, 30, 5);
  TpeConfig cfg;
  cfg.n_candidates = 300;
  cfg.selection = Selection::argmax;
  const auto model = fit_parzen(h, cfg.gamma, 5, 8, 1.0);
  Rng r1(3), r2(3);
  const auto chosen = suggest(h, 5, cfg, r1);
  double best = -INFINITY;
  for (std::size_t i = 0; i < cfg.n_candidates; ++i) best = std::max(best, log_ratio(model.below.sample(r2), model));
  EXPECT_EQ(log_ratio(chosen, model), best);
}

TEST(TpeConfig, Validation) {
  TpeConfig c;
  c.gamma = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.workers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.top_fraction = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TrialOutcome separable(std::span<const int> theta, std::uint64_t) {
  double s = 0.0;
  for (int c : theta) s += c == 3 ? 0.0 : 1.0;
  return {true, s, {}};
}

TEST(RunSmbo, SingleIteration) {
  TpeConfig cfg;
  cfg.iterations = 1;
  TrialHistory h;
  run_smbo(separable, 6, cfg, 1, h);
  ASSERT_EQ(h.size(), 1u);
  Rng rng(suggestion_seed(1, 0));
  EXPECT_EQ(h[0].theta, random_theta(6, 8, rng));
  EXPECT_EQ(h[0].seed, trial_seed(1, 0));
}

TEST(RunSmbo, FailuresAreRecordedAndSkipped) {
  TpeConfig cfg;
  cfg.iterations = 30;
  cfg.n_startup = 5;
  cfg.n_candidates = 100;
  std::size_t callbacks = 0;
  TrialHistory h;
  run_smbo(
      [](std::span<const int> theta, std::uint64_t) -> TrialOutcome {
        if (theta[0] == 0) throw std::runtime_error("boom");
        if (theta[0] == 1) return {false, 0.0, "declined"};
        return separable(theta, 0);
      },
      4, cfg, 2, h, [&](const TrialHistory& hist, const TrialRecord& r) {
        EXPECT_EQ(r.index, hist.size() - 1);
        ++callbacks;
      });
  EXPECT_EQ(h.size(), 30u);
  EXPECT_EQ(callbacks, 30u);
  for (const auto& r : h.records()) {
    if (r.theta[0] == 0) {
      EXPECT_FALSE(r.ok());
      EXPECT_EQ(r.error, "boom");
    }
    if (!r.ok()) EXPECT_TRUE(std::isnan(r.loss));
  }
  const auto curve = h.best_so_far();
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (!std::isnan(curve[i - 1])) EXPECT_LE(curve[i], curve[i - 1]);
  }
}

bool same_trials(const TrialHistory& a, const TrialHistory& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].theta != b[i].theta || a[i].seed != b[i].seed || a[i].status != b[i].status) return false;
    if (a[i].ok() && a[i].loss != b[i].loss) return false;
  }
  return true;
}

TEST(RunSmbo, ResumeFromAnyPrefixMatches) {
  TpeConfig cfg;
  cfg.iterations = 40;
  cfg.n_startup = 10;
  cfg.n_candidates = 200;
  TrialHistory full;
  run_smbo(separable, 6, cfg, 3, full);
  for (std::size_t k : {1u, 10u, 23u}) {
    TrialHistory part;
    for (std::size_t i = 0; i < k; ++i) part.append(full[i]);
    run_smbo(separable, 6, cfg, 3, part);
    EXPECT_TRUE(same_trials(full, part)) << "resumed after " << k;
  }
}

TEST(RunSmbo, AllStartupEqualsRandomSearch) {
  TpeConfig cfg;
  cfg.iterations = 25;
  cfg.n_startup = 25;
  TrialHistory h;
  run_smbo(separable, 6, cfg, 4, h);
  for (std::size_t i = 0; i < h.size(); ++i) {
    Rng rng(suggestion_seed(4, i));
    EXPECT_EQ(h[i].theta, random_theta(6, 8, rng));
  }
}

TEST(RunSmbo, BatchesUsePrefixModel) {
  TpeConfig cfg;
  cfg.iterations = 26;
  cfg.n_startup = 8;
  cfg.n_candidates = 100;
  cfg.workers = 4;
  TrialHistory h;
  run_smbo(separable, 5, cfg, 5, h);
  ASSERT_EQ(h.size(), 26u);
  for (std::size_t i = 0; i < h.size(); ++i) {
    Rng rng(suggestion_seed(5, i));
    const auto prefix = h.records().first(i / 4 * 4);
    EXPECT_EQ(h[i].theta, suggest(prefix, 5, cfg, rng)) << "trial " << i;
  }
  TrialHistory again;
  run_smbo(separable, 5, cfg, 5, again);
  EXPECT_TRUE(same_trials(h, again));
}

}  // namespace
}  // namespace csnas
