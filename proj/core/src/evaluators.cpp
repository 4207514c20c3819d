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

#include "csnas/evaluators.hpp"

#include <cmath>
#include <numeric>

#include "csnas/contrastive_loss.hpp"
#include "csnas/errors.hpp"
#include "csnas/rng.hpp"

namespace csnas {

ContrastiveEvalConfig ContrastiveEvalConfig::from(const RunConfig& c) {
  ContrastiveEvalConfig e;
  e.n_intermediate = c.space.n_intermediate;
  e.encoder = c.encoder_config();
  e.augment = c.data.augment;
  e.epochs = c.evaluator.epochs;
  e.batch_size = c.evaluator.batch_size;
  e.temperature = c.contrastive.temperature;
  e.blend = c.contrastive.blend;
  e.lr = c.evaluator.lr;
  e.momentum = c.evaluator.momentum;
  e.bank_momentum = c.contrastive.bank_momentum;
  return e;
}

ContrastiveEvaluator::ContrastiveEvaluator(std::shared_ptr<const Dataset> data, ContrastiveEvalConfig config)
    : data_(std::move(data)), config_(std::move(config)) {
  if (!data_) throw ConfigError("data", "no dataset");
  if (config_.batch_size < 2) throw ConfigError("evaluator.batch_size", "must be >= 2");
  if (static_cast<std::size_t>(config_.batch_size) > data_->size()) {
    throw ConfigError("evaluator.batch_size", "batch of " + std::to_string(config_.batch_size) +
                                                  " exceeds the dataset (" + std::to_string(data_->size()) +
                                                  " images)");
  }
  if (config_.epochs < 0) throw ConfigError("evaluator.epochs", "must be >= 0");
}

double ContrastiveEvaluator::score(const Genotype& genotype, std::uint64_t seed) const {
  const auto& c = config_;
  MiniNetwork net(genotype, c.encoder, derive_seed(seed, {0}));
  MemoryBank bank(static_cast<std::size_t>(c.encoder.proj_dim), c.bank_momentum);
  MomentumSgd sgd(c.lr, c.momentum);
  const std::size_t n = data_->size();
  const auto K = static_cast<std::size_t>(c.batch_size);
  const std::size_t batches = n / K;
  const auto M = static_cast<std::size_t>(c.encoder.views);

  auto epoch_order = [&](int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {1, static_cast<std::uint64_t>(epoch)}));
    shuffle(order, rng);
    return order;
  };
  auto batch_at = [&](const std::vector<std::size_t>& order, int epoch, std::size_t b) {
    Rng rng(derive_seed(seed, {2, static_cast<std::uint64_t>(epoch), b}));
    const std::span<const std::size_t> pos(order.data() + b * K, K);
    return make_minibatch_from(*data_, pos, M, c.augment, rng);
  };

  if (c.epochs == 0) {
    const auto order = epoch_order(0);
    double total = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      total += net.loss(batch_at(order, 0, b), bank, c.temperature, c.blend);
    }
    return total / static_cast<double>(batches);
  }

  double last = 0.0;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    const auto order = epoch_order(epoch);
    double total = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      auto lg = net.loss_and_gradient(batch_at(order, epoch, b), bank, c.temperature, c.blend);
      if (!std::isfinite(lg.loss)) {
        throw NumericalFault("non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(b),
                             static_cast<int>(c.encoder.layers) + 1);
      }
      sgd.step(net.parameters(), lg.gradients);
      commit_to_bank(lg.batch, bank);
      total += lg.loss;
    }
    bank.advance_epoch();
    last = total / static_cast<double>(batches);
  }
  return last;
}

TrialOutcome ContrastiveEvaluator::evaluate(std::span<const int> theta, std::uint64_t seed) const {
  try {
    const auto g = Genotype::from_theta(config_.n_intermediate, theta);
    return {true, score(g, seed), {}};
  } catch (const NumericalFault& e) {
    return {false, 0.0, std::string("numerical fault: ") + e.what()};
  } catch (const ShapeError& e) {
    return {false, 0.0, std::string("shape error: ") + e.what()};
  } catch (const DegenerateInputError& e) {
    return {false, 0.0, std::string("degenerate embedding: ") + e.what()};
  }
}

TabularEvaluator::TabularEvaluator(std::vector<std::vector<double>> costs, double noise)
    : costs_(std::move(costs)), noise_(noise) {
  if (!(noise_ >= 0.0)) throw ConfigError("evaluator.tabular.noise", "must be >= 0");
}

TabularEvaluator TabularEvaluator::indicator(std::size_t dims, int vocab, int target, double noise) {
  std::vector<std::vector<double>> costs(dims, std::vector<double>(static_cast<std::size_t>(vocab), 1.0));
  for (auto& row : costs) row[static_cast<std::size_t>(target)] = 0.0;
  return TabularEvaluator(std::move(costs), noise);
}

TrialOutcome TabularEvaluator::evaluate(std::span<const int> theta, std::uint64_t seed) const {
  if (theta.size() != costs_.size()) throw EncodingError("theta length differs from the cost table", theta.size());
  double loss = 0.0;
  for (std::size_t d = 0; d < theta.size(); ++d) {
    const auto c = theta[d];
    if (c < 0 || static_cast<std::size_t>(c) >= costs_[d].size()) throw EncodingError("code out of range", d);
    loss += costs_[d][static_cast<std::size_t>(c)];
  }
  if (noise_ > 0.0) {
    Rng rng(seed);
    loss += noise_ * rng.normal();
  }
  return {true, loss, {}};
}

Dataset load_dataset(const RunConfig& config) {
  const auto& d = config.data;
  if (d.source == "cifar10") return load_cifar10_subset(d.path, d.fraction, d.balanced, d.seed);
  auto syn = d.synthetic;
  syn.seed = d.seed;
  return make_synthetic_dataset(syn);
}

std::unique_ptr<Evaluator> make_evaluator(const RunConfig& config, std::shared_ptr<const Dataset> data) {
  const auto& e = config.evaluator;
  if (e.kind == "tabular") {
    if (e.tabular.kind == "table") return std::make_unique<TabularEvaluator>(e.tabular.costs, e.tabular.noise);
    return std::make_unique<TabularEvaluator>(
        TabularEvaluator::indicator(config.dims(), config.space.vocab, e.tabular.target, e.tabular.noise));
  }
  if (!data) data = std::make_shared<const Dataset>(load_dataset(config));
  return std::make_unique<ContrastiveEvaluator>(std::move(data), ContrastiveEvalConfig::from(config));
}

}  // namespace csnas
