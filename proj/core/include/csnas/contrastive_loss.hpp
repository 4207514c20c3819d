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
#include <map>
#include <span>
#include <utility>
#include <vector>

namespace csnas {

/// A representation vector in R^p.
using Embedding = std::vector<double>;

/// s(u, v) = u.v / (|u| |v|). Throws DegenerateInputError on a zero norm.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Probability that (z, z_t) is the matched pair against `negatives`:
///
///   exp(s(z,z_t)/tau) / (exp(s(z,z_t)/tau) + sum_{z'} exp(s(z_t,z')/tau))
///
/// The positive term compares z with z_t while the noise terms compare z_t
/// with each negative. Evaluated with a max shift. Returns 1 when there are
/// no negatives.
double nce_estimator(std::span<const double> z, std::span<const double> z_t,
                     std::span<const Embedding> negatives, double tau);

/// -log l(z, z_t) - sum_{z'} log(1 - l(z_t, z')), where every estimator
/// shares the same negative set.
double nce_loss(std::span<const double> z, std::span<const double> z_t,
                std::span<const Embedding> negatives, double tau);

/// lambda * L(r_x, z_t) + (1 - lambda) * L(r_x, z).
double final_loss(std::span<const double> r_x, std::span<const double> z, std::span<const double> z_t,
                  std::span<const Embedding> negatives, double tau, double lambda);

/// Exponential-moving-average cache of per-sample representations.
///
/// update() sets r <- m r + (1 - m) z; the first observation of an id stores
/// z as is.
class MemoryBank {
 public:
  MemoryBank(std::size_t dim, double momentum);

  std::size_t dim() const noexcept { return dim_; }
  double momentum() const noexcept { return momentum_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(std::uint64_t id) const { return entries_.count(id) != 0; }

  /// nullptr when the id was never observed.
  const Embedding* find(std::uint64_t id) const;

  void update(std::uint64_t id, std::span<const double> z);

  /// Applies staged updates in ascending id order (stable for equal ids).
  void apply(std::vector<std::pair<std::uint64_t, Embedding>> staged);

  int epoch() const noexcept { return epoch_; }
  void advance_epoch() noexcept { ++epoch_; }

 private:
  std::size_t dim_;
  double momentum_;
  int epoch_ = 0;
  std::map<std::uint64_t, Embedding> entries_;
};

/// Projections of one minibatch. Row-major storage:
///   anchors           K x p   z_i, projection of the original image
///   targets           K x p   z_i^t, aggregated view representation
///   view_projections  K x M x p   per-view projections; the in-batch
///                                 negatives of anchor i are the rows of
///                                 every other anchor, M(K-1) in total
struct ContrastiveBatch {
  std::vector<std::uint64_t> ids;
  std::size_t views = 0;
  std::size_t dim = 0;
  std::vector<double> anchors;
  std::vector<double> targets;
  std::vector<double> view_projections;
  double temperature = 0.07;
  double blend = 0.5;

  std::size_t size() const noexcept { return ids.size(); }
  std::size_t negatives_per_anchor() const noexcept { return views * (size() - 1); }
  /// Throws ConfigError when buffer sizes disagree with (K, M, p).
  void validate() const;
};

struct BatchLoss {
  double mean = 0.0;
  std::vector<double> per_anchor;
};

/// Mean-loss gradients w.r.t. the batch buffers (same layouts).
struct BatchLossGrad : BatchLoss {
  std::vector<double> d_anchors;
  std::vector<double> d_targets;
  std::vector<double> d_view_projections;
};

/// Per-anchor final loss with memory-bank anchors, without touching the bank.
/// Ids absent from the bank use the fresh anchor projection as r_x. Bank
/// entries are constants for the gradient.
BatchLossGrad evaluate_batch(const ContrastiveBatch& batch, const MemoryBank& bank,
                             bool with_gradient);

/// Folds each anchor's fresh projection into the bank (ascending id order).
void commit_to_bank(const ContrastiveBatch& batch, MemoryBank& bank);

/// evaluate_batch followed by commit_to_bank.
BatchLoss batch_loss(const ContrastiveBatch& batch, MemoryBank& bank);

}  // namespace csnas
