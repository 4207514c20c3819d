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

#include "csnas/contrastive_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "csnas/errors.hpp"

namespace csnas {

namespace {

double norm2(std::span<const double> u) {
  double s = 0.0;
  for (double x : u) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("temperature", "must be positive and finite");
}

// log(exp(head) + sum exp(rest))
double log_sum_exp(double head, std::span<const double> rest) {
  double mx = head;
  for (double x : rest) mx = std::max(mx, x);
  double s = std::exp(head - mx);
  for (double x : rest) s += std::exp(x - mx);
  return mx + std::log(s);
}

// log(exp(head) + sum exp(rest)) - head, without cancellation when head
// dominates.
double log_sum_exp_over_head(double head, std::span<const double> rest) {
  double mx = head;
  for (double x : rest) mx = std::max(mx, x);
  double tail = 0.0;
  for (double x : rest) tail += std::exp(x - mx);
  if (mx == head) return std::log1p(tail);
  return mx - head + std::log(std::exp(head - mx) + tail);
}

double log_sum_exp(std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

// Unit vectors and norms for `rows` consecutive vectors of length `dim`.
struct Normalized {
  std::vector<double> unit;
  std::vector<double> norm;
};

Normalized normalize_rows(std::span<const double> data, std::size_t rows, std::size_t dim,
                          const char* what) {
  Normalized out{std::vector<double>(rows * dim), std::vector<double>(rows)};
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = data.subspan(r * dim, dim);
    const double n = norm2(row);
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw DegenerateInputError(std::string(what) + " row " + std::to_string(r) +
                                 " has zero or non-finite norm");
    }
    out.norm[r] = n;
    for (std::size_t d = 0; d < dim; ++d) out.unit[r * dim + d] = row[d] / n;
  }
  return out;
}

// Gradient w.r.t. u from a gradient w.r.t. u/|u|.
void unnormalize_grad(std::span<const double> d_unit, std::span<const double> unit, double norm,
                      std::span<double> d_raw) {
  const double proj = dot(d_unit, unit);
  for (std::size_t d = 0; d < unit.size(); ++d) d_raw[d] += (d_unit[d] - proj * unit[d]) / norm;
}

}  // namespace

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("cosine_similarity: dimension mismatch");
  const double nu = norm2(u);
  const double nv = norm2(v);
  if (!(nu > 0.0) || !(nv > 0.0)) throw DegenerateInputError("cosine_similarity: zero-norm vector");
  const double s = dot(u, v) / (nu * nv);
  return std::clamp(s, -1.0, 1.0);
}

double nce_estimator(std::span<const double> z, std::span<const double> z_t,
                     std::span<const Embedding> negatives, double tau) {
  check_tau(tau);
  const double pos = cosine_similarity(z, z_t) / tau;
  if (negatives.empty()) return 1.0;
  std::vector<double> noise(negatives.size());
  for (std::size_t k = 0; k < negatives.size(); ++k) noise[k] = cosine_similarity(z_t, negatives[k]) / tau;
  return std::exp(pos - log_sum_exp(pos, noise));
}

double nce_loss(std::span<const double> z, std::span<const double> z_t,
                std::span<const Embedding> negatives, double tau) {
  check_tau(tau);
  const std::size_t n = negatives.size();
  const double pos = cosine_similarity(z, z_t) / tau;
  std::vector<double> b(n);
  for (std::size_t k = 0; k < n; ++k) b[k] = cosine_similarity(z_t, negatives[k]) / tau;
  double loss = log_sum_exp_over_head(pos, b);

  // l(z_t, z'_k): positive s(z_t, z'_k), noise s(z'_k, z'') over the same set.
  std::vector<double> c(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t q = 0; q < n; ++q) c[q] = cosine_similarity(negatives[k], negatives[q]) / tau;
    // -log(1 - l) = log(1 + exp(b_k) / sum exp(c)).
    const double log_ratio = b[k] - log_sum_exp(c);
    const double neg_log_one_minus =
        log_ratio > 0.0 ? log_ratio + std::log1p(std::exp(-log_ratio)) : std::log1p(std::exp(log_ratio));
    if (!std::isfinite(neg_log_one_minus)) {
      throw NumericalFault("nce_loss: negative estimator saturated at 1");
    }
    loss += neg_log_one_minus;
  }
  if (!std::isfinite(loss)) throw NumericalFault("nce_loss: non-finite loss");
  return loss;
}

double final_loss(std::span<const double> r_x, std::span<const double> z, std::span<const double> z_t,
                  std::span<const Embedding> negatives, double tau, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("blend", "must lie in [0, 1]");
  return lambda * nce_loss(r_x, z_t, negatives, tau) + (1.0 - lambda) * nce_loss(r_x, z, negatives, tau);
}

MemoryBank::MemoryBank(std::size_t dim, double momentum) : dim_(dim), momentum_(momentum) {
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw ConfigError("bank_momentum", "must lie in [0, 1]");
  if (dim == 0) throw ConfigError("proj_dim", "must be positive");
}

const Embedding* MemoryBank::find(std::uint64_t id) const {
  const auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

void MemoryBank::update(std::uint64_t id, std::span<const double> z) {
  if (z.size() != dim_) {
    throw ShapeError("memory bank: embedding has dimension " + std::to_string(z.size()) + ", expected " +
                     std::to_string(dim_));
  }
  auto [it, inserted] = entries_.try_emplace(id, z.begin(), z.end());
  if (inserted) return;
  auto& r = it->second;
  for (std::size_t d = 0; d < dim_; ++d) r[d] = momentum_ * r[d] + (1.0 - momentum_) * z[d];
}

void MemoryBank::apply(std::vector<std::pair<std::uint64_t, Embedding>> staged) {
  std::stable_sort(staged.begin(), staged.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [id, z] : staged) update(id, z);
}

void ContrastiveBatch::validate() const {
  const std::size_t k = size();
  if (k == 0) throw ConfigError("batch_size", "empty contrastive batch");
  if (views == 0) throw ConfigError("views", "must be positive");
  if (dim == 0) throw ConfigError("proj_dim", "must be positive");
  if (anchors.size() != k * dim) throw ConfigError("batch", "anchor buffer does not match K x p");
  if (targets.size() != k * dim) throw ConfigError("batch", "target buffer does not match K x p");
  if (view_projections.size() != k * views * dim) {
    throw ConfigError("batch", "negative-set size mismatch: view buffer does not match K x M x p");
  }
  check_tau(temperature);
  if (!(blend >= 0.0 && blend <= 1.0)) throw ConfigError("blend", "must lie in [0, 1]");
}

BatchLossGrad evaluate_batch(const ContrastiveBatch& batch, const MemoryBank& bank, bool with_gradient) {
  batch.validate();
  const std::size_t K = batch.size();
  const std::size_t M = batch.views;
  const std::size_t P = batch.dim;
  const std::size_t Q = K * M;
  const double tau = batch.temperature;
  const double inv_tau = 1.0 / tau;
  if (bank.dim() != P) throw ShapeError("memory bank dimension differs from projection dimension");

  std::vector<double> bank_rows(K * P);
  std::vector<bool> in_bank(K);
  for (std::size_t i = 0; i < K; ++i) {
    const Embedding* r = bank.find(batch.ids[i]);
    in_bank[i] = r != nullptr;
    const double* src = r ? r->data() : batch.anchors.data() + i * P;
    std::copy(src, src + P, bank_rows.begin() + static_cast<std::ptrdiff_t>(i * P));
  }
  const Normalized rb = normalize_rows(bank_rows, K, P, "memory bank entry");
  const Normalized za = normalize_rows(batch.anchors, K, P, "anchor projection");
  const Normalized zt = normalize_rows(batch.targets, K, P, "view representation");
  const Normalized vv = normalize_rows(batch.view_projections, Q, P, "view projection");
  auto row = [P](const std::vector<double>& m, std::size_t r) {
    return std::span<const double>(m.data() + r * P, P);
  };

  // E[q][q'] = exp((s(v_q, v_q') - 1) / tau); the diagonal term is exp(0) so
  // every noise sum below is >= 1.
  std::vector<double> expg(Q * Q);
  for (std::size_t q = 0; q < Q; ++q) {
    expg[q * Q + q] = 1.0;
    for (std::size_t q2 = q + 1; q2 < Q; ++q2) {
      const double s = std::clamp(dot(row(vv.unit, q), row(vv.unit, q2)), -1.0, 1.0);
      expg[q * Q + q2] = expg[q2 * Q + q] = std::exp((s - 1.0) * inv_tau);
    }
  }
  std::vector<double> row_sum(Q, 0.0);
  std::vector<double> own(Q * K, 0.0);  // own[q][j] = sum_m E[q][j*M+m]
  for (std::size_t q = 0; q < Q; ++q) {
    for (std::size_t q2 = 0; q2 < Q; ++q2) {
      row_sum[q] += expg[q * Q + q2];
      own[q * K + q2 / M] += expg[q * Q + q2];
    }
  }

  BatchLossGrad out;
  out.per_anchor.assign(K, 0.0);
  std::vector<double> du_anchor, du_target, du_view, coef;
  if (with_gradient) {
    du_anchor.assign(K * P, 0.0);
    du_target.assign(K * P, 0.0);
    du_view.assign(Q * P, 0.0);
    coef.assign(K * Q, 0.0);  // coef[i][q]: weight of E[q][.] row terms for anchor i
  }

  std::vector<double> b(Q);
  std::vector<double> weights(Q);
  for (std::size_t i = 0; i < K; ++i) {
    const auto r_hat = row(rb.unit, i);
    for (int term = 0; term < 2; ++term) {
      const double w = term == 0 ? batch.blend : 1.0 - batch.blend;
      const auto& bmat = term == 0 ? zt : za;
      const auto b_hat = row(bmat.unit, i);
      const double a = std::clamp(dot(r_hat, b_hat), -1.0, 1.0) * inv_tau;

      double mx = a;
      for (std::size_t q = 0; q < Q; ++q) {
        if (q / M == i) continue;
        b[q] = std::clamp(dot(b_hat, row(vv.unit, q)), -1.0, 1.0) * inv_tau;
        mx = std::max(mx, b[q]);
      }
      double tail = 0.0;
      for (std::size_t q = 0; q < Q; ++q) {
        if (q / M != i) tail += std::exp(b[q] - mx);
      }
      const double z_sum = std::exp(a - mx) + tail;
      double loss = mx == a ? std::log1p(tail) : mx - a + std::log(z_sum);

      // Negative terms: -log(1 - l(b, v_q)) = log1p(e^{B_q - 1/tau} / S_q).
      for (std::size_t q = 0; q < Q; ++q) {
        if (q / M == i) continue;
        const double s_q = row_sum[q] - own[q * K + i];
        const double e_b = std::exp(b[q] - inv_tau);
        loss += std::log1p(e_b / s_q);
        if (with_gradient) {
          weights[q] = e_b / (e_b + s_q);  // l(b, v_q)
          coef[i * Q + q] += w * (1.0 / (e_b + s_q) - 1.0 / s_q);
        }
      }
      if (!std::isfinite(loss)) throw NumericalFault("contrastive batch loss is not finite");
      out.per_anchor[i] += w * loss;

      if (!with_gradient) continue;
      // d loss / d a = -1 + softmax(a); d loss / d B_q = softmax(B_q) + l(b, v_q).
      const double scale = w * inv_tau / static_cast<double>(K);
      auto db = std::span<double>((term == 0 ? du_target : du_anchor).data() + i * P, P);
      const double da = std::exp(a - mx) / z_sum - 1.0;
      for (std::size_t d = 0; d < P; ++d) db[d] += scale * da * r_hat[d];
      if (!in_bank[i]) {
        // r_x is the fresh anchor itself.
        auto dr = std::span<double>(du_anchor.data() + i * P, P);
        for (std::size_t d = 0; d < P; ++d) dr[d] += scale * da * b_hat[d];
      }
      for (std::size_t q = 0; q < Q; ++q) {
        if (q / M == i) continue;
        const double dbq = scale * (std::exp(b[q] - mx) / z_sum + weights[q]);
        const auto v_hat = row(vv.unit, q);
        auto dv = std::span<double>(du_view.data() + q * P, P);
        for (std::size_t d = 0; d < P; ++d) {
          db[d] += dbq * v_hat[d];
          dv[d] += dbq * b_hat[d];
        }
      }
    }
  }
  out.mean = std::accumulate(out.per_anchor.begin(), out.per_anchor.end(), 0.0) / static_cast<double>(K);

  if (!with_gradient) return out;

  // View-view similarities: dG[q][q'] = E[q][q'] / tau / K * sum over anchors
  // i whose negative set holds both q and q' of coef[i][q].
  std::vector<double> total(Q, 0.0);
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t q = 0; q < Q; ++q) total[q] += coef[i * Q + q];
  }
  const double gscale = inv_tau / static_cast<double>(K);
  std::vector<double> dgram(Q * Q);
  for (std::size_t q = 0; q < Q; ++q) {
    const std::size_t jq = q / M;
    for (std::size_t q2 = 0; q2 < Q; ++q2) {
      const std::size_t jq2 = q2 / M;
      const double c = jq2 == jq ? total[q] : total[q] - coef[jq2 * Q + q];
      dgram[q * Q + q2] = gscale * expg[q * Q + q2] * c;
    }
  }
  for (std::size_t q = 0; q < Q; ++q) {
    auto dv = std::span<double>(du_view.data() + q * P, P);
    for (std::size_t q2 = 0; q2 < Q; ++q2) {
      const double g = dgram[q * Q + q2] + dgram[q2 * Q + q];
      if (g == 0.0) continue;
      const auto v2 = row(vv.unit, q2);
      for (std::size_t d = 0; d < P; ++d) dv[d] += g * v2[d];
    }
  }

  out.d_anchors.assign(K * P, 0.0);
  out.d_targets.assign(K * P, 0.0);
  out.d_view_projections.assign(Q * P, 0.0);
  for (std::size_t i = 0; i < K; ++i) {
    unnormalize_grad(row(du_anchor, i), row(za.unit, i), za.norm[i],
                     std::span<double>(out.d_anchors.data() + i * P, P));
    unnormalize_grad(row(du_target, i), row(zt.unit, i), zt.norm[i],
                     std::span<double>(out.d_targets.data() + i * P, P));
  }
  for (std::size_t q = 0; q < Q; ++q) {
    unnormalize_grad(row(du_view, q), row(vv.unit, q), vv.norm[q],
                     std::span<double>(out.d_view_projections.data() + q * P, P));
  }
  return out;
}

void commit_to_bank(const ContrastiveBatch& batch, MemoryBank& bank) {
  std::vector<std::pair<std::uint64_t, Embedding>> staged;
  staged.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto first = batch.anchors.begin() + static_cast<std::ptrdiff_t>(i * batch.dim);
    staged.emplace_back(batch.ids[i], Embedding(first, first + static_cast<std::ptrdiff_t>(batch.dim)));
  }
  bank.apply(std::move(staged));
}

BatchLoss batch_loss(const ContrastiveBatch& batch, MemoryBank& bank) {
  auto result = evaluate_batch(batch, bank, false);
  commit_to_bank(batch, bank);
  return BatchLoss{result.mean, std::move(result.per_anchor)};
}

}  // namespace csnas
