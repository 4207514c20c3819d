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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csnas/cell_space.hpp"
#include "csnas/contrastive_loss.hpp"
#include "csnas/data_pipeline.hpp"
#include "csnas/feature_map.hpp"

namespace csnas {

/// How the view representation z^t is formed from the M views.
enum class ViewHead {
  project_then_concat,  // l([g(f(x1)), ..., g(f(xM))])
  concat_features,      // l([f(x1), ..., f(xM)])
};

struct Fraction {
  int num;
  int den;
  friend bool operator==(const Fraction&, const Fraction&) = default;
};

struct EncoderConfig {
  int layers = 8;
  int channels = 32;
  int input_height = 32;
  int input_width = 32;
  int proj_dim = 128;
  int views = 2;
  /// Reduction cells sit at floor(layers * f) for each fraction.
  std::vector<Fraction> reduction_at = {{1, 3}, {2, 3}};
  ViewHead view_head = ViewHead::project_then_concat;
};

struct ParameterTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

/// Flat list of named parameter tensors in construction order.
class ParameterStore {
 public:
  std::size_t add(std::string name, std::vector<std::size_t> shape);
  std::size_t tensor_count() const noexcept { return tensors_.size(); }
  std::size_t scalar_count() const noexcept;
  ParameterTensor& operator[](std::size_t i) { return tensors_[i]; }
  const ParameterTensor& operator[](std::size_t i) const { return tensors_[i]; }
  std::span<const ParameterTensor> tensors() const noexcept { return tensors_; }
  std::span<ParameterTensor> tensors() noexcept { return tensors_; }

  /// Index of the tensor called `name`, or -1.
  int find(std::string_view name) const;

 private:
  std::vector<ParameterTensor> tensors_;
};

/// One gradient buffer per parameter tensor, same order and sizes.
using GradientStore = std::vector<std::vector<double>>;

GradientStore zeros_like(const ParameterStore& params);

/// Projections of one minibatch, laid out as ContrastiveBatch expects.
struct Projections {
  std::size_t batch = 0;
  std::size_t views = 0;
  std::size_t dim = 0;
  std::vector<double> anchors;           // K x p
  std::vector<double> targets;           // K x p
  std::vector<double> view_projections;  // K x M x p
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> per_anchor;
  GradientStore gradients;
  ContrastiveBatch batch;  // for committing anchors to the memory bank
};

/// A genotype instantiated as a small trainable encoder f with affine
/// projection heads g (features -> R^p) and l (M views -> R^p).
///
/// Stem: 3x3 conv to C channels. Cell k reads the outputs of cells k-2 and
/// k-1 through ReLU + 1x1 conv preprocessing (stride 2 when the k-2 output is
/// at twice the resolution of the k-1 output) and concatenates its N
/// intermediate nodes. Channels double at every reduction cell, whose edges
/// leaving the two input nodes use stride 2. The encoder output is the global
/// average of the last cell. No normalization layers.
///
/// Layer numbering for diagnostics: 0 stem, k+1 cell k, L+1 heads.
class MiniNetwork {
 public:
  MiniNetwork(const Genotype& genotype, const EncoderConfig& config, std::uint64_t seed);

  const Genotype& genotype() const noexcept { return genotype_; }
  const EncoderConfig& config() const noexcept { return config_; }
  const std::vector<int>& reduction_cells() const noexcept { return reduction_cells_; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::size_t parameter_count() const noexcept { return params_.scalar_count(); }

  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }

  /// f(x): encoder features before the projection heads.
  std::vector<double> features(const Image& x) const;
  /// g(f(x)).
  std::vector<double> project(const Image& x) const;

  /// z, z^t and per-view projections for a minibatch.
  Projections forward(const Minibatch& batch) const;

  /// Final contrastive loss on `batch` with bank anchors, and d loss / d w
  /// for every parameter. The bank is read, not modified.
  LossAndGradient loss_and_gradient(const Minibatch& batch, const MemoryBank& bank, double temperature,
                                    double blend) const;

  /// Loss only (same value as loss_and_gradient().loss).
  double loss(const Minibatch& batch, const MemoryBank& bank, double temperature, double blend) const;

  void save(const std::filesystem::path& path) const;
  /// Replaces parameter values; names and shapes must match this network.
  void load(const std::filesystem::path& path);

 private:
  struct EdgeModule {
    int src;
    int dst;  // intermediate index
    OperationKind op;
    int stride;
    ConvSpec depthwise;
    ConvSpec pointwise;
    std::size_t dw_param = 0;
    std::size_t pw_param = 0;
  };
  struct CellModule {
    bool reduction = false;
    int channels = 0;
    ConvSpec pre0;
    ConvSpec pre1;
    std::size_t pre0_param = 0;
    std::size_t pre1_param = 0;
    std::vector<EdgeModule> edges;
  };
  struct EdgeCache {
    FeatureMap relu_out;
    FeatureMap dw_out;
  };
  struct CellCache {
    FeatureMap pre0_relu;
    FeatureMap pre1_relu;
    std::vector<FeatureMap> nodes;  // 2 inputs + N intermediates
    std::vector<EdgeCache> edges;
  };
  struct ImageCache {
    FeatureMap input;
    FeatureMap stem;
    std::vector<CellCache> cells;
    std::vector<FeatureMap> outputs;
    std::vector<double> features;
  };

  FeatureMap to_feature_map(const Image& x) const;
  void run_encoder(const Image& x, ImageCache& cache) const;
  void backprop_encoder(const ImageCache& cache, std::span<const double> d_features, GradientStore& grads) const;
  FeatureMap edge_forward(const EdgeModule& e, const FeatureMap& in, EdgeCache& cache) const;
  void edge_backward(const EdgeModule& e, const FeatureMap& in, const EdgeCache& cache, const FeatureMap& grad_out,
                     FeatureMap& grad_in, GradientStore& grads) const;
  std::vector<double> affine(std::size_t w, std::size_t b, std::span<const double> x) const;
  std::size_t head_input_dim() const;

  Genotype genotype_;
  EncoderConfig config_;
  ParameterStore params_;
  std::vector<int> reduction_cells_;
  ConvSpec stem_;
  std::size_t stem_param_ = 0;
  std::vector<CellModule> cells_;
  std::size_t feature_dim_ = 0;
  std::size_t g_w_ = 0, g_b_ = 0, l_w_ = 0, l_b_ = 0;
};

/// Classic momentum SGD: v <- momentum * v + g; w <- w - lr * v.
class MomentumSgd {
 public:
  MomentumSgd(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {}
  void step(ParameterStore& params, const GradientStore& grads);
  const GradientStore& velocity() const noexcept { return velocity_; }

 private:
  double lr_;
  double momentum_;
  GradientStore velocity_;
};

}  // namespace csnas
