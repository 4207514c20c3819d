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

#include <cstddef>
#include <span>
#include <vector>

namespace csnas {

/// Single-sample activation tensor, (C, H, W) row-major.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  bool all_finite() const;
  void add(const FeatureMap& o);
};

/// Grouped 2-D convolution without bias. Weight layout
/// [out][in / groups][kernel][kernel]; "same" padding dilation * (k - 1) / 2.
struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int dilation = 1;
  int groups = 1;

  int padding() const noexcept { return dilation * (kernel - 1) / 2; }
  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(out_channels) * (in_channels / groups) * kernel * kernel;
  }
  int fan_in() const noexcept { return (in_channels / groups) * kernel * kernel; }
  int out_size(int n) const noexcept { return (n + 2 * padding() - dilation * (kernel - 1) - 1) / stride + 1; }
};

/// Output side length shared by every stride-s, same-padded operation.
inline int strided_size(int n, int stride) { return (n - 1) / stride + 1; }

FeatureMap conv2d_forward(const FeatureMap& in, std::span<const double> weight, const ConvSpec& spec);
/// Accumulates into grad_in (when non-null) and grad_weight.
void conv2d_backward(const FeatureMap& in, std::span<const double> weight, const ConvSpec& spec,
                     const FeatureMap& grad_out, FeatureMap* grad_in, std::span<double> grad_weight);

FeatureMap relu_forward(const FeatureMap& in);
/// Accumulates grad_out masked by (out > 0) into grad_in.
void relu_backward(const FeatureMap& out, const FeatureMap& grad_out, FeatureMap& grad_in);

/// 3x3 pools, padding 1. Average pooling excludes padded cells from the count.
FeatureMap max_pool3_forward(const FeatureMap& in, int stride);
void max_pool3_backward(const FeatureMap& in, int stride, const FeatureMap& grad_out, FeatureMap& grad_in);
FeatureMap avg_pool3_forward(const FeatureMap& in, int stride);
void avg_pool3_backward(const FeatureMap& in, int stride, const FeatureMap& grad_out, FeatureMap& grad_in);

/// Parameter-free stride-2 identity: keeps every other row and column.
FeatureMap subsample2_forward(const FeatureMap& in);
void subsample2_backward(const FeatureMap& grad_out, FeatureMap& grad_in);

/// Per-channel spatial mean.
std::vector<double> global_avg_pool(const FeatureMap& in);

}  // namespace csnas
