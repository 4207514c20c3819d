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

#include "csnas/feature_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csnas/errors.hpp"

namespace csnas {

bool FeatureMap::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

void FeatureMap::add(const FeatureMap& o) {
  if (!same_shape(o)) throw ShapeError("feature map add: shape mismatch");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
}

namespace {

void check_conv(const FeatureMap& in, std::span<const double> weight, const ConvSpec& spec) {
  if (in.channels != spec.in_channels) throw ShapeError("conv2d: input channel mismatch");
  if (spec.groups < 1 || spec.in_channels % spec.groups != 0 || spec.out_channels % spec.groups != 0) {
    throw ShapeError("conv2d: channels not divisible by groups");
  }
  if (weight.size() != spec.weight_count()) throw ShapeError("conv2d: weight size mismatch");
}

}  // namespace

FeatureMap conv2d_forward(const FeatureMap& in, std::span<const double> weight, const ConvSpec& spec) {
  check_conv(in, weight, spec);
  const int k = spec.kernel;
  const int s = spec.stride;
  const int d = spec.dilation;
  const int p = spec.padding();
  const int cin_g = spec.in_channels / spec.groups;
  const int cout_g = spec.out_channels / spec.groups;
  FeatureMap out(spec.out_channels, spec.out_size(in.height), spec.out_size(in.width));
  for (int o = 0; o < spec.out_channels; ++o) {
    const int g = o / cout_g;
    for (int ci = 0; ci < cin_g; ++ci) {
      const int c = g * cin_g + ci;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double w = weight[((static_cast<std::size_t>(o) * cin_g + ci) * k + ky) * k + kx];
          for (int y = 0; y < out.height; ++y) {
            const int iy = y * s - p + ky * d;
            if (iy < 0 || iy >= in.height) continue;
            for (int x = 0; x < out.width; ++x) {
              const int ix = x * s - p + kx * d;
              if (ix < 0 || ix >= in.width) continue;
              out.at(o, y, x) += w * in.at(c, iy, ix);
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const FeatureMap& in, std::span<const double> weight, const ConvSpec& spec,
                     const FeatureMap& grad_out, FeatureMap* grad_in, std::span<double> grad_weight) {
  check_conv(in, weight, spec);
  if (grad_weight.size() != weight.size()) throw ShapeError("conv2d backward: gradient size mismatch");
  const int k = spec.kernel;
  const int s = spec.stride;
  const int d = spec.dilation;
  const int p = spec.padding();
  const int cin_g = spec.in_channels / spec.groups;
  const int cout_g = spec.out_channels / spec.groups;
  for (int o = 0; o < spec.out_channels; ++o) {
    const int g = o / cout_g;
    for (int ci = 0; ci < cin_g; ++ci) {
      const int c = g * cin_g + ci;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const std::size_t wi = ((static_cast<std::size_t>(o) * cin_g + ci) * k + ky) * k + kx;
          const double w = weight[wi];
          double gw = 0.0;
          for (int y = 0; y < grad_out.height; ++y) {
            const int iy = y * s - p + ky * d;
            if (iy < 0 || iy >= in.height) continue;
            for (int x = 0; x < grad_out.width; ++x) {
              const int ix = x * s - p + kx * d;
              if (ix < 0 || ix >= in.width) continue;
              const double go = grad_out.at(o, y, x);
              gw += go * in.at(c, iy, ix);
              if (grad_in) grad_in->at(c, iy, ix) += w * go;
            }
          }
          grad_weight[wi] += gw;
        }
      }
    }
  }
}

FeatureMap relu_forward(const FeatureMap& in) {
  FeatureMap out = in;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

void relu_backward(const FeatureMap& out, const FeatureMap& grad_out, FeatureMap& grad_in) {
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (out.data[i] > 0.0) grad_in.data[i] += grad_out.data[i];
  }
}

FeatureMap max_pool3_forward(const FeatureMap& in, int stride) {
  FeatureMap out(in.channels, strided_size(in.height, stride), strided_size(in.width, stride));
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = y * stride - 1 + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = x * stride - 1 + kx;
            if (ix < 0 || ix >= in.width) continue;
            best = std::max(best, in.at(c, iy, ix));
          }
        }
        out.at(c, y, x) = best;
      }
    }
  }
  return out;
}

void max_pool3_backward(const FeatureMap& in, int stride, const FeatureMap& grad_out, FeatureMap& grad_in) {
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < grad_out.height; ++y) {
      for (int x = 0; x < grad_out.width; ++x) {
        // First maximum in scan order receives the gradient.
        double best = -std::numeric_limits<double>::infinity();
        int by = -1;
        int bx = -1;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = y * stride - 1 + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = x * stride - 1 + kx;
            if (ix < 0 || ix >= in.width) continue;
            if (in.at(c, iy, ix) > best) {
              best = in.at(c, iy, ix);
              by = iy;
              bx = ix;
            }
          }
        }
        grad_in.at(c, by, bx) += grad_out.at(c, y, x);
      }
    }
  }
}

FeatureMap avg_pool3_forward(const FeatureMap& in, int stride) {
  FeatureMap out(in.channels, strided_size(in.height, stride), strided_size(in.width, stride));
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        double sum = 0.0;
        int count = 0;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = y * stride - 1 + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = x * stride - 1 + kx;
            if (ix < 0 || ix >= in.width) continue;
            sum += in.at(c, iy, ix);
            ++count;
          }
        }
        out.at(c, y, x) = sum / count;
      }
    }
  }
  return out;
}

void avg_pool3_backward(const FeatureMap& in, int stride, const FeatureMap& grad_out, FeatureMap& grad_in) {
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < grad_out.height; ++y) {
      for (int x = 0; x < grad_out.width; ++x) {
        const int y0 = std::max(0, y * stride - 1);
        const int y1 = std::min(in.height - 1, y * stride + 1);
        const int x0 = std::max(0, x * stride - 1);
        const int x1 = std::min(in.width - 1, x * stride + 1);
        const double g = grad_out.at(c, y, x) / ((y1 - y0 + 1) * (x1 - x0 + 1));
        for (int iy = y0; iy <= y1; ++iy)
          for (int ix = x0; ix <= x1; ++ix) grad_in.at(c, iy, ix) += g;
      }
    }
  }
}

FeatureMap subsample2_forward(const FeatureMap& in) {
  FeatureMap out(in.channels, strided_size(in.height, 2), strided_size(in.width, 2));
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = in.at(c, 2 * y, 2 * x);
  return out;
}

void subsample2_backward(const FeatureMap& grad_out, FeatureMap& grad_in) {
  for (int c = 0; c < grad_out.channels; ++c)
    for (int y = 0; y < grad_out.height; ++y)
      for (int x = 0; x < grad_out.width; ++x) grad_in.at(c, 2 * y, 2 * x) += grad_out.at(c, y, x);
}

std::vector<double> global_avg_pool(const FeatureMap& in) {
  std::vector<double> out(static_cast<std::size_t>(in.channels), 0.0);
  const double inv = 1.0 / static_cast<double>(in.plane());
  for (int c = 0; c < in.channels; ++c) {
    double s = 0.0;
    const auto first = in.data.begin() + static_cast<std::ptrdiff_t>(c * in.plane());
    for (auto it = first; it != first + static_cast<std::ptrdiff_t>(in.plane()); ++it) s += *it;
    out[static_cast<std::size_t>(c)] = s * inv;
  }
  return out;
}

}  // namespace csnas
