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

#include <cmath>

#include <gtest/gtest.h>

#include "csnas/rng.hpp"
#include "oracles.hpp"

namespace csnas {
namespace {

FeatureMap random_map(Rng& rng, int c, int h, int w) {
  FeatureMap m(c, h, w);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

std::vector<double> random_weights(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (auto& v : w) v = rng.normal();
  return w;
}

// Straight-line convolution: out[o][y][x] = sum w * in at dilated taps.
FeatureMap reference_conv(const FeatureMap& in, const std::vector<double>& w, const ConvSpec& s) {
  const int pad = s.dilation * (s.kernel - 1) / 2;
  const int ho = (in.height + 2 * pad - s.dilation * (s.kernel - 1) - 1) / s.stride + 1;
  const int wo = (in.width + 2 * pad - s.dilation * (s.kernel - 1) - 1) / s.stride + 1;
  FeatureMap out(s.out_channels, ho, wo);
  const int in_per_group = s.in_channels / s.groups;
  const int out_per_group = s.out_channels / s.groups;
  for (int o = 0; o < s.out_channels; ++o) {
    const int g = o / out_per_group;
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        double acc = 0.0;
        for (int ci = 0; ci < in_per_group; ++ci) {
          for (int ky = 0; ky < s.kernel; ++ky) {
            for (int kx = 0; kx < s.kernel; ++kx) {
              const int iy = y * s.stride - pad + ky * s.dilation;
              const int ix = x * s.stride - pad + kx * s.dilation;
              if (iy < 0 || ix < 0 || iy >= in.height || ix >= in.width) continue;
              const auto wi = ((static_cast<std::size_t>(o) * in_per_group + ci) * s.kernel + ky) * s.kernel + kx;
              acc += w[wi] * in.at(g * in_per_group + ci, iy, ix);
            }
          }
        }
        out.at(o, y, x) = acc;
      }
    }
  }
  return out;
}

double weighted_sum(const FeatureMap& m, const FeatureMap& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.data[i] * g.data[i];
  return s;
}

TEST(StridedSize, SamePaddingOutputs) {
  EXPECT_EQ(strided_size(8, 1), 8);
  EXPECT_EQ(strided_size(8, 2), 4);
  EXPECT_EQ(strided_size(7, 2), 4);
  for (int n = 4; n <= 16; ++n) {
    for (int k : {1, 3, 5}) {
      for (int d : {1, 2}) {
        for (int s : {1, 2}) {
          const ConvSpec spec{1, 1, k, s, d, 1};
          EXPECT_EQ(spec.out_size(n), strided_size(n, s)) << n << " " << k << " " << d << " " << s;
        }
      }
    }
  }
}

TEST(Conv2d, MatchesReferenceForAllShapes) {
  Rng rng(1);
  const ConvSpec specs[] = {
      {3, 4, 3, 1, 1, 1}, {4, 4, 3, 2, 1, 4}, {4, 4, 5, 1, 2, 4}, {4, 4, 5, 2, 2, 4},
      {6, 2, 1, 1, 1, 1}, {6, 6, 1, 2, 1, 1}, {4, 4, 3, 1, 2, 2},
  };
  for (const auto& s : specs) {
    const auto in = random_map(rng, s.in_channels, 8, 8);
    const auto w = random_weights(rng, s.weight_count());
    const auto got = conv2d_forward(in, w, s);
    const auto want = reference_conv(in, w, s);
    ASSERT_TRUE(got.same_shape(want));
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data[i], want.data[i], 1e-12);
  }
}

TEST(Conv2d, BackwardMatchesFiniteDifferences) {
  Rng rng(2);
  const ConvSpec specs[] = {{2, 3, 3, 1, 1, 1}, {3, 3, 5, 2, 2, 3}, {2, 2, 1, 2, 1, 1}};
  for (const auto& s : specs) {
    auto in = random_map(rng, s.in_channels, 6, 6);
    auto w = random_weights(rng, s.weight_count());
    const auto probe = random_map(rng, s.out_channels, strided_size(6, s.stride), strided_size(6, s.stride));
    FeatureMap d_in(in.channels, in.height, in.width);
    std::vector<double> d_w(w.size(), 0.0);
    conv2d_backward(in, w, s, probe, &d_in, d_w);
    const auto f = [&] { return weighted_sum(conv2d_forward(in, w, s), probe); };
    for (std::size_t i = 0; i < w.size(); ++i) {
      EXPECT_NEAR(testing::central_difference(f, w[i], 1e-6), d_w[i], 1e-6);
    }
    for (std::size_t i = 0; i < in.size(); ++i) {
      EXPECT_NEAR(testing::central_difference(f, in.data[i], 1e-6), d_in.data[i], 1e-6);
    }
  }
}

TEST(Relu, ForwardAndMaskedBackward) {
  FeatureMap in(1, 1, 4);
  in.data = {-1.0, 0.0, 2.0, 3.0};
  const auto out = relu_forward(in);
  EXPECT_EQ(out.data, (std::vector<double>{0.0, 0.0, 2.0, 3.0}));
  FeatureMap g(1, 1, 4);
  g.data = {1, 1, 1, 1};
  FeatureMap d(1, 1, 4);
  d.data = {0.5, 0.5, 0.5, 0.5};
  relu_backward(out, g, d);
  EXPECT_EQ(d.data, (std::vector<double>{0.5, 0.5, 1.5, 1.5}));
}

TEST(Pooling, AverageExcludesPadding) {
  FeatureMap in(1, 3, 3);
  in.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto out = avg_pool3_forward(in, 1);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 0), (1 + 2 + 4 + 5) / 4.0);
  EXPECT_DOUBLE_EQ(out.at(0, 1, 1), 5.0);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 1), (1 + 2 + 3 + 4 + 5 + 6) / 6.0);
  const auto strided = avg_pool3_forward(in, 2);
  EXPECT_EQ(strided.height, 2);
  EXPECT_DOUBLE_EQ(strided.at(0, 1, 1), (5 + 6 + 8 + 9) / 4.0);
}

TEST(Pooling, MaxPicksWindowMaximum) {
  FeatureMap in(1, 3, 3);
  in.data = {1, 9, 3, 4, 5, 6, 7, 8, 2};
  const auto out = max_pool3_forward(in, 1);
  EXPECT_EQ(out.at(0, 0, 0), 9.0);
  EXPECT_EQ(out.at(0, 2, 2), 8.0);
  EXPECT_EQ(out.at(0, 2, 0), 8.0);
}

TEST(Pooling, BackwardMatchesFiniteDifferences) {
  Rng rng(3);
  for (int stride : {1, 2}) {
    auto in = random_map(rng, 2, 6, 6);
    const auto probe = random_map(rng, 2, strided_size(6, stride), strided_size(6, stride));
    FeatureMap d_max(2, 6, 6), d_avg(2, 6, 6);
    max_pool3_backward(in, stride, probe, d_max);
    avg_pool3_backward(in, stride, probe, d_avg);
    const auto fmax = [&] { return weighted_sum(max_pool3_forward(in, stride), probe); };
    const auto favg = [&] { return weighted_sum(avg_pool3_forward(in, stride), probe); };
    for (std::size_t i = 0; i < in.size(); ++i) {
      // Random inputs have distinct values, so max pooling is locally linear.
      EXPECT_NEAR(testing::central_difference(fmax, in.data[i], 1e-7), d_max.data[i], 1e-6);
      EXPECT_NEAR(testing::central_difference(favg, in.data[i], 1e-7), d_avg.data[i], 1e-6);
    }
  }
}

TEST(Subsample, KeepsEvenPositions) {
  FeatureMap in(1, 4, 4);
  for (int i = 0; i < 16; ++i) in.data[static_cast<std::size_t>(i)] = i;
  const auto out = subsample2_forward(in);
  EXPECT_EQ(out.data, (std::vector<double>{0, 2, 8, 10}));
  FeatureMap g(1, 2, 2);
  g.data = {1, 2, 3, 4};
  FeatureMap d(1, 4, 4);
  subsample2_backward(g, d);
  EXPECT_EQ(d.at(0, 2, 2), 4.0);
  EXPECT_EQ(d.at(0, 1, 1), 0.0);
}

TEST(GlobalAvgPool, PerChannelMean) {
  FeatureMap in(2, 2, 2);
  in.data = {1, 2, 3, 4, 10, 10, 10, 14};
  EXPECT_EQ(global_avg_pool(in), (std::vector<double>{2.5, 11.0}));
}

TEST(FeatureMap, FiniteCheck) {
  FeatureMap m(1, 1, 2);
  EXPECT_TRUE(m.all_finite());
  m.data[1] = std::nan("");
  EXPECT_FALSE(m.all_finite());
}

}  // namespace
}  // namespace csnas
