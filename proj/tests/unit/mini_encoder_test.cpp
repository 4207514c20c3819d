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

#include "csnas/mini_encoder.hpp"

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "csnas/errors.hpp"
#include "csnas/rng.hpp"
#include "oracles.hpp"

namespace csnas {
namespace {

Genotype make_genotype(const std::vector<int>& normal, const std::vector<int>& reduction) {
  const int n = normal.size() == 5 ? 2 : 4;
  return {CellEncoding::from_codes(n, normal), CellEncoding::from_codes(n, reduction)};
}

// Together the two cells use every operation kind.
Genotype all_ops_genotype() { return make_genotype({0, 1, 2, 3, 4}, {5, 6, 7, 0, 6}); }

EncoderConfig tiny_config(int channels, int side, int proj_dim) {
  EncoderConfig c;
  c.layers = 3;
  c.channels = channels;
  c.input_height = c.input_width = side;
  c.proj_dim = proj_dim;
  c.views = 2;
  return c;
}

Image random_image(Rng& rng, int side) {
  Image img(side, side);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) img.at(c, y, x) = rng.uniform01();
  return img;
}

Minibatch random_minibatch(Rng& rng, std::size_t K, std::size_t M, int side) {
  Minibatch mb;
  mb.views = M;
  for (std::size_t i = 0; i < K; ++i) {
    ViewSet vs;
    vs.sample_id = 10 + i;
    vs.original = random_image(rng, side);
    for (std::size_t m = 0; m < M; ++m) vs.views.push_back(random_image(rng, side));
    mb.items.push_back(std::move(vs));
  }
  return mb;
}

// Parameter count from kernel shapes for L = 3 with reductions at cells 1
// and 2: the cell channel counts are C, 2C, 4C.
std::size_t expected_parameter_count(const Genotype& g, int C, int p, int M) {
  const int N = g.n_intermediate();
  auto edge_params = [](int code, int c) -> std::size_t {
    switch (code) {
      case 0: case 2: return static_cast<std::size_t>(c * 9 + c * c);
      case 1: case 3: return static_cast<std::size_t>(c * 25 + c * c);
      default: return 0;
    }
  };
  std::size_t n = static_cast<std::size_t>(3 * C * 9);  // stem
  const int ch[3] = {C, 2 * C, 4 * C};
  const int in0[3] = {C, C, N * C};        // channels of the k-2 input
  const int in1[3] = {C, N * C, N * 2 * C};  // channels of the k-1 input
  for (int k = 0; k < 3; ++k) {
    n += static_cast<std::size_t>(in0[k] * ch[k] + in1[k] * ch[k]);
    const auto codes = (k == 0 ? g.normal : g.reduction).codes();
    for (int code : codes) n += edge_params(code, ch[k]);
  }
  const int F = N * 4 * C;
  n += static_cast<std::size_t>(p * F + p);
  n += static_cast<std::size_t>(p * M * p + p);
  return n;
}

TEST(MiniNetwork, ParameterCountMatchesShapeArithmetic) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_genotype(2, seed);
    const MiniNetwork net(g, tiny_config(4, 16, 8), 1);
    EXPECT_EQ(net.parameter_count(), expected_parameter_count(g, 4, 8, 2));
  }
  const auto g = all_ops_genotype();
  const MiniNetwork net(g, tiny_config(4, 16, 8), 1);
  EXPECT_EQ(net.parameter_count(), expected_parameter_count(g, 4, 8, 2));
  EXPECT_EQ(net.feature_dim(), 32u);
}

TEST(MiniNetwork, ReductionCellsAtThirds) {
  const auto g = all_ops_genotype();
  EXPECT_EQ(MiniNetwork(g, tiny_config(2, 8, 4), 0).reduction_cells(), (std::vector<int>{1, 2}));
  auto c = tiny_config(2, 32, 4);
  c.layers = 8;
  EXPECT_EQ(MiniNetwork(g, c, 0).reduction_cells(), (std::vector<int>{2, 5}));
  c.reduction_at = {{1, 2}, {2, 3}};
  EXPECT_EQ(MiniNetwork(g, c, 0).reduction_cells(), (std::vector<int>{4, 5}));
}

TEST(MiniNetwork, DeterministicInitialisation) {
  const auto g = random_genotype(2, 3);
  const MiniNetwork a(g, tiny_config(4, 16, 8), 42), b(g, tiny_config(4, 16, 8), 42), c(g, tiny_config(4, 16, 8), 43);
  ASSERT_EQ(a.parameters().tensor_count(), b.parameters().tensor_count());
  bool differs = false;
  for (std::size_t t = 0; t < a.parameters().tensor_count(); ++t) {
    EXPECT_EQ(a.parameters()[t].values, b.parameters()[t].values);
    differs |= a.parameters()[t].values != c.parameters()[t].values;
    for (double v : a.parameters()[t].values) EXPECT_LE(std::abs(v), 1.0);  // fan_in >= 1
  }
  EXPECT_TRUE(differs);
}

TEST(MiniNetwork, RejectsInfeasibleShapes) {
  const auto g = all_ops_genotype();
  EXPECT_THROW(MiniNetwork(g, tiny_config(2, 10, 4), 0), ConfigError);  // not a multiple of 4
  auto c = tiny_config(2, 4, 4);
  c.layers = 8;
  c.reduction_at = {{0, 1}, {1, 3}, {2, 3}};  // 4 -> 2 -> 1 -> odd
  EXPECT_THROW(MiniNetwork(g, c, 0), ShapeError);
  auto d = tiny_config(2, 8, 4);
  d.layers = 2;
  EXPECT_THROW(MiniNetwork(g, d, 0), ConfigError);
}

TEST(MiniNetwork, RejectsWrongImageSize) {
  const MiniNetwork net(all_ops_genotype(), tiny_config(2, 8, 4), 0);
  Rng rng(0);
  EXPECT_THROW(net.features(random_image(rng, 12)), ShapeError);
}

TEST(MiniNetwork, AllZeroGenotypeIsFinite) {
  const auto g = make_genotype({7, 7, 7, 7, 7}, {7, 7, 7, 7, 7});
  const MiniNetwork net(g, tiny_config(4, 16, 8), 5);
  Rng rng(1);
  const auto f = net.features(random_image(rng, 16));
  for (double v : f) EXPECT_EQ(v, 0.0);  // intermediates are empty sums
  const auto z = net.project(random_image(rng, 16));
  for (double v : z) EXPECT_TRUE(std::isfinite(v));
}

TEST(MiniNetwork, ZeroImageThroughIdentityCellsGivesBias) {
  const auto g = make_genotype({6, 6, 6, 6, 6}, {6, 6, 6, 6, 6});
  const MiniNetwork net(g, tiny_config(4, 16, 8), 9);
  const auto z = net.project(Image(16, 16));
  const int gb = net.parameters().find("g.bias");
  ASSERT_GE(gb, 0);
  EXPECT_EQ(z, net.parameters()[static_cast<std::size_t>(gb)].values);
}

TEST(MiniNetwork, ProjectionHeadIsAffine) {
  MiniNetwork net(random_genotype(2, 4), tiny_config(4, 16, 8), 3);
  Rng rng(2);
  const auto img = random_image(rng, 16);
  const auto z = net.project(img);
  for (const char* name : {"g.weight", "g.bias"}) {
    for (double& v : net.parameters()[static_cast<std::size_t>(net.parameters().find(name))].values) v *= 2.0;
  }
  const auto z2 = net.project(img);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(z2[i], 2.0 * z[i]);
}

TEST(MiniNetwork, ForwardShapes) {
  const MiniNetwork net(random_genotype(2, 6), tiny_config(2, 8, 5), 0);
  Rng rng(3);
  const auto mb = random_minibatch(rng, 3, 2, 8);
  const auto p = net.forward(mb);
  EXPECT_EQ(p.anchors.size(), 3u * 5);
  EXPECT_EQ(p.targets.size(), 3u * 5);
  EXPECT_EQ(p.view_projections.size(), 3u * 2 * 5);
}

TEST(MiniNetwork, LossMatchesContrastiveModule) {
  const MiniNetwork net(all_ops_genotype(), tiny_config(2, 8, 4), 11);
  Rng rng(4);
  const auto mb = random_minibatch(rng, 3, 2, 8);
  MemoryBank bank(4, 0.5);
  bank.update(11, std::vector<double>{0.3, -0.2, 0.9, 0.1});
  const auto p = net.forward(mb);
  const auto lg = net.loss_and_gradient(mb, bank, 0.2, 0.5);
  double want = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<Embedding> neg;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j == i) continue;
      for (std::size_t m = 0; m < 2; ++m)
        neg.emplace_back(p.view_projections.begin() + static_cast<std::ptrdiff_t>((j * 2 + m) * 4),
                         p.view_projections.begin() + static_cast<std::ptrdiff_t>((j * 2 + m + 1) * 4));
    }
    const Embedding z(p.anchors.begin() + static_cast<std::ptrdiff_t>(i * 4),
                      p.anchors.begin() + static_cast<std::ptrdiff_t>((i + 1) * 4));
    const Embedding zt(p.targets.begin() + static_cast<std::ptrdiff_t>(i * 4),
                       p.targets.begin() + static_cast<std::ptrdiff_t>((i + 1) * 4));
    const auto* r = bank.find(mb.items[i].sample_id);
    want += final_loss(r ? *r : z, z, zt, neg, 0.2, 0.5);
  }
  want /= 3;
  EXPECT_LT(testing::relative_error(lg.loss, want), 1e-12);
  EXPECT_EQ(net.loss(mb, bank, 0.2, 0.5), lg.loss);
}

// Finite-difference check of every parameter; shared with the acceptance
// suite's fixture dimensions (N=2, L=3, C=2, four 8x8 images).
void check_gradients(ViewHead head) {
  auto cfg = tiny_config(2, 8, 4);
  cfg.view_head = head;
  MiniNetwork net(all_ops_genotype(), cfg, 21);
  Rng rng(5);
  const auto mb = random_minibatch(rng, 4, 2, 8);
  MemoryBank bank(4, 0.5);
  bank.update(mb.items[2].sample_id, std::vector<double>{1.0, 0.5, -0.5, 0.2});
  const auto lg = net.loss_and_gradient(mb, bank, 0.5, 0.5);
  const auto f = [&] { return net.loss(mb, bank, 0.5, 0.5); };
  auto& params = net.parameters();
  for (std::size_t t = 0; t < params.tensor_count(); ++t) {
    auto& values = params[t].values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double fd = testing::central_difference(f, values[i], 1e-5);
      const double an = lg.gradients[t][i];
      EXPECT_LE(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}), 1e-4)
          << params[t].name << "[" << i << "] analytic " << an << " numeric " << fd;
    }
  }
}

TEST(MiniNetwork, GradientsMatchFiniteDifferences) { check_gradients(ViewHead::project_then_concat); }

TEST(MiniNetwork, GradientsMatchFiniteDifferencesConcatFeatures) { check_gradients(ViewHead::concat_features); }

TEST(MiniNetwork, DeadPathHasZeroGradient) {
  // n0 receives nothing, so the sep_conv on n0 -> n1 only ever sees zeros.
  const auto g = make_genotype({7, 7, 0, 6, 0}, {7, 7, 6, 6, 0});
  const MiniNetwork net(g, tiny_config(2, 8, 4), 2);
  Rng rng(6);
  const auto mb = random_minibatch(rng, 3, 2, 8);
  const MemoryBank bank(4, 0.5);
  const auto lg = net.loss_and_gradient(mb, bank, 0.5, 0.5);
  for (const char* name : {"cell0.edge2_3.dw", "cell0.edge2_3.pw", "cell1.edge2_3.pw", "cell2.edge2_3.dw"}) {
    const int t = net.parameters().find(name);
    ASSERT_GE(t, 0) << name;
    for (double v : lg.gradients[static_cast<std::size_t>(t)]) EXPECT_EQ(v, 0.0) << name;
  }
}

TEST(MiniNetwork, CheckpointRoundTrip) {
  const auto g = random_genotype(2, 8);
  const MiniNetwork a(g, tiny_config(2, 8, 4), 1);
  MiniNetwork b(g, tiny_config(2, 8, 4), 2);
  const auto path = std::filesystem::temp_directory_path() / "csnas_params.bin";
  a.save(path);
  b.load(path);
  for (std::size_t t = 0; t < a.parameters().tensor_count(); ++t) {
    EXPECT_EQ(a.parameters()[t].values, b.parameters()[t].values);
  }
  MiniNetwork other(random_genotype(2, 99), tiny_config(3, 8, 4), 2);
  EXPECT_THROW(other.load(path), FormatError);
}

TEST(MomentumSgd, PlainStepSubtractsGradient) {
  ParameterStore p;
  p.add("w", {3});
  p[0].values = {1.0, 2.0, 3.0};
  MomentumSgd sgd(1.0, 0.0);
  sgd.step(p, {{0.5, -1.0, 0.0}});
  EXPECT_EQ(p[0].values, (std::vector<double>{0.5, 3.0, 3.0}));
}

TEST(MomentumSgd, TwoStepsClosedForm) {
  ParameterStore p;
  p.add("w", {1});
  p[0].values = {0.0};
  const double lr = 0.1, mu = 0.9, g = 2.0;
  MomentumSgd sgd(lr, mu);
  sgd.step(p, {{g}});
  sgd.step(p, {{g}});
  EXPECT_NEAR(p[0].values[0], -lr * g * (2 + mu), 1e-15);
}

TEST(MomentumSgd, ZeroLearningRateKeepsParametersAndLoss) {
  MiniNetwork net(random_genotype(2, 1), tiny_config(2, 8, 4), 3);
  Rng rng(7);
  const auto mb = random_minibatch(rng, 3, 2, 8);
  const MemoryBank bank(4, 0.5);
  const auto before = net.loss_and_gradient(mb, bank, 0.07, 0.5);
  MomentumSgd sgd(0.0, 0.9);
  sgd.step(net.parameters(), before.gradients);
  EXPECT_EQ(net.loss(mb, bank, 0.07, 0.5), before.loss);
}

TEST(MomentumSgd, RejectsShapeMismatch) {
  ParameterStore p;
  p.add("w", {2});
  MomentumSgd sgd(0.1, 0.9);
  EXPECT_THROW(sgd.step(p, {{1.0}}), ShapeError);
  EXPECT_THROW(sgd.step(p, {}), ShapeError);
}

TEST(MiniNetwork, ShortTrainingLowersTheLoss) {
  SyntheticConfig data_cfg;
  data_cfg.seed = 3;
  const auto data = make_synthetic_dataset(data_cfg);
  AugmentPolicy aug;
  aug.crop_size = 16;
  aug.pad = 2;
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MiniNetwork net(random_genotype(2, 100 + seed), tiny_config(4, 16, 16), seed);
    MemoryBank bank(16, 0.5);
    MomentumSgd sgd(0.001, 0.9);
    std::vector<double> epoch_loss;
    for (int epoch = 0; epoch < 5; ++epoch) {
      std::vector<std::size_t> order(data.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(epoch)}));
      shuffle(order, rng);
      double total = 0.0;
      for (std::size_t b = 0; b < 2; ++b) {
        const auto mb = make_minibatch_from(data, std::span(order).subspan(b * 32, 32), 2, aug, rng);
        auto lg = net.loss_and_gradient(mb, bank, 0.07, 0.5);
        sgd.step(net.parameters(), lg.gradients);
        commit_to_bank(lg.batch, bank);
        total += lg.loss;
      }
      epoch_loss.push_back(total / 2);
    }
    improved += epoch_loss.back() < epoch_loss.front();
  }
  EXPECT_GE(improved, 8);
}

}  // namespace
}  // namespace csnas
