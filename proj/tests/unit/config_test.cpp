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

#include "csnas/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "csnas/errors.hpp"

namespace csnas {
namespace {

const char* kMinimal = R"({ "data": { "path": "/data/cifar" } })";

std::string config_error_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

TEST(Config, DefaultsFollowTheSearchProtocol) {
  const auto c = parse_config(kMinimal);
  EXPECT_EQ(c.space.n_intermediate, 4);
  EXPECT_EQ(c.dims(), 28u);
  EXPECT_EQ(c.data.source, "cifar10");
  EXPECT_EQ(c.contrastive.views, 2);
  EXPECT_EQ(c.contrastive.temperature, 0.07);
  EXPECT_EQ(c.contrastive.blend, 0.5);
  EXPECT_EQ(c.contrastive.proj_dim, 128);
  EXPECT_EQ(c.contrastive.bank_momentum, 0.5);
  EXPECT_EQ(c.evaluator.batch_size, 150);
  EXPECT_EQ(c.evaluator.lr, 0.001);
  EXPECT_EQ(c.evaluator.momentum, 0.9);
  EXPECT_EQ(c.evaluator.epochs, 2);
  EXPECT_EQ(c.tpe.gamma, 0.25);
  EXPECT_EQ(c.tpe.n_startup, 20u);
  EXPECT_EQ(c.tpe.n_candidates, 20000u);
  EXPECT_EQ(c.tpe.top_fraction, 0.2);
  EXPECT_EQ(c.tpe.prior_weight, 1.0);
  EXPECT_EQ(c.data.augment.crop_size, 32);
  EXPECT_EQ(c.data.augment.pad, 4);
  EXPECT_EQ(c.data.augment.p_hflip, 0.5);
  EXPECT_EQ(c.data.augment.p_vflip, 0.5);
  EXPECT_EQ(c.data.augment.p_gray, 0.2);
  EXPECT_EQ(c.input_size(), 32);
}

TEST(Config, CifarNeedsAPath) { EXPECT_EQ(config_error_key("{}"), "data.path"); }

TEST(Config, UnknownKeysNameTheirPath) {
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x" }, "sed": 1 })"), "sed");
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x" }, "tpe": { "gama": 0.3 } })"), "tpe.gama");
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x", "augment": { "flip": 1 } } })"), "data.augment.flip");
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x" }, "evaluator": { "tabular": { "sigma": 1 } } })"),
            "evaluator.tabular.sigma");
}

TEST(Config, WrongTypesNameTheirPath) {
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x" }, "tpe": { "iterations": "ten" } })"), "tpe.iterations");
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x" }, "tpe": { "iterations": -1 } })"), "tpe.iterations");
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x", "balanced": 1 } })"), "data.balanced");
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x" }, "space": 4 })"), "space");
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x" }, "encoder": { "view_head": "sum" } })"),
            "encoder.view_head");
}

TEST(Config, RangeChecksNameTheirPath) {
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x" }, "space": { "n_intermediate": 0 } })"),
            "space.n_intermediate");
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x" }, "tpe": { "gamma": 1.5 } })"), "tpe.gamma");
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x" }, "contrastive": { "temperature": 0 } })"),
            "contrastive.temperature");
  EXPECT_EQ(config_error_key(R"({ "data": { "path": "x", "augment": { "crop": 30 } } })"), "encoder.input_size");
  EXPECT_EQ(config_error_key(R"({ "data": { "source": "mnist" } })"), "data.source");
}

TEST(Config, MalformedJson) { EXPECT_THROW(parse_config("{ \"seed\": "), ConfigError); }

TEST(Config, CommentsAreAllowed) {
  const auto c = parse_config(R"(
    // line comment
    { "data": { "path": "x" }, /* block */ "seed": 5 })");
  EXPECT_EQ(c.seed, 5u);
}

TEST(Config, HashIgnoresFormattingAndExplicitDefaults) {
  const auto a = parse_config(kMinimal);
  const auto b = parse_config(R"(
    // same values, spelled out
    { "data": { "path": "/data/cifar", "fraction": 0.1 },
      "tpe": { "gamma": 0.25 },
      "encoder": { "input_size": 32 } })");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
}

TEST(Config, HashChangesWithEverySemanticField) {
  const auto base = config_hash(parse_config(kMinimal));
  const char* variants[] = {
      R"({ "data": { "path": "/data/cifar2" } })",
      R"({ "data": { "path": "/data/cifar", "fraction": 0.2 } })",
      R"({ "data": { "path": "/data/cifar", "balanced": false } })",
      R"({ "data": { "path": "/data/cifar", "seed": 1 } })",
      R"({ "data": { "path": "/data/cifar", "augment": { "p_gray": 0.3 } } })",
      R"({ "data": { "path": "/data/cifar" }, "space": { "n_intermediate": 5 } })",
      R"({ "data": { "path": "/data/cifar" }, "contrastive": { "blend": 0.4 } })",
      R"({ "data": { "path": "/data/cifar" }, "contrastive": { "bank_momentum": 0.6 } })",
      R"({ "data": { "path": "/data/cifar" }, "encoder": { "channels": 16 } })",
      R"({ "data": { "path": "/data/cifar" }, "encoder": { "reduction_fractions": [[1, 2], [2, 3]] } })",
      R"({ "data": { "path": "/data/cifar" }, "tpe": { "n_candidates": 10 } })",
      R"({ "data": { "path": "/data/cifar" }, "tpe": { "selection": "argmax" } })",
      R"({ "data": { "path": "/data/cifar" }, "evaluator": { "epochs": 3 } })",
      R"({ "data": { "path": "/data/cifar" }, "evaluator": { "lr": 0.01 } })",
      R"({ "data": { "path": "/data/cifar" }, "seed": 9 })",
  };
  std::set<std::string> seen = {base};
  for (const char* v : variants) EXPECT_TRUE(seen.insert(config_hash(parse_config(v))).second) << v;
}

TEST(Config, CanonicalFormRoundTrips) {
  const auto c = parse_config(R"({ "data": { "path": "p" }, "tpe": { "workers": 3 }, "seed": 4 })");
  const auto again = parse_config(to_json(c).dump());
  EXPECT_EQ(to_json(again), to_json(c));
  EXPECT_EQ(again.tpe.workers, 3u);
}

TEST(Config, SeedEnvironmentOverride) {
  auto c = parse_config(kMinimal);
  ::setenv("CSNAS_SEED", "77", 1);
  apply_seed_env(c);
  EXPECT_EQ(c.seed, 77u);
  ::setenv("CSNAS_SEED", "7x", 1);
  EXPECT_THROW(apply_seed_env(c), ConfigError);
  ::unsetenv("CSNAS_SEED");
  apply_seed_env(c);
  EXPECT_EQ(c.seed, 77u);
}

TEST(Config, MissingFileNamesThePath) {
  const std::string path = "/nonexistent/dir/run.jsonc";
  try {
    load_config(path);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
  }
}

TEST(Config, ShippedConfigsParse) {
  for (const auto& entry : std::filesystem::directory_iterator(CSNAS_CONFIG_DIR)) {
    std::string raw;
    EXPECT_NO_THROW(load_config(entry.path(), &raw)) << entry.path();
    EXPECT_FALSE(raw.empty());
  }
  const auto tiny = load_config(std::filesystem::path(CSNAS_CONFIG_DIR) / "tiny_synthetic.jsonc");
  EXPECT_EQ(tiny.dims(), 10u);
  EXPECT_EQ(tiny.data.source, "synthetic");
}

TEST(Config, ReferenceFileListsTheDefaults) {
  const auto reference = load_config(std::filesystem::path(CSNAS_CONFIG_DIR) / "reference.jsonc");
  const auto defaults = parse_config(R"({ "data": { "path": "/data/cifar-10-batches-bin" } })");
  EXPECT_EQ(to_json(reference), to_json(defaults));
}

}  // namespace
}  // namespace csnas
