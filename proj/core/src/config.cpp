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

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "csnas/errors.hpp"
#include "csnas/hashing.hpp"

namespace csnas {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Typed view of one JSON object that remembers which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const char* k) const { return path_.empty() ? std::string(k) : path_ + "." + k; }

  const json* find(const char* k) {
    seen_.insert(k);
    const auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const char* k, int& out) {
    if (const auto* v = find(k)) {
      if (!v->is_number_integer()) throw ConfigError(key(k), "expected an integer");
      const auto x = v->get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(key(k), "integer out of range");
      out = static_cast<int>(x);
    }
  }
  void get(const char* k, std::size_t& out) {
    if (const auto* v = find(k)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
        throw ConfigError(key(k), "expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }
  void get(const char* k, std::uint64_t& out, int) {
    if (const auto* v = find(k)) {
      if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
        throw ConfigError(key(k), "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void get(const char* k, double& out) {
    if (const auto* v = find(k)) {
      if (!v->is_number()) throw ConfigError(key(k), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const char* k, bool& out) {
    if (const auto* v = find(k)) {
      if (!v->is_boolean()) throw ConfigError(key(k), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* k, std::string& out) {
    if (const auto* v = find(k)) {
      if (!v->is_string()) throw ConfigError(key(k), "expected a string");
      out = v->get<std::string>();
    }
  }

  std::optional<Section> child(const char* k) {
    if (const auto* v = find(k)) return Section(*v, key(k));
    return std::nullopt;
  }

  // Rejects keys that no get()/child() asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key(it.key().c_str()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ViewHead parse_view_head(const std::string& s, const std::string& key) {
  if (s == "project_then_concat") return ViewHead::project_then_concat;
  if (s == "concat_features") return ViewHead::concat_features;
  throw ConfigError(key, "expected \"project_then_concat\" or \"concat_features\", got \"" + s + "\"");
}

std::string view_head_name(ViewHead h) {
  return h == ViewHead::project_then_concat ? "project_then_concat" : "concat_features";
}

Selection parse_selection(const std::string& s, const std::string& key) {
  if (s == "top_fraction") return Selection::top_fraction;
  if (s == "argmax") return Selection::argmax;
  throw ConfigError(key, "expected \"top_fraction\" or \"argmax\", got \"" + s + "\"");
}

std::string selection_name(Selection s) { return s == Selection::argmax ? "argmax" : "top_fraction"; }

void parse_space(Section s, RunConfig& c) {
  s.get("n_intermediate", c.space.n_intermediate);
  s.get("vocab", c.space.vocab);
  s.finish();
}

void parse_data(Section s, RunConfig& c) {
  auto& d = c.data;
  s.get("source", d.source);
  s.get("path", d.path);
  s.get("fraction", d.fraction);
  s.get("balanced", d.balanced);
  s.get("seed", d.seed, 0);
  if (auto syn = s.child("synthetic")) {
    auto& y = d.synthetic;
    syn->get("n_images", y.n_images);
    syn->get("n_classes", y.n_classes);
    syn->get("height", y.height);
    syn->get("width", y.width);
    syn->get("blobs_per_class", y.blobs_per_class);
    syn->get("blob_sigma", y.blob_sigma);
    syn->get("jitter", y.jitter);
    syn->get("noise", y.noise);
    syn->finish();
  }
  if (auto aug = s.child("augment")) {
    auto& a = d.augment;
    aug->get("crop", a.crop_size);
    aug->get("pad", a.pad);
    aug->get("center_crop", a.center_crop);
    aug->get("p_hflip", a.p_hflip);
    aug->get("p_vflip", a.p_vflip);
    aug->get("p_gray", a.p_gray);
    aug->finish();
  }
  s.finish();
}

void parse_contrastive(Section s, RunConfig& c) {
  auto& x = c.contrastive;
  s.get("views", x.views);
  s.get("temperature", x.temperature);
  s.get("blend", x.blend);
  s.get("proj_dim", x.proj_dim);
  s.get("bank_momentum", x.bank_momentum);
  s.finish();
}

void parse_encoder(Section s, RunConfig& c) {
  auto& e = c.encoder;
  s.get("layers", e.layers);
  s.get("channels", e.channels);
  s.get("input_size", e.input_size);
  if (const auto* v = s.find("reduction_fractions")) {
    const auto key = s.key("reduction_fractions");
    if (!v->is_array()) throw ConfigError(key, "expected an array of [num, den] pairs");
    e.reduction_fractions.clear();
    for (const auto& f : *v) {
      if (!f.is_array() || f.size() != 2 || !f[0].is_number_integer() || !f[1].is_number_integer()) {
        throw ConfigError(key, "expected an array of [num, den] integer pairs");
      }
      e.reduction_fractions.push_back({f[0].get<int>(), f[1].get<int>()});
    }
  }
  std::string head = view_head_name(e.view_head);
  s.get("view_head", head);
  e.view_head = parse_view_head(head, s.key("view_head"));
  s.finish();
}

void parse_tpe(Section s, RunConfig& c) {
  auto& t = c.tpe;
  s.get("gamma", t.gamma);
  s.get("n_startup", t.n_startup);
  s.get("n_candidates", t.n_candidates);
  s.get("top_fraction", t.top_fraction);
  s.get("prior_weight", t.prior_weight);
  s.get("iterations", t.iterations);
  s.get("workers", t.workers);
  std::string sel = selection_name(t.selection);
  s.get("selection", sel);
  t.selection = parse_selection(sel, s.key("selection"));
  s.finish();
}

void parse_evaluator(Section s, RunConfig& c) {
  auto& e = c.evaluator;
  s.get("kind", e.kind);
  s.get("epochs", e.epochs);
  s.get("batch_size", e.batch_size);
  s.get("lr", e.lr);
  s.get("momentum", e.momentum);
  if (auto tab = s.child("tabular")) {
    auto& t = e.tabular;
    tab->get("kind", t.kind);
    tab->get("target", t.target);
    tab->get("noise", t.noise);
    if (const auto* v = tab->find("costs")) {
      const auto key = tab->key("costs");
      if (!v->is_array()) throw ConfigError(key, "expected an array of per-dimension cost arrays");
      t.costs.clear();
      for (const auto& row : *v) {
        if (!row.is_array()) throw ConfigError(key, "expected an array of per-dimension cost arrays");
        std::vector<double> r;
        for (const auto& x : row) {
          if (!x.is_number()) throw ConfigError(key, "costs must be numbers");
          r.push_back(x.get<double>());
        }
        t.costs.push_back(std::move(r));
      }
    }
    tab->finish();
  }
  s.finish();
}

void parse_output(Section s, RunConfig& c) {
  s.get("record_wall_time", c.output.record_wall_time);
  s.finish();
}

}  // namespace

std::size_t RunConfig::dims() const { return 2 * encoding_length(space.n_intermediate); }

int RunConfig::input_size() const { return encoder.input_size > 0 ? encoder.input_size : data.augment.crop_size; }

EncoderConfig RunConfig::encoder_config() const {
  EncoderConfig e;
  e.layers = encoder.layers;
  e.channels = encoder.channels;
  e.input_height = input_size();
  e.input_width = input_size();
  e.proj_dim = contrastive.proj_dim;
  e.views = contrastive.views;
  e.reduction_at = encoder.reduction_fractions;
  e.view_head = encoder.view_head;
  return e;
}

void RunConfig::validate() const {
  if (space.n_intermediate < 1) throw ConfigError("space.n_intermediate", "must be >= 1");
  if (space.vocab < 1) throw ConfigError("space.vocab", "must be >= 1");

  if (data.source != "synthetic" && data.source != "cifar10") {
    throw ConfigError("data.source", "expected \"synthetic\" or \"cifar10\", got \"" + data.source + "\"");
  }
  if (data.source == "cifar10" && data.path.empty()) throw ConfigError("data.path", "required for cifar10");
  if (!(data.fraction > 0.0 && data.fraction <= 1.0)) throw ConfigError("data.fraction", "must lie in (0, 1]");
  const auto& y = data.synthetic;
  if (y.n_images < 2) throw ConfigError("data.synthetic.n_images", "must be >= 2");
  if (y.n_classes < 1) throw ConfigError("data.synthetic.n_classes", "must be >= 1");
  if (y.height < kMinImageSide) throw ConfigError("data.synthetic.height", "must be >= 8");
  if (y.width < kMinImageSide) throw ConfigError("data.synthetic.width", "must be >= 8");
  if (y.blobs_per_class < 1) throw ConfigError("data.synthetic.blobs_per_class", "must be >= 1");
  if (!(y.blob_sigma > 0.0)) throw ConfigError("data.synthetic.blob_sigma", "must be > 0");
  if (!(y.jitter >= 0.0)) throw ConfigError("data.synthetic.jitter", "must be >= 0");
  if (!(y.noise >= 0.0)) throw ConfigError("data.synthetic.noise", "must be >= 0");
  const auto& a = data.augment;
  if (a.crop_size < 1) throw ConfigError("data.augment.crop", "must be >= 1");
  if (a.pad < 0) throw ConfigError("data.augment.pad", "must be >= 0");
  for (auto [p, k] : {std::pair{a.p_hflip, "data.augment.p_hflip"}, std::pair{a.p_vflip, "data.augment.p_vflip"},
                      std::pair{a.p_gray, "data.augment.p_gray"}}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(k, "must lie in [0, 1]");
  }
  const int side = data.source == "cifar10" ? kCifarSide : std::min(y.height, y.width);
  if (a.crop_size > side) throw ConfigError("data.augment.crop", "exceeds the image size");

  if (contrastive.views < 1) throw ConfigError("contrastive.views", "must be >= 1");
  if (!(contrastive.temperature > 0.0)) throw ConfigError("contrastive.temperature", "must be > 0");
  if (!(contrastive.blend >= 0.0 && contrastive.blend <= 1.0)) throw ConfigError("contrastive.blend", "must lie in [0, 1]");
  if (contrastive.proj_dim < 1) throw ConfigError("contrastive.proj_dim", "must be >= 1");
  if (!(contrastive.bank_momentum >= 0.0 && contrastive.bank_momentum < 1.0)) {
    throw ConfigError("contrastive.bank_momentum", "must lie in [0, 1)");
  }

  if (encoder.layers < 3) throw ConfigError("encoder.layers", "must be >= 3");
  if (encoder.channels < 1) throw ConfigError("encoder.channels", "must be >= 1");
  if (encoder.input_size < 0) throw ConfigError("encoder.input_size", "must be >= 0");
  if (encoder.input_size > 0 && encoder.input_size != a.crop_size) {
    throw ConfigError("encoder.input_size", "must equal data.augment.crop (or be omitted)");
  }
  if (input_size() % 4 != 0) throw ConfigError("encoder.input_size", "must be a multiple of 4");
  for (const auto& f : encoder.reduction_fractions) {
    if (f.den <= 0 || f.num < 0 || f.num >= f.den) {
      throw ConfigError("encoder.reduction_fractions", "each fraction must lie in [0, 1)");
    }
  }

  tpe.validate();
  if (tpe.vocab != space.vocab) throw ConfigError("space.vocab", "optimizer vocabulary differs from the space");

  const auto& e = evaluator;
  if (e.kind != "contrastive" && e.kind != "tabular") {
    throw ConfigError("evaluator.kind", "expected \"contrastive\" or \"tabular\", got \"" + e.kind + "\"");
  }
  if (e.kind == "contrastive" && space.vocab != kVocabSize) {
    throw ConfigError("space.vocab", "the contrastive evaluator needs the 8-operation vocabulary");
  }
  if (e.epochs < 0) throw ConfigError("evaluator.epochs", "must be >= 0");
  if (e.batch_size < 2) throw ConfigError("evaluator.batch_size", "must be >= 2");
  if (!(e.lr > 0.0)) throw ConfigError("evaluator.lr", "must be > 0");
  if (!(e.momentum >= 0.0 && e.momentum < 1.0)) throw ConfigError("evaluator.momentum", "must lie in [0, 1)");
  const auto& t = e.tabular;
  if (t.kind != "indicator" && t.kind != "table") {
    throw ConfigError("evaluator.tabular.kind", "expected \"indicator\" or \"table\", got \"" + t.kind + "\"");
  }
  if (t.target < 0 || t.target >= space.vocab) throw ConfigError("evaluator.tabular.target", "outside the vocabulary");
  if (!(t.noise >= 0.0)) throw ConfigError("evaluator.tabular.noise", "must be >= 0");
  if (e.kind == "tabular" && t.kind == "table") {
    if (t.costs.size() != dims()) {
      throw ConfigError("evaluator.tabular.costs", "needs one row per architecture dimension (" +
                                                       std::to_string(dims()) + ")");
    }
    for (const auto& row : t.costs) {
      if (row.size() != static_cast<std::size_t>(space.vocab)) {
        throw ConfigError("evaluator.tabular.costs", "each row needs one cost per operation");
      }
    }
  }
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed config: ") + e.what());
  }
  RunConfig c;
  Section root(j, "");
  if (auto s = root.child("space")) parse_space(std::move(*s), c);
  if (auto s = root.child("data")) parse_data(std::move(*s), c);
  if (auto s = root.child("contrastive")) parse_contrastive(std::move(*s), c);
  if (auto s = root.child("encoder")) parse_encoder(std::move(*s), c);
  if (auto s = root.child("tpe")) parse_tpe(std::move(*s), c);
  if (auto s = root.child("evaluator")) parse_evaluator(std::move(*s), c);
  if (auto s = root.child("output")) parse_output(std::move(*s), c);
  root.get("seed", c.seed, 0);
  root.finish();
  c.tpe.vocab = c.space.vocab;
  c.data.synthetic.seed = c.data.seed;
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path, std::string* raw_text) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("<file>", "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  const auto text = ss.str();
  auto config = parse_config(text);
  if (raw_text != nullptr) *raw_text = text;
  return config;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["space"] = {{"n_intermediate", c.space.n_intermediate}, {"vocab", c.space.vocab}};
  const auto& d = c.data;
  const auto& y = d.synthetic;
  const auto& a = d.augment;
  j["data"] = {{"source", d.source},
               {"path", d.path},
               {"fraction", d.fraction},
               {"balanced", d.balanced},
               {"seed", d.seed},
               {"synthetic",
                {{"n_images", y.n_images},
                 {"n_classes", y.n_classes},
                 {"height", y.height},
                 {"width", y.width},
                 {"blobs_per_class", y.blobs_per_class},
                 {"blob_sigma", y.blob_sigma},
                 {"jitter", y.jitter},
                 {"noise", y.noise}}},
               {"augment",
                {{"crop", a.crop_size},
                 {"pad", a.pad},
                 {"center_crop", a.center_crop},
                 {"p_hflip", a.p_hflip},
                 {"p_vflip", a.p_vflip},
                 {"p_gray", a.p_gray}}}};
  const auto& x = c.contrastive;
  j["contrastive"] = {{"views", x.views},
                      {"temperature", x.temperature},
                      {"blend", x.blend},
                      {"proj_dim", x.proj_dim},
                      {"bank_momentum", x.bank_momentum}};
  ordered_json fr = ordered_json::array();
  for (const auto& f : c.encoder.reduction_fractions) fr.push_back({f.num, f.den});
  j["encoder"] = {{"layers", c.encoder.layers},
                  {"channels", c.encoder.channels},
                  {"input_size", c.input_size()},
                  {"reduction_fractions", fr},
                  {"view_head", view_head_name(c.encoder.view_head)}};
  const auto& t = c.tpe;
  j["tpe"] = {{"gamma", t.gamma},
              {"n_startup", t.n_startup},
              {"n_candidates", t.n_candidates},
              {"top_fraction", t.top_fraction},
              {"prior_weight", t.prior_weight},
              {"iterations", t.iterations},
              {"workers", t.workers},
              {"selection", selection_name(t.selection)}};
  const auto& e = c.evaluator;
  j["evaluator"] = {{"kind", e.kind},
                    {"epochs", e.epochs},
                    {"batch_size", e.batch_size},
                    {"lr", e.lr},
                    {"momentum", e.momentum},
                    {"tabular",
                     {{"kind", e.tabular.kind},
                      {"target", e.tabular.target},
                      {"costs", e.tabular.costs},
                      {"noise", e.tabular.noise}}}};
  j["seed"] = c.seed;
  j["output"] = {{"record_wall_time", c.output.record_wall_time}};
  return j;
}

std::string config_hash(const RunConfig& config) { return sha256_hex(to_json(config).dump()); }

void apply_seed_env(RunConfig& config) {
  const char* env = std::getenv("CSNAS_SEED");
  if (env == nullptr || *env == '\0') return;
  const std::string s(env);
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError("CSNAS_SEED", "expected a non-negative integer, got \"" + s + "\"");
  config.seed = v;
}

}  // namespace csnas
