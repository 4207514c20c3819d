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

#include "csnas/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "csnas/errors.hpp"
#include "csnas/hashing.hpp"

namespace csnas {

namespace fs = std::filesystem;

namespace {

int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Image::Image(int height, int width) : Image(height, width, std::vector<double>(3ULL * height * width, 0.0)) {}

Image::Image(int height, int width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height < 1 || width < 1) throw ShapeError("image dimensions must be positive");
  if (pixels_.size() != 3ULL * height * width) throw ShapeError("pixel buffer does not match 3 x H x W");
}

std::string Dataset::fingerprint() const {
  Sha256 h;
  h.update(source).update_u64(samples.size());
  for (const auto& s : samples) {
    h.update_u64(s.id).update_u64(static_cast<std::uint64_t>(s.image.height()))
        .update_u64(static_cast<std::uint64_t>(s.image.width()));
    for (double v : s.image.pixels()) h.update_f64(v);
  }
  return h.hex_digest();
}

Dataset load_cifar10_subset(const fs::path& path, double fraction, bool class_balanced, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("data.fraction", "must lie in (0, 1], got " + std::to_string(fraction));
  }
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (int b = 1; b <= 5; ++b) {
      const auto f = path / ("data_batch_" + std::to_string(b) + ".bin");
      if (fs::exists(f)) files.push_back(f);
    }
  } else if (fs::exists(path)) {
    files.push_back(path);
  }
  if (files.empty()) throw FormatError("no CIFAR-10 batch files found at " + path.string());

  std::vector<std::uint8_t> labels;
  std::vector<std::vector<std::uint8_t>> blobs;
  for (const auto& f : files) {
    auto bytes = read_file(f);
    if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
      throw FormatError(f.string() + ": size " + std::to_string(bytes.size()) +
                        " is not a positive multiple of the 3073-byte record");
    }
    for (std::size_t off = 0; off < bytes.size(); off += kCifarRecordBytes) {
      if (bytes[off] >= kCifarClasses) {
        throw FormatError(f.string() + ": label " + std::to_string(bytes[off]) + " at record " +
                          std::to_string(off / kCifarRecordBytes) + " out of range");
      }
      labels.push_back(bytes[off]);
    }
    blobs.push_back(std::move(bytes));
  }

  const std::size_t total = labels.size();
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
  if (count == 0) throw ConfigError("data.fraction", "selects no images");

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  if (class_balanced) {
    std::vector<std::vector<std::size_t>> by_class(kCifarClasses);
    for (std::size_t i = 0; i < total; ++i) by_class[labels[i]].push_back(i);
    for (int c = 0; c < kCifarClasses; ++c) {
      const std::size_t quota = count / kCifarClasses + (static_cast<std::size_t>(c) < count % kCifarClasses ? 1 : 0);
      auto& pool = by_class[static_cast<std::size_t>(c)];
      if (pool.size() < quota) {
        throw ConfigError("data.fraction", "class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                                               " images, " + std::to_string(quota) + " required for balancing");
      }
      shuffle(pool, rng);
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota));
    }
  } else {
    std::vector<std::size_t> all(total);
    for (std::size_t i = 0; i < total; ++i) all[i] = i;
    shuffle(all, rng);
    chosen.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
  }
  std::sort(chosen.begin(), chosen.end());

  // Record index -> (file, offset) using the per-file record counts.
  std::vector<std::size_t> starts;
  std::size_t acc = 0;
  for (const auto& b : blobs) {
    starts.push_back(acc);
    acc += b.size() / kCifarRecordBytes;
  }

  Dataset ds;
  ds.source = "cifar10";
  ds.samples.reserve(chosen.size());
  constexpr int plane = kCifarSide * kCifarSide;
  for (std::size_t id : chosen) {
    const auto fi = static_cast<std::size_t>(std::upper_bound(starts.begin(), starts.end(), id) - starts.begin() - 1);
    const std::uint8_t* rec = blobs[fi].data() + (id - starts[fi]) * kCifarRecordBytes + 1;
    std::vector<double> px(3 * plane);
    for (int k = 0; k < 3 * plane; ++k) px[static_cast<std::size_t>(k)] = rec[k] / 255.0;
    ds.samples.push_back({id, Image(kCifarSide, kCifarSide, std::move(px))});
  }
  return ds;
}

Dataset make_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.n_images < 1) throw ConfigError("data.synthetic.n_images", "must be positive");
  if (cfg.n_classes < 1) throw ConfigError("data.synthetic.n_classes", "must be positive");
  if (cfg.height < kMinImageSide || cfg.width < kMinImageSide) {
    throw ConfigError("data.synthetic.height", "images must be at least 8x8");
  }
  if (cfg.blobs_per_class < 1) throw ConfigError("data.synthetic.blobs_per_class", "must be positive");
  if (!(cfg.blob_sigma > 0.0)) throw ConfigError("data.synthetic.blob_sigma", "must be positive");

  Rng rng(derive_seed(cfg.seed, {0x5157}));
  struct Blob {
    double cy, cx;
    double color[3];
  };
  std::vector<std::vector<Blob>> protos(static_cast<std::size_t>(cfg.n_classes));
  for (auto& blobs : protos) {
    for (int b = 0; b < cfg.blobs_per_class; ++b) {
      Blob blob{rng.uniform(0.0, cfg.height - 1.0), rng.uniform(0.0, cfg.width - 1.0), {}};
      for (double& c : blob.color) c = rng.uniform(-0.5, 0.5);
      blobs.push_back(blob);
    }
  }

  Dataset ds;
  ds.source = "synthetic";
  ds.samples.reserve(static_cast<std::size_t>(cfg.n_images));
  const double inv2s2 = 1.0 / (2.0 * cfg.blob_sigma * cfg.blob_sigma);
  for (int n = 0; n < cfg.n_images; ++n) {
    const auto& blobs = protos[static_cast<std::size_t>(n % cfg.n_classes)];
    Image img(cfg.height, cfg.width);
    double base[3];
    for (double& b : base) b = rng.uniform(0.35, 0.65);
    std::vector<Blob> placed = blobs;
    for (auto& blob : placed) {
      blob.cy += cfg.jitter * rng.normal();
      blob.cx += cfg.jitter * rng.normal();
    }
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
          double v = base[c];
          for (const auto& blob : placed) {
            const double dy = y - blob.cy;
            const double dx = x - blob.cx;
            v += blob.color[c] * std::exp(-(dy * dy + dx * dx) * inv2s2);
          }
          v += cfg.noise * rng.normal();
          img.at(c, y, x) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    ds.samples.push_back({static_cast<std::uint64_t>(n), std::move(img)});
  }
  return ds;
}

Image center_crop(const Image& x, int size) {
  if (size < 1 || size > x.height() || size > x.width()) {
    throw ConfigError("data.augment.crop", "crop size " + std::to_string(size) + " does not fit a " +
                                               std::to_string(x.height()) + "x" + std::to_string(x.width()) + " image");
  }
  const int oy = (x.height() - size) / 2;
  const int ox = (x.width() - size) / 2;
  Image out(size, size);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int xx = 0; xx < size; ++xx) out.at(c, y, xx) = x.at(c, y + oy, xx + ox);
  return out;
}

Image augment(const Image& x, const AugmentPolicy& policy, Rng& rng) {
  const int h = x.height();
  const int w = x.width();
  const int pad = policy.center_crop ? 0 : policy.pad;
  const int crop = policy.crop_size;
  if (pad < 0 || pad >= std::min(h, w)) throw ConfigError("data.augment.pad", "reflect padding must lie in [0, min(H, W))");
  if (crop < 1 || crop > std::min(h, w)) {
    throw ConfigError("data.augment.crop", "crop size " + std::to_string(crop) + " does not fit a " +
                                               std::to_string(h) + "x" + std::to_string(w) + " image");
  }
  const int ph = h + 2 * pad;
  const int pw = w + 2 * pad;
  int oy;
  int ox;
  if (policy.center_crop) {
    oy = (ph - crop) / 2;
    ox = (pw - crop) / 2;
  } else {
    oy = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(ph - crop + 1)));
    ox = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(pw - crop + 1)));
  }
  const bool hflip = rng.uniform01() < policy.p_hflip;
  const bool vflip = rng.uniform01() < policy.p_vflip;
  const bool gray = rng.uniform01() < policy.p_gray;

  Image out(crop, crop);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < crop; ++y) {
      const int sy = reflect((vflip ? crop - 1 - y : y) + oy - pad, h);
      for (int xx = 0; xx < crop; ++xx) {
        const int sx = reflect((hflip ? crop - 1 - xx : xx) + ox - pad, w);
        out.at(c, y, xx) = x.at(c, sy, sx);
      }
    }
  }
  if (gray) {
    for (int y = 0; y < crop; ++y) {
      for (int xx = 0; xx < crop; ++xx) {
        const double luma =
            std::min(1.0, 0.299 * out.at(0, y, xx) + 0.587 * out.at(1, y, xx) + 0.114 * out.at(2, y, xx));
        for (int c = 0; c < 3; ++c) out.at(c, y, xx) = luma;
      }
    }
  }
  return out;
}

std::vector<ViewRef> Minibatch::negatives_of(std::size_t anchor) const {
  std::vector<ViewRef> out;
  out.reserve(views * (items.size() - 1));
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (j == anchor) continue;
    for (std::size_t m = 0; m < views; ++m) out.push_back({j, m});
  }
  return out;
}

Minibatch make_minibatch_from(const Dataset& data, std::span<const std::size_t> positions, std::size_t views,
                              const AugmentPolicy& policy, Rng& rng) {
  if (views < 1) throw ConfigError("contrastive.views", "must be >= 1");
  Minibatch mb;
  mb.views = views;
  mb.items.reserve(positions.size());
  for (std::size_t pos : positions) {
    if (pos >= data.size()) throw ShapeError("minibatch position out of range");
    const auto& s = data.samples[pos];
    ViewSet vs;
    vs.sample_id = s.id;
    vs.original = center_crop(s.image, std::min({policy.crop_size, s.image.height(), s.image.width()}));
    vs.views.reserve(views);
    for (std::size_t m = 0; m < views; ++m) vs.views.push_back(augment(s.image, policy, rng));
    mb.items.push_back(std::move(vs));
  }
  return mb;
}

Minibatch make_minibatch(const Dataset& data, std::size_t batch_size, std::size_t views, const AugmentPolicy& policy,
                         Rng& rng) {
  if (batch_size < 2) throw ConfigError("evaluator.batch_size", "must be >= 2");
  if (batch_size > data.size()) {
    throw ConfigError("evaluator.batch_size", "batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                                                  std::to_string(data.size()));
  }
  // Partial Fisher-Yates: the first K slots are a uniform K-subset.
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto j = i + rng.uniform_index(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch_size);
  return make_minibatch_from(data, idx, views, policy, rng);
}

}  // namespace csnas
