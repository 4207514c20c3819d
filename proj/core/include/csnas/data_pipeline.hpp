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
#include <vector>

#include "csnas/rng.hpp"

namespace csnas {

/// RGB image, channel-major (C, H, W), values in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int height, int width);  // black
  Image(int height, int width, std::vector<double> pixels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  static constexpr int channels() noexcept { return 3; }

  double& at(int c, int y, int x) { return pixels_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return pixels_[index(c, y, x)]; }
  const std::vector<double>& pixels() const noexcept { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }
  int height_ = 0;
  int width_ = 0;
  std::vector<double> pixels_;
};

/// One unlabeled training example. Class labels are consumed during subset
/// selection and never stored.
struct Sample {
  std::uint64_t id = 0;
  Image image;
};

struct Dataset {
  std::string source;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  /// SHA-256 over the sample ids and pixel contents.
  std::string fingerprint() const;
};

/// Smallest accepted ingestion size.
inline constexpr int kMinImageSide = 8;

/// Reads the CIFAR-10 binary batches (data_batch_1.bin .. data_batch_5.bin)
/// found under `path` (a directory, or one batch file). Each record is one
/// label byte followed by 3072 bytes of R, G, B planes (32x32 each).
///
/// Returns floor(fraction * records) images, sorted by record index. With
/// `class_balanced` each label contributes floor(count / 10) images, the
/// remainder going one each to the lowest labels.
Dataset load_cifar10_subset(const std::filesystem::path& path, double fraction, bool class_balanced,
                            std::uint64_t seed);

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr int kCifarSide = 32;
inline constexpr int kCifarClasses = 10;

/// Gaussian-blob images. Each class owns a fixed set of colored blobs; every
/// image jitters its class's blobs and adds pixel noise.
struct SyntheticConfig {
  int n_images = 64;
  int n_classes = 4;
  int height = 16;
  int width = 16;
  int blobs_per_class = 3;
  double blob_sigma = 2.5;
  double jitter = 1.0;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

Dataset make_synthetic_dataset(const SyntheticConfig& cfg);

struct AugmentPolicy {
  int crop_size = 32;
  int pad = 4;  // reflect padding applied before a random crop
  bool center_crop = false;
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  double p_gray = 0.2;
};

/// pad -> crop -> horizontal flip -> vertical flip -> grayscale.
/// Consumes the same number of variates from `rng` for every input.
Image augment(const Image& x, const AugmentPolicy& policy, Rng& rng);

/// Deterministic center crop to `size` (no padding).
Image center_crop(const Image& x, int size);

struct ViewSet {
  std::uint64_t sample_id = 0;
  Image original;  // center-cropped to the view size
  std::vector<Image> views;
};

struct ViewRef {
  std::size_t anchor;
  std::size_t view;
  friend auto operator<=>(const ViewRef&, const ViewRef&) = default;
};

struct Minibatch {
  std::vector<ViewSet> items;
  std::size_t views = 0;

  std::size_t size() const noexcept { return items.size(); }
  /// The M(K-1) views belonging to every other anchor.
  std::vector<ViewRef> negatives_of(std::size_t anchor) const;
};

/// Draws K distinct samples uniformly, then M augmented views of each.
Minibatch make_minibatch(const Dataset& data, std::size_t batch_size, std::size_t views,
                         const AugmentPolicy& policy, Rng& rng);

/// Views for an explicit list of dataset positions.
Minibatch make_minibatch_from(const Dataset& data, std::span<const std::size_t> positions,
                              std::size_t views, const AugmentPolicy& policy, Rng& rng);

}  // namespace csnas
