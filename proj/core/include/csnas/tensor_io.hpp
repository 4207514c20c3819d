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

namespace csnas {

/// Raw tensor file used for fixtures.
///
///   offset  size         field
///   0       4            magic "CSNT"
///   4       4            u32 version (1)
///   8       4            u32 dtype (1 = float64, 2 = uint8)
///   12      4            u32 ndim
///   16      8 * ndim     u64 shape, outermost first
///   ...                  payload, row-major, little-endian
///
/// All integers little-endian.
enum class RawDType : std::uint32_t { float64 = 1, uint8 = 2 };

struct RawTensor {
  RawDType dtype = RawDType::float64;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;  // uint8 payloads are widened

  std::uint64_t element_count() const;
};

std::string encode_raw_tensor(const RawTensor& t);
RawTensor decode_raw_tensor(std::span<const std::uint8_t> bytes);

void write_raw_tensor(const std::filesystem::path& path, const RawTensor& t);
RawTensor read_raw_tensor(const std::filesystem::path& path);

/// Little-endian helpers shared by the binary formats.
namespace le {
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::uint8_t u8();
  std::span<const std::uint8_t> take(std::size_t n);
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};
}  // namespace le

}  // namespace csnas
