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

#include "csnas/tensor_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "csnas/errors.hpp"

namespace csnas {

namespace le {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::span<const std::uint8_t> Reader::take(std::size_t n) {
  if (n > remaining()) throw FormatError("unexpected end of binary data");
  auto s = bytes_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint8_t Reader::u8() { return take(1)[0]; }

std::uint32_t Reader::u32() {
  const auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

std::uint64_t Reader::u64() {
  const auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

}  // namespace le

namespace {
constexpr char kMagic[4] = {'C', 'S', 'N', 'T'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::uint64_t RawTensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string encode_raw_tensor(const RawTensor& t) {
  if (t.element_count() != t.values.size()) throw ShapeError("raw tensor: shape does not match payload");
  std::string out(kMagic, 4);
  le::put_u32(out, kVersion);
  le::put_u32(out, static_cast<std::uint32_t>(t.dtype));
  le::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) le::put_u64(out, d);
  for (double v : t.values) {
    if (t.dtype == RawDType::float64) {
      le::put_f64(out, v);
    } else {
      if (!(v >= 0.0 && v <= 255.0) || v != static_cast<double>(static_cast<std::uint8_t>(v))) {
        throw FormatError("raw tensor: value not representable as uint8");
      }
      out.push_back(static_cast<char>(static_cast<std::uint8_t>(v)));
    }
  }
  return out;
}

RawTensor decode_raw_tensor(std::span<const std::uint8_t> bytes) {
  le::Reader r(bytes);
  const auto magic = r.take(4);
  for (int i = 0; i < 4; ++i) {
    if (magic[static_cast<std::size_t>(i)] != static_cast<std::uint8_t>(kMagic[i])) {
      throw FormatError("raw tensor: bad magic");
    }
  }
  if (r.u32() != kVersion) throw FormatError("raw tensor: unsupported version");
  RawTensor t;
  const auto dtype = r.u32();
  if (dtype != 1 && dtype != 2) throw FormatError("raw tensor: unknown dtype " + std::to_string(dtype));
  t.dtype = static_cast<RawDType>(dtype);
  const auto ndim = r.u32();
  if (ndim > 16) throw FormatError("raw tensor: implausible rank");
  for (std::uint32_t i = 0; i < ndim; ++i) t.shape.push_back(r.u64());
  const auto n = t.element_count();
  const std::size_t width = t.dtype == RawDType::float64 ? 8 : 1;
  if (r.remaining() != n * width) throw FormatError("raw tensor: payload size does not match shape");
  t.values.resize(n);
  for (auto& v : t.values) v = t.dtype == RawDType::float64 ? r.f64() : static_cast<double>(r.u8());
  return t;
}

void write_raw_tensor(const std::filesystem::path& path, const RawTensor& t) {
  const auto bytes = encode_raw_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

RawTensor read_raw_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_raw_tensor(bytes);
}

}  // namespace csnas
