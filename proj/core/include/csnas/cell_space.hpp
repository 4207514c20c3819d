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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace csnas {

/// Edge operation vocabulary. The numeric value is the stable code used in
/// encodings, trial logs and genotype files.
enum class OperationKind : std::uint8_t {
  sep_conv_3x3 = 0,
  sep_conv_5x5 = 1,
  dil_conv_3x3 = 2,
  dil_conv_5x5 = 3,
  max_pool_3x3 = 4,
  avg_pool_3x3 = 5,
  identity = 6,
  zero = 7,  // no connection
};

inline constexpr int kVocabSize = 8;

inline constexpr std::array<OperationKind, kVocabSize> kAllOperations = {
    OperationKind::sep_conv_3x3, OperationKind::sep_conv_5x5, OperationKind::dil_conv_3x3,
    OperationKind::dil_conv_5x5, OperationKind::max_pool_3x3, OperationKind::avg_pool_3x3,
    OperationKind::identity,     OperationKind::zero};

std::string_view op_name(OperationKind op);
OperationKind op_from_name(std::string_view name);
constexpr int op_code(OperationKind op) { return static_cast<int>(op); }

/// Number of candidate edges of a cell with `n_intermediate` intermediate
/// nodes: sum_{i=2}^{N+1} i. Throws InvalidSpaceError for N < 1.
int encoding_length(int n_intermediate);

/// Position of edge (src -> intermediate `dst_intermediate`) in a cell
/// encoding. Destination-major, source-minor.
int edge_position(int src, int dst_intermediate);

/// Exact size of the architecture space: (vocab^{encoding_length(N)})^2.
boost::multiprecision::cpp_int space_cardinality(int n_intermediate, int vocab_size = kVocabSize);

/// Categorical vector for one cell.
class CellEncoding {
 public:
  CellEncoding(int n_intermediate, std::vector<OperationKind> ops);

  /// Validates every code; EncodingError names the first bad index.
  static CellEncoding from_codes(int n_intermediate, std::span<const int> codes);

  int n_intermediate() const noexcept { return n_intermediate_; }
  std::size_t size() const noexcept { return ops_.size(); }
  std::span<const OperationKind> ops() const noexcept { return ops_; }
  OperationKind operator[](std::size_t i) const { return ops_[i]; }
  OperationKind op_at(int src, int dst_intermediate) const {
    return ops_[static_cast<std::size_t>(edge_position(src, dst_intermediate))];
  }
  std::vector<int> codes() const;

  friend bool operator==(const CellEncoding&, const CellEncoding&) = default;

 private:
  int n_intermediate_;
  std::vector<OperationKind> ops_;
};

/// Normal + reduction cell pair.
struct Genotype {
  CellEncoding normal;
  CellEncoding reduction;

  int n_intermediate() const noexcept { return normal.n_intermediate(); }

  /// normal ++ reduction codes (the full search vector).
  std::vector<int> theta() const;
  static Genotype from_theta(int n_intermediate, std::span<const int> theta);

  friend bool operator==(const Genotype&, const Genotype&) = default;
};

struct CellEdge {
  int src;
  int dst;
  OperationKind op;
  friend bool operator==(const CellEdge&, const CellEdge&) = default;
};

/// Cell DAG. Nodes 0 and 1 are the inputs (outputs of cells k-2 and k-1),
/// nodes 2..N+1 the intermediates, node N+2 the output. Only non-zero
/// operation edges are listed, in canonical order; the output node
/// concatenates every intermediate node.
struct CellGraph {
  int n_intermediate = 0;
  std::vector<CellEdge> edges;

  int node_count() const noexcept { return n_intermediate + 3; }
  int output_node() const noexcept { return n_intermediate + 2; }

  friend bool operator==(const CellGraph&, const CellGraph&) = default;
};

CellGraph decode(const CellEncoding& enc);
CellEncoding encode(const CellGraph& graph);

CellEncoding random_encoding(int n_intermediate, std::uint64_t seed);
Genotype random_genotype(int n_intermediate, std::uint64_t seed);

enum class GenotypeFormat { json, dot };

GenotypeFormat parse_genotype_format(std::string_view name);

/// JSON: {"version":1,"n_intermediate":N,"normal":[...],"reduction":[...]}.
/// DOT: one digraph per cell.
std::string export_genotype(const Genotype& g, GenotypeFormat format);
Genotype import_genotype_json(std::string_view text);

inline constexpr int kGenotypeFormatVersion = 1;

}  // namespace csnas
