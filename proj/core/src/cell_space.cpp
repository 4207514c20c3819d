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

#include "csnas/cell_space.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csnas/errors.hpp"
#include "csnas/rng.hpp"

namespace csnas {

namespace {

constexpr std::array<std::string_view, kVocabSize> kOpNames = {
    "sep_conv_3x3", "sep_conv_5x5", "dil_conv_3x3", "dil_conv_5x5",
    "max_pool_3x3", "avg_pool_3x3", "identity",     "zero"};

void check_n(int n_intermediate) {
  if (n_intermediate < 1) {
    throw InvalidSpaceError("number of intermediate nodes must be >= 1, got " +
                            std::to_string(n_intermediate));
  }
}

std::string dot_node(int node, int n_intermediate) {
  if (node == 0) return "c_{k-2}";
  if (node == 1) return "c_{k-1}";
  if (node == n_intermediate + 2) return "out";
  return "n" + std::to_string(node - 2);
}

void write_dot_cell(std::ostringstream& os, std::string_view name, const CellEncoding& enc) {
  const CellGraph g = decode(enc);
  os << "digraph " << name << " {\n";
  os << "  rankdir=LR;\n";
  for (int v = 0; v < g.node_count(); ++v) os << "  \"" << dot_node(v, g.n_intermediate) << "\";\n";
  for (const auto& e : g.edges) {
    os << "  \"" << dot_node(e.src, g.n_intermediate) << "\" -> \""
       << dot_node(e.dst, g.n_intermediate) << "\" [label=\"" << op_name(e.op)
       << "\", style=dashed];\n";
  }
  for (int j = 0; j < g.n_intermediate; ++j) {
    os << "  \"" << dot_node(j + 2, g.n_intermediate) << "\" -> \"out\" [style=solid];\n";
  }
  os << "}\n";
}

}  // namespace

std::string_view op_name(OperationKind op) {
  const auto code = static_cast<std::size_t>(op);
  if (code >= kOpNames.size()) throw EncodingError("unknown operation code", code);
  return kOpNames[code];
}

OperationKind op_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<OperationKind>(i);
  }
  throw Error("unknown operation name '" + std::string(name) + "'");
}

int encoding_length(int n_intermediate) {
  check_n(n_intermediate);
  // sum_{i=2}^{N+1} i
  return (n_intermediate + 1) * (n_intermediate + 2) / 2 - 1;
}

int edge_position(int src, int dst_intermediate) {
  // Group j holds j+2 sources and starts after groups 0..j-1.
  return dst_intermediate * (dst_intermediate + 3) / 2 + src;
}

boost::multiprecision::cpp_int space_cardinality(int n_intermediate, int vocab_size) {
  check_n(n_intermediate);
  if (vocab_size < 1) throw InvalidSpaceError("vocabulary size must be >= 1");
  const boost::multiprecision::cpp_int base(vocab_size);
  const boost::multiprecision::cpp_int per_cell =
      boost::multiprecision::pow(base, static_cast<unsigned>(encoding_length(n_intermediate)));
  return per_cell * per_cell;
}

CellEncoding::CellEncoding(int n_intermediate, std::vector<OperationKind> ops)
    : n_intermediate_(n_intermediate), ops_(std::move(ops)) {
  const auto expected = static_cast<std::size_t>(encoding_length(n_intermediate));
  if (ops_.size() != expected) {
    throw EncodingError("cell encoding has length " + std::to_string(ops_.size()) + ", expected " +
                            std::to_string(expected),
                        std::min(ops_.size(), expected));
  }
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    if (static_cast<int>(ops_[i]) >= kVocabSize) throw EncodingError("operation code out of range", i);
  }
}

CellEncoding CellEncoding::from_codes(int n_intermediate, std::span<const int> codes) {
  std::vector<OperationKind> ops;
  ops.reserve(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] < 0 || codes[i] >= kVocabSize) {
      throw EncodingError("operation code " + std::to_string(codes[i]) + " out of range 0..7", i);
    }
    ops.push_back(static_cast<OperationKind>(codes[i]));
  }
  return CellEncoding(n_intermediate, std::move(ops));
}

std::vector<int> CellEncoding::codes() const {
  std::vector<int> out(ops_.size());
  std::transform(ops_.begin(), ops_.end(), out.begin(), [](OperationKind op) { return op_code(op); });
  return out;
}

std::vector<int> Genotype::theta() const {
  auto out = normal.codes();
  const auto r = reduction.codes();
  out.insert(out.end(), r.begin(), r.end());
  return out;
}

Genotype Genotype::from_theta(int n_intermediate, std::span<const int> theta) {
  const auto len = static_cast<std::size_t>(encoding_length(n_intermediate));
  if (theta.size() != 2 * len) {
    throw EncodingError("architecture vector has length " + std::to_string(theta.size()) +
                            ", expected " + std::to_string(2 * len),
                        std::min(theta.size(), 2 * len));
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (theta[i] < 0 || theta[i] >= kVocabSize) {
      throw EncodingError("operation code " + std::to_string(theta[i]) + " out of range 0..7", i);
    }
  }
  return Genotype{CellEncoding::from_codes(n_intermediate, theta.first(len)),
                  CellEncoding::from_codes(n_intermediate, theta.subspan(len))};
}

CellGraph decode(const CellEncoding& enc) {
  CellGraph g;
  g.n_intermediate = enc.n_intermediate();
  for (int j = 0; j < g.n_intermediate; ++j) {
    for (int src = 0; src < j + 2; ++src) {
      const auto op = enc.op_at(src, j);
      if (op != OperationKind::zero) g.edges.push_back({src, j + 2, op});
    }
  }
  return g;
}

CellEncoding encode(const CellGraph& graph) {
  const int n = graph.n_intermediate;
  std::vector<OperationKind> ops(static_cast<std::size_t>(encoding_length(n)), OperationKind::zero);
  std::vector<bool> seen(ops.size(), false);
  for (std::size_t k = 0; k < graph.edges.size(); ++k) {
    const auto& e = graph.edges[k];
    if (e.dst < 2 || e.dst > n + 1 || e.src < 0 || e.src >= e.dst) {
      throw EncodingError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                              ") is not a forward edge into an intermediate node",
                          k);
    }
    if (e.op == OperationKind::zero) throw EncodingError("graph lists an explicit zero edge", k);
    const auto pos = static_cast<std::size_t>(edge_position(e.src, e.dst - 2));
    if (seen[pos]) throw EncodingError("duplicate edge", k);
    seen[pos] = true;
    ops[pos] = e.op;
  }
  return CellEncoding(n, std::move(ops));
}

CellEncoding random_encoding(int n_intermediate, std::uint64_t seed) {
  const int len = encoding_length(n_intermediate);
  Rng rng(seed);
  std::vector<OperationKind> ops(static_cast<std::size_t>(len));
  for (auto& op : ops) op = static_cast<OperationKind>(rng.uniform_index(kVocabSize));
  return CellEncoding(n_intermediate, std::move(ops));
}

Genotype random_genotype(int n_intermediate, std::uint64_t seed) {
  return Genotype{random_encoding(n_intermediate, derive_seed(seed, {0})),
                  random_encoding(n_intermediate, derive_seed(seed, {1}))};
}

GenotypeFormat parse_genotype_format(std::string_view name) {
  if (name == "json") return GenotypeFormat::json;
  if (name == "dot") return GenotypeFormat::dot;
  throw ConfigError("format", "unsupported genotype format '" + std::string(name) + "' (expected json or dot)");
}

std::string export_genotype(const Genotype& g, GenotypeFormat format) {
  if (format == GenotypeFormat::json) {
    nlohmann::ordered_json j;
    j["version"] = kGenotypeFormatVersion;
    j["n_intermediate"] = g.n_intermediate();
    j["normal"] = g.normal.codes();
    j["reduction"] = g.reduction.codes();
    return j.dump(2) + "\n";
  }
  std::ostringstream os;
  write_dot_cell(os, "normal", g.normal);
  os << "\n";
  write_dot_cell(os, "reduction", g.reduction);
  return os.str();
}

Genotype import_genotype_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("genotype JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("genotype JSON: top level must be an object");
  for (const char* key : {"version", "n_intermediate", "normal", "reduction"}) {
    if (!j.contains(key)) throw FormatError(std::string("genotype JSON: missing key '") + key + "'");
  }
  if (j["version"] != kGenotypeFormatVersion) throw FormatError("genotype JSON: unsupported version");
  try {
    const int n = j["n_intermediate"].get<int>();
    const auto normal = j["normal"].get<std::vector<int>>();
    const auto reduction = j["reduction"].get<std::vector<int>>();
    return Genotype{CellEncoding::from_codes(n, normal), CellEncoding::from_codes(n, reduction)};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("genotype JSON: ") + e.what());
  }
}

}  // namespace csnas
