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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "csnas/errors.hpp"
#include "csnas/rng.hpp"
#include "csnas/tensor_io.hpp"

namespace csnas {

namespace {

bool is_conv(OperationKind op) {
  return op == OperationKind::sep_conv_3x3 || op == OperationKind::sep_conv_5x5 ||
         op == OperationKind::dil_conv_3x3 || op == OperationKind::dil_conv_5x5;
}

int kernel_of(OperationKind op) {
  return (op == OperationKind::sep_conv_5x5 || op == OperationKind::dil_conv_5x5) ? 5 : 3;
}

int dilation_of(OperationKind op) {
  return (op == OperationKind::dil_conv_3x3 || op == OperationKind::dil_conv_5x5) ? 2 : 1;
}

void check_finite(const FeatureMap& m, int layer) {
  if (!m.all_finite()) throw NumericalFault("non-finite activation", layer);
}

constexpr char kCheckpointMagic[4] = {'C', 'S', 'N', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

std::size_t ParameterStore::add(std::string name, std::vector<std::size_t> shape) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  tensors_.push_back({std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
  return tensors_.size() - 1;
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.values.size();
  return n;
}

int ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

GradientStore zeros_like(const ParameterStore& params) {
  GradientStore g;
  g.reserve(params.tensor_count());
  for (const auto& t : params.tensors()) g.emplace_back(t.values.size(), 0.0);
  return g;
}

MiniNetwork::MiniNetwork(const Genotype& genotype, const EncoderConfig& config, std::uint64_t seed)
    : genotype_(genotype), config_(config) {
  const int L = config.layers;
  const int N = genotype.n_intermediate();
  if (L < 3) throw ConfigError("encoder.layers", "must be >= 3");
  if (config.channels < 1) throw ConfigError("encoder.channels", "must be >= 1");
  if (config.proj_dim < 1) throw ConfigError("contrastive.proj_dim", "must be >= 1");
  if (config.views < 1) throw ConfigError("contrastive.views", "must be >= 1");
  if (config.input_height < 4 || config.input_width < 4 || config.input_height % 4 != 0 ||
      config.input_width % 4 != 0) {
    throw ConfigError("encoder.input_size", "input spatial dimensions must be positive multiples of 4");
  }
  for (const auto& f : config.reduction_at) {
    if (f.den <= 0 || f.num < 0) throw ConfigError("encoder.reduction_at", "invalid fraction");
    const int k = L * f.num / f.den;
    if (k < 0 || k >= L) throw ConfigError("encoder.reduction_at", "reduction cell outside the network");
    reduction_cells_.push_back(k);
  }
  std::sort(reduction_cells_.begin(), reduction_cells_.end());
  reduction_cells_.erase(std::unique(reduction_cells_.begin(), reduction_cells_.end()), reduction_cells_.end());

  Rng rng(seed);
  auto make = [&](std::string name, std::vector<std::size_t> shape, int fan_in) {
    const auto idx = params_.add(std::move(name), std::move(shape));
    const double a = std::sqrt(1.0 / fan_in);
    for (double& v : params_[idx].values) v = rng.uniform(-a, a);
    return idx;
  };
  auto conv_shape = [](const ConvSpec& s) {
    return std::vector<std::size_t>{static_cast<std::size_t>(s.out_channels),
                                    static_cast<std::size_t>(s.in_channels / s.groups),
                                    static_cast<std::size_t>(s.kernel), static_cast<std::size_t>(s.kernel)};
  };

  int c_cur = config.channels;
  stem_ = ConvSpec{3, c_cur, 3, 1, 1, 1};
  stem_param_ = make("stem.conv", conv_shape(stem_), stem_.fan_in());

  int pp_c = c_cur, p_c = c_cur;
  int pp_h = config.input_height, p_h = config.input_height;
  int pp_w = config.input_width, p_w = config.input_width;
  for (int k = 0; k < L; ++k) {
    CellModule cell;
    cell.reduction = std::binary_search(reduction_cells_.begin(), reduction_cells_.end(), k);
    if (cell.reduction) {
      c_cur *= 2;
      if (p_h < 2 || p_w < 2 || p_h % 2 != 0 || p_w % 2 != 0) {
        throw ShapeError("shape-infeasible network: reduction cell " + std::to_string(k) + " receives " +
                         std::to_string(p_h) + "x" + std::to_string(p_w) + " maps");
      }
    }
    cell.channels = c_cur;
    int stride0 = 1;
    if (pp_h == 2 * p_h && pp_w == 2 * p_w) {
      stride0 = 2;
    } else if (pp_h != p_h || pp_w != p_w) {
      throw ShapeError("shape-infeasible network: cell " + std::to_string(k) + " inputs are incompatible");
    }
    const std::string prefix = "cell" + std::to_string(k);
    cell.pre0 = ConvSpec{pp_c, c_cur, 1, stride0, 1, 1};
    cell.pre1 = ConvSpec{p_c, c_cur, 1, 1, 1, 1};
    cell.pre0_param = make(prefix + ".pre0", conv_shape(cell.pre0), cell.pre0.fan_in());
    cell.pre1_param = make(prefix + ".pre1", conv_shape(cell.pre1), cell.pre1.fan_in());

    const auto& enc = cell.reduction ? genotype.reduction : genotype.normal;
    for (int j = 0; j < N; ++j) {
      for (int src = 0; src < j + 2; ++src) {
        const auto op = enc.op_at(src, j);
        if (op == OperationKind::zero) continue;
        EdgeModule e{src, j, op, (cell.reduction && src < 2) ? 2 : 1, {}, {}};
        if (is_conv(op)) {
          e.depthwise = ConvSpec{c_cur, c_cur, kernel_of(op), e.stride, dilation_of(op), c_cur};
          e.pointwise = ConvSpec{c_cur, c_cur, 1, 1, 1, 1};
          const std::string ename = prefix + ".edge" + std::to_string(src) + "_" + std::to_string(j + 2);
          e.dw_param = make(ename + ".dw", conv_shape(e.depthwise), e.depthwise.fan_in());
          e.pw_param = make(ename + ".pw", conv_shape(e.pointwise), e.pointwise.fan_in());
        }
        cell.edges.push_back(e);
      }
    }
    cells_.push_back(std::move(cell));

    pp_c = p_c;
    pp_h = p_h;
    pp_w = p_w;
    p_c = N * c_cur;
    if (cells_.back().reduction) {
      p_h /= 2;
      p_w /= 2;
    }
  }
  feature_dim_ = static_cast<std::size_t>(p_c);

  const auto p = static_cast<std::size_t>(config.proj_dim);
  g_w_ = make("g.weight", {p, feature_dim_}, static_cast<int>(feature_dim_));
  g_b_ = make("g.bias", {p}, static_cast<int>(feature_dim_));
  const auto lin = head_input_dim();
  l_w_ = make("l.weight", {p, lin}, static_cast<int>(lin));
  l_b_ = make("l.bias", {p}, static_cast<int>(lin));
}

std::size_t MiniNetwork::head_input_dim() const {
  const auto m = static_cast<std::size_t>(config_.views);
  return config_.view_head == ViewHead::project_then_concat ? m * static_cast<std::size_t>(config_.proj_dim)
                                                            : m * feature_dim_;
}

FeatureMap MiniNetwork::to_feature_map(const Image& x) const {
  if (x.height() != config_.input_height || x.width() != config_.input_width) {
    throw ShapeError("image is " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                     ", encoder expects " + std::to_string(config_.input_height) + "x" +
                     std::to_string(config_.input_width));
  }
  FeatureMap m(3, x.height(), x.width());
  m.data = x.pixels();
  return m;
}

FeatureMap MiniNetwork::edge_forward(const EdgeModule& e, const FeatureMap& in, EdgeCache& cache) const {
  switch (e.op) {
    case OperationKind::sep_conv_3x3:
    case OperationKind::sep_conv_5x5:
    case OperationKind::dil_conv_3x3:
    case OperationKind::dil_conv_5x5:
      cache.relu_out = relu_forward(in);
      cache.dw_out = conv2d_forward(cache.relu_out, params_[e.dw_param].values, e.depthwise);
      return conv2d_forward(cache.dw_out, params_[e.pw_param].values, e.pointwise);
    case OperationKind::max_pool_3x3:
      return max_pool3_forward(in, e.stride);
    case OperationKind::avg_pool_3x3:
      return avg_pool3_forward(in, e.stride);
    case OperationKind::identity:
      return e.stride == 1 ? in : subsample2_forward(in);
    case OperationKind::zero:
      break;
  }
  throw Error("zero edge reached the forward pass");
}

void MiniNetwork::edge_backward(const EdgeModule& e, const FeatureMap& in, const EdgeCache& cache,
                                const FeatureMap& grad_out, FeatureMap& grad_in, GradientStore& grads) const {
  switch (e.op) {
    case OperationKind::sep_conv_3x3:
    case OperationKind::sep_conv_5x5:
    case OperationKind::dil_conv_3x3:
    case OperationKind::dil_conv_5x5: {
      FeatureMap d_dw(cache.dw_out.channels, cache.dw_out.height, cache.dw_out.width);
      conv2d_backward(cache.dw_out, params_[e.pw_param].values, e.pointwise, grad_out, &d_dw, grads[e.pw_param]);
      FeatureMap d_relu(cache.relu_out.channels, cache.relu_out.height, cache.relu_out.width);
      conv2d_backward(cache.relu_out, params_[e.dw_param].values, e.depthwise, d_dw, &d_relu, grads[e.dw_param]);
      relu_backward(cache.relu_out, d_relu, grad_in);
      return;
    }
    case OperationKind::max_pool_3x3:
      max_pool3_backward(in, e.stride, grad_out, grad_in);
      return;
    case OperationKind::avg_pool_3x3:
      avg_pool3_backward(in, e.stride, grad_out, grad_in);
      return;
    case OperationKind::identity:
      if (e.stride == 1) {
        grad_in.add(grad_out);
      } else {
        subsample2_backward(grad_out, grad_in);
      }
      return;
    case OperationKind::zero:
      return;
  }
}

void MiniNetwork::run_encoder(const Image& x, ImageCache& cache) const {
  const int N = genotype_.n_intermediate();
  cache.input = to_feature_map(x);
  cache.stem = conv2d_forward(cache.input, params_[stem_param_].values, stem_);
  check_finite(cache.stem, 0);
  cache.cells.assign(cells_.size(), {});
  cache.outputs.assign(cells_.size(), {});
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    const auto& cell = cells_[k];
    auto& cc = cache.cells[k];
    const FeatureMap& in0 = k >= 2 ? cache.outputs[k - 2] : cache.stem;
    const FeatureMap& in1 = k >= 1 ? cache.outputs[k - 1] : cache.stem;
    cc.pre0_relu = relu_forward(in0);
    cc.pre1_relu = relu_forward(in1);
    cc.nodes.clear();
    cc.nodes.push_back(conv2d_forward(cc.pre0_relu, params_[cell.pre0_param].values, cell.pre0));
    cc.nodes.push_back(conv2d_forward(cc.pre1_relu, params_[cell.pre1_param].values, cell.pre1));
    const int stride = cell.reduction ? 2 : 1;
    const int h = strided_size(cc.nodes[1].height, stride);
    const int w = strided_size(cc.nodes[1].width, stride);
    for (int j = 0; j < N; ++j) cc.nodes.emplace_back(cell.channels, h, w);
    cc.edges.assign(cell.edges.size(), {});
    for (std::size_t ei = 0; ei < cell.edges.size(); ++ei) {
      const auto& e = cell.edges[ei];
      cc.nodes[static_cast<std::size_t>(e.dst + 2)].add(
          edge_forward(e, cc.nodes[static_cast<std::size_t>(e.src)], cc.edges[ei]));
    }
    FeatureMap out(N * cell.channels, h, w);
    const std::size_t block = static_cast<std::size_t>(cell.channels) * h * w;
    for (int j = 0; j < N; ++j) {
      const auto& node = cc.nodes[static_cast<std::size_t>(j + 2)].data;
      std::copy(node.begin(), node.end(), out.data.begin() + static_cast<std::ptrdiff_t>(j * block));
    }
    check_finite(out, static_cast<int>(k) + 1);
    cache.outputs[k] = std::move(out);
  }
  cache.features = global_avg_pool(cache.outputs.back());
}

void MiniNetwork::backprop_encoder(const ImageCache& cache, std::span<const double> d_features,
                                   GradientStore& grads) const {
  const int N = genotype_.n_intermediate();
  const std::size_t L = cells_.size();
  std::vector<FeatureMap> d_out(L);
  for (std::size_t k = 0; k < L; ++k) {
    const auto& o = cache.outputs[k];
    d_out[k] = FeatureMap(o.channels, o.height, o.width);
  }
  FeatureMap d_stem(cache.stem.channels, cache.stem.height, cache.stem.width);
  {
    auto& last = d_out[L - 1];
    const double inv = 1.0 / static_cast<double>(last.plane());
    for (int c = 0; c < last.channels; ++c) {
      const double g = d_features[static_cast<std::size_t>(c)] * inv;
      auto first = last.data.begin() + static_cast<std::ptrdiff_t>(c * last.plane());
      std::fill(first, first + static_cast<std::ptrdiff_t>(last.plane()), g);
    }
  }

  for (std::size_t kk = L; kk-- > 0;) {
    const auto& cell = cells_[kk];
    const auto& cc = cache.cells[kk];
    std::vector<FeatureMap> d_nodes;
    d_nodes.reserve(cc.nodes.size());
    for (const auto& n : cc.nodes) d_nodes.emplace_back(n.channels, n.height, n.width);
    const std::size_t block = d_nodes[2].size();
    for (int j = 0; j < N; ++j) {
      const auto first = d_out[kk].data.begin() + static_cast<std::ptrdiff_t>(j * block);
      std::copy(first, first + static_cast<std::ptrdiff_t>(block), d_nodes[static_cast<std::size_t>(j + 2)].data.begin());
    }
    for (std::size_t ei = cell.edges.size(); ei-- > 0;) {
      const auto& e = cell.edges[ei];
      const auto src = static_cast<std::size_t>(e.src);
      edge_backward(e, cc.nodes[src], cc.edges[ei], d_nodes[static_cast<std::size_t>(e.dst + 2)], d_nodes[src],
                    grads);
    }
    FeatureMap& d_in0 = kk >= 2 ? d_out[kk - 2] : d_stem;
    FeatureMap& d_in1 = kk >= 1 ? d_out[kk - 1] : d_stem;
    FeatureMap d_relu0(cc.pre0_relu.channels, cc.pre0_relu.height, cc.pre0_relu.width);
    conv2d_backward(cc.pre0_relu, params_[cell.pre0_param].values, cell.pre0, d_nodes[0], &d_relu0,
                    grads[cell.pre0_param]);
    relu_backward(cc.pre0_relu, d_relu0, d_in0);
    FeatureMap d_relu1(cc.pre1_relu.channels, cc.pre1_relu.height, cc.pre1_relu.width);
    conv2d_backward(cc.pre1_relu, params_[cell.pre1_param].values, cell.pre1, d_nodes[1], &d_relu1,
                    grads[cell.pre1_param]);
    relu_backward(cc.pre1_relu, d_relu1, d_in1);
  }
  conv2d_backward(cache.input, params_[stem_param_].values, stem_, d_stem, nullptr, grads[stem_param_]);
}

std::vector<double> MiniNetwork::affine(std::size_t w, std::size_t b, std::span<const double> x) const {
  const auto& W = params_[w].values;
  const auto& B = params_[b].values;
  const std::size_t out = B.size();
  const std::size_t in = x.size();
  if (W.size() != out * in) throw ShapeError("affine head: input dimension mismatch");
  std::vector<double> y(B);
  for (std::size_t o = 0; o < out; ++o) {
    double s = 0.0;
    for (std::size_t i = 0; i < in; ++i) s += W[o * in + i] * x[i];
    y[o] += s;
  }
  return y;
}

std::vector<double> MiniNetwork::features(const Image& x) const {
  ImageCache cache;
  run_encoder(x, cache);
  return std::move(cache.features);
}

std::vector<double> MiniNetwork::project(const Image& x) const { return affine(g_w_, g_b_, features(x)); }

Projections MiniNetwork::forward(const Minibatch& batch) const {
  if (batch.views != static_cast<std::size_t>(config_.views)) {
    throw ConfigError("contrastive.views", "minibatch view count differs from the network's");
  }
  const std::size_t K = batch.size();
  const std::size_t M = batch.views;
  const std::size_t P = static_cast<std::size_t>(config_.proj_dim);
  Projections out{K, M, P, std::vector<double>(K * P), std::vector<double>(K * P), std::vector<double>(K * M * P)};
  const int head_layer = static_cast<int>(cells_.size()) + 1;
  auto check = [head_layer](const std::vector<double>& v) {
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
      throw NumericalFault("non-finite projection", head_layer);
    }
  };
  for (std::size_t i = 0; i < K; ++i) {
    const auto& item = batch.items[i];
    const auto z = project(item.original);
    check(z);
    std::copy(z.begin(), z.end(), out.anchors.begin() + static_cast<std::ptrdiff_t>(i * P));
    std::vector<double> head_in;
    for (std::size_t m = 0; m < M; ++m) {
      const auto f = features(item.views[m]);
      const auto h = affine(g_w_, g_b_, f);
      check(h);
      std::copy(h.begin(), h.end(), out.view_projections.begin() + static_cast<std::ptrdiff_t>((i * M + m) * P));
      const auto& part = config_.view_head == ViewHead::project_then_concat ? h : f;
      head_in.insert(head_in.end(), part.begin(), part.end());
    }
    const auto t = affine(l_w_, l_b_, head_in);
    check(t);
    std::copy(t.begin(), t.end(), out.targets.begin() + static_cast<std::ptrdiff_t>(i * P));
  }
  return out;
}

double MiniNetwork::loss(const Minibatch& batch, const MemoryBank& bank, double temperature, double blend) const {
  const auto proj = forward(batch);
  ContrastiveBatch cb;
  for (const auto& item : batch.items) cb.ids.push_back(item.sample_id);
  cb.views = proj.views;
  cb.dim = proj.dim;
  cb.anchors = proj.anchors;
  cb.targets = proj.targets;
  cb.view_projections = proj.view_projections;
  cb.temperature = temperature;
  cb.blend = blend;
  return evaluate_batch(cb, bank, false).mean;
}

LossAndGradient MiniNetwork::loss_and_gradient(const Minibatch& batch, const MemoryBank& bank, double temperature,
                                               double blend) const {
  const std::size_t K = batch.size();
  const std::size_t M = batch.views;
  const std::size_t P = static_cast<std::size_t>(config_.proj_dim);
  const std::size_t F = feature_dim_;
  const auto proj = forward(batch);

  LossAndGradient out;
  auto& cb = out.batch;
  for (const auto& item : batch.items) cb.ids.push_back(item.sample_id);
  cb.views = M;
  cb.dim = P;
  cb.anchors = proj.anchors;
  cb.targets = proj.targets;
  cb.view_projections = proj.view_projections;
  cb.temperature = temperature;
  cb.blend = blend;
  auto lg = evaluate_batch(cb, bank, true);
  out.loss = lg.mean;
  out.per_anchor = std::move(lg.per_anchor);
  out.gradients = zeros_like(params_);
  auto& grads = out.gradients;

  const auto& gW = params_[g_w_].values;
  const auto& lW = params_[l_w_].values;
  const std::size_t lin = head_input_dim();

  // y = W x + b:  dW += dy x^T, db += dy, dx = W^T dy.
  auto affine_back = [&](std::size_t w, std::size_t b, const std::vector<double>& W, std::span<const double> x,
                         std::span<const double> dy, std::span<double> dx) {
    const std::size_t in = x.size();
    auto& dW = grads[w];
    auto& dB = grads[b];
    for (std::size_t o = 0; o < dy.size(); ++o) {
      const double g = dy[o];
      if (g == 0.0) continue;
      dB[o] += g;
      for (std::size_t i = 0; i < in; ++i) {
        dW[o * in + i] += g * x[i];
        dx[i] += W[o * in + i] * g;
      }
    }
  };

  ImageCache cache;
  for (std::size_t i = 0; i < K; ++i) {
    const auto& item = batch.items[i];
    // Anchor path: z = g(f(x)).
    run_encoder(item.original, cache);
    std::vector<double> df(F, 0.0);
    affine_back(g_w_, g_b_, gW, cache.features, std::span(lg.d_anchors).subspan(i * P, P), df);
    backprop_encoder(cache, df, grads);

    // View path: features for every view, then l head, then g heads.
    std::vector<ImageCache> view_caches(M);
    std::vector<double> head_in;
    head_in.reserve(lin);
    for (std::size_t m = 0; m < M; ++m) {
      run_encoder(item.views[m], view_caches[m]);
      if (config_.view_head == ViewHead::project_then_concat) {
        const auto h = affine(g_w_, g_b_, view_caches[m].features);
        head_in.insert(head_in.end(), h.begin(), h.end());
      } else {
        head_in.insert(head_in.end(), view_caches[m].features.begin(), view_caches[m].features.end());
      }
    }
    std::vector<double> d_head_in(lin, 0.0);
    affine_back(l_w_, l_b_, lW, head_in, std::span(lg.d_targets).subspan(i * P, P), d_head_in);
    for (std::size_t m = 0; m < M; ++m) {
      std::vector<double> dh(lg.d_view_projections.begin() + static_cast<std::ptrdiff_t>((i * M + m) * P),
                             lg.d_view_projections.begin() + static_cast<std::ptrdiff_t>((i * M + m + 1) * P));
      std::vector<double> dfm(F, 0.0);
      if (config_.view_head == ViewHead::project_then_concat) {
        for (std::size_t d = 0; d < P; ++d) dh[d] += d_head_in[m * P + d];
      } else {
        for (std::size_t d = 0; d < F; ++d) dfm[d] += d_head_in[m * F + d];
      }
      affine_back(g_w_, g_b_, gW, view_caches[m].features, dh, dfm);
      backprop_encoder(view_caches[m], dfm, grads);
    }
  }
  return out;
}

void MiniNetwork::save(const std::filesystem::path& path) const {
  std::string out(kCheckpointMagic, 4);
  le::put_u32(out, kCheckpointVersion);
  le::put_u32(out, static_cast<std::uint32_t>(params_.tensor_count()));
  for (const auto& t : params_.tensors()) {
    le::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    le::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) le::put_u64(out, d);
  }
  for (const auto& t : params_.tensors())
    for (double v : t.values) le::put_f64(out, v);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

void MiniNetwork::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  le::Reader r(bytes);
  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic,
                  [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); })) {
    throw FormatError("parameter checkpoint: bad magic");
  }
  if (r.u32() != kCheckpointVersion) throw FormatError("parameter checkpoint: unsupported version");
  if (r.u32() != params_.tensor_count()) throw FormatError("parameter checkpoint: tensor count mismatch");
  for (const auto& t : params_.tensors()) {
    const auto len = r.u32();
    const auto name = r.take(len);
    if (std::string(name.begin(), name.end()) != t.name) throw FormatError("parameter checkpoint: name mismatch");
    const auto nd = r.u32();
    if (nd != t.shape.size()) throw FormatError("parameter checkpoint: rank mismatch for " + t.name);
    for (auto d : t.shape) {
      if (r.u64() != d) throw FormatError("parameter checkpoint: shape mismatch for " + t.name);
    }
  }
  if (r.remaining() != params_.scalar_count() * 8) throw FormatError("parameter checkpoint: payload size mismatch");
  for (auto& t : params_.tensors())
    for (double& v : t.values) v = r.f64();
}

void MomentumSgd::step(ParameterStore& params, const GradientStore& grads) {
  if (grads.size() != params.tensor_count()) throw ShapeError("sgd: gradient store does not match parameters");
  if (velocity_.empty()) velocity_ = zeros_like(params);
  for (std::size_t t = 0; t < grads.size(); ++t) {
    auto& w = params[t].values;
    if (grads[t].size() != w.size()) throw ShapeError("sgd: gradient shape mismatch for " + params[t].name);
    auto& v = velocity_[t];
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum_ * v[i] + grads[t][i];
      w[i] -= lr_ * v[i];
    }
  }
}

}  // namespace csnas
