// Copyright 2026 The xcnet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xcnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace xcnet {

std::string to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::kXCNorm: return "xcnorm";
    case BlockKind::kRXCNorm: return "rxcnorm";
    case BlockKind::kBaseline: return "baseline";
  }
  return "?";
}

std::string to_string(WelschForm form) {
  switch (form) {
    case WelschForm::kRho: return "rho";
    case WelschForm::kSigned: return "signed";
    case WelschForm::kInfluence: return "influence";
  }
  return "?";
}

std::string to_string(NormKind kind) { return kind == NormKind::kBatch ? "batch" : "instance"; }
std::string to_string(PoolKind kind) { return kind == PoolKind::kMax ? "max" : "avg"; }
std::string to_string(HeadKind kind) { return kind == HeadKind::kNormalized ? "normalized" : "linear"; }

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); };
  if (layers.empty()) fail("model needs at least one layer");
  if (n_classes < 2) fail("n_classes must be >= 2");
  if (in_channels == 0 || in_height == 0 || in_width == 0) fail("input extents must be >= 1");
  if (pool_window == 0) fail("pool_window must be >= 1");
  std::size_t h = in_height, w = in_width, c = in_channels;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    ConvGeometry g{l.kernel, l.stride, l.padding, c, l.out_channels};
    try {
      g.validate(h, w);
    } catch (const Error& e) {
      fail("layer " + std::to_string(i) + ": " + e.what());
    }
    h = g.out_extent(h);
    w = g.out_extent(w);
    if (!baseline_mode() && h * w < 2) {
      fail("layer " + std::to_string(i) + " output is 1x1; channel normalisation needs >= 2 positions");
    }
    if (h >= pool_window && w >= pool_window) {
      h /= pool_window;
      w /= pool_window;
    }
    c = l.out_channels;
  }
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "kind=" << to_string(kind) << ";welsch=" << to_string(welsch_form) << ";pool=" << to_string(pool) << ":"
     << pool_window << ";head=" << to_string(head) << ";norm=" << to_string(baseline_norm) << ";nbam=" << nbam
     << ";classes=" << n_classes << ";input=" << in_height << "x" << in_width << "x" << in_channels << ";layers=";
  for (const auto& l : layers) os << l.out_channels << "/" << l.kernel << "/" << l.stride << "/" << l.padding << ",";
  return os.str();
}

std::uint64_t ModelConfig::fingerprint() const { return fnv1a64(canonical()); }

// ---------------------------------------------------------------------------

void TensorList::add(std::string name, Tensor value) {
  if (index_.count(name)) throw Error(ErrorCode::kInvalidArgument, "duplicate tensor name " + name);
  index_[name] = items_.size();
  items_.push_back({std::move(name), std::move(value)});
}

bool TensorList::contains(const std::string& name) const { return index_.count(name) != 0; }

Tensor& TensorList::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::kInvalidArgument, "no tensor named " + name);
  return items_[it->second].value;
}

const Tensor& TensorList::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::kInvalidArgument, "no tensor named " + name);
  return items_[it->second].value;
}

// ---------------------------------------------------------------------------

namespace {

std::string block_prefix(std::size_t i) { return "block" + std::to_string(i) + "."; }
const std::string kHeadPrefix = "head.";

struct BlockShape {
  ConvGeometry geometry;
  std::size_t in_h, in_w;
  bool pooled;
};

// Geometry of every block plus the channel count entering the head.
std::vector<BlockShape> block_shapes(const ModelConfig& cfg, std::size_t& head_in) {
  std::vector<BlockShape> shapes;
  std::size_t h = cfg.in_height, w = cfg.in_width, c = cfg.in_channels;
  for (const auto& l : cfg.layers) {
    ConvGeometry g{l.kernel, l.stride, l.padding, c, l.out_channels};
    BlockShape s{g, h, w, false};
    h = g.out_extent(h);
    w = g.out_extent(w);
    if (h >= cfg.pool_window && w >= cfg.pool_window && cfg.pool_window > 1) {
      s.pooled = true;
      h /= cfg.pool_window;
      w /= cfg.pool_window;
    }
    c = l.out_channels;
    shapes.push_back(s);
  }
  head_in = c;
  return shapes;
}

ConvGeometry head_geometry(const ModelConfig& cfg, std::size_t head_in) {
  return ConvGeometry{1, 1, 0, head_in, cfg.n_classes};
}

LayerMode mode_for(const ModelConfig& cfg) {
  LayerMode m;
  m.variant = cfg.kind == BlockKind::kRXCNorm ? Variant::kRXCNorm : Variant::kXCNorm;
  m.welsch_form = cfg.welsch_form;
  return m;
}

void add_normalized_params(TensorList& params, TensorList& buffers, const std::string& prefix,
                           const ConvGeometry& g, bool robust, Rng& rng) {
  LayerParams p = LayerParams::init(g, rng);
  params.add(prefix + "w", std::move(p.w));
  params.add(prefix + "A", std::move(p.scale));
  params.add(prefix + "tau_raw", Tensor::scalar(p.tau_raw));
  params.add(prefix + "mask_w", Tensor::scalar(p.mask_w));
  params.add(prefix + "mask_b", Tensor::scalar(p.mask_b));
  if (robust) buffers.add(prefix + "c", Tensor::scalar(p.c));
}

}  // namespace

Model::Model(ModelConfig config, Rng& init_rng) : config_(std::move(config)) {
  config_.validate();
  init_params(init_rng);
}

Model::Model(ModelConfig config, TensorList params, TensorList buffers)
    : config_(std::move(config)), params_(std::move(params)), buffers_(std::move(buffers)) {
  config_.validate();
  // Shape-check against a freshly initialised model.
  Rng rng(0);
  Model reference(config_, rng);
  auto check = [](const TensorList& want, const TensorList& got, const char* what) {
    if (want.size() != got.size()) {
      throw Error(ErrorCode::kConfigFingerprintMismatch, std::string(what) + " count differs from the configuration");
    }
    for (const auto& item : want.items()) {
      if (!got.contains(item.name) || got.at(item.name).shape() != item.value.shape()) {
        throw Error(ErrorCode::kConfigFingerprintMismatch, std::string(what) + " '" + item.name +
                                                                 "' missing or mis-shaped");
      }
    }
  };
  check(reference.params_, params_, "parameter");
  check(reference.buffers_, buffers_, "buffer");
}

void Model::init_params(Rng& rng) {
  std::size_t head_in = 0;
  const auto shapes = block_shapes(config_, head_in);
  const bool robust = config_.kind == BlockKind::kRXCNorm;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const std::string prefix = block_prefix(i);
    const ConvGeometry& g = shapes[i].geometry;
    if (config_.baseline_mode()) {
      const double sd = std::sqrt(2.0 / static_cast<double>(g.alpha()));
      params_.add(prefix + "w", rand_fill(rng, Shape{g.kernel, g.kernel, g.in_channels, g.out_channels}, Normal{0, sd}));
      params_.add(prefix + "b", Tensor(Shape{g.out_channels}, 0.0));
      params_.add(prefix + "gamma", Tensor(Shape{g.out_channels}, 1.0));
      params_.add(prefix + "beta", Tensor(Shape{g.out_channels}, 0.0));
      if (config_.baseline_norm == NormKind::kBatch) {
        buffers_.add(prefix + "running_mean", Tensor(Shape{g.out_channels}, 0.0));
        buffers_.add(prefix + "running_var", Tensor(Shape{g.out_channels}, 1.0));
      }
    } else {
      add_normalized_params(params_, buffers_, prefix, g, robust, rng);
    }
  }
  const ConvGeometry hg = head_geometry(config_, head_in);
  if (config_.head == HeadKind::kNormalized && !config_.baseline_mode()) {
    add_normalized_params(params_, buffers_, kHeadPrefix, hg, robust, rng);
  } else {
    const double sd = std::sqrt(2.0 / static_cast<double>(head_in));
    params_.add(kHeadPrefix + "w", rand_fill(rng, Shape{head_in, config_.n_classes}, Normal{0, sd}));
    params_.add(kHeadPrefix + "b", Tensor(Shape{config_.n_classes}, 0.0));
  }
}

LayerParams Model::layer_params(std::size_t i) const {
  if (config_.baseline_mode()) throw Error(ErrorCode::kInvalidArgument, "baseline blocks have no LayerParams");
  const std::string prefix = i < config_.layers.size() ? block_prefix(i) : kHeadPrefix;
  LayerParams p;
  p.w = params_.at(prefix + "w");
  p.scale = params_.at(prefix + "A");
  p.tau_raw = params_.at(prefix + "tau_raw").item();
  p.mask_w = params_.at(prefix + "mask_w").item();
  p.mask_b = params_.at(prefix + "mask_b").item();
  if (buffers_.contains(prefix + "c")) p.c = buffers_.at(prefix + "c").item();
  return p;
}

TapeForward Model::forward(ad::Graph& graph, const Tensor& x, bool train, double fault_factor) const {
  const auto& cfg = config_;
  if (x.rank() != 4 || x.dim(1) != cfg.in_height || x.dim(2) != cfg.in_width || x.dim(3) != cfg.in_channels) {
    throw Error(ErrorCode::kShapeMismatch, "model input " + shape_string(x.shape()) + ", expected [N," +
                                               std::to_string(cfg.in_height) + "," + std::to_string(cfg.in_width) +
                                               "," + std::to_string(cfg.in_channels) + "]");
  }
  TapeForward out;
  for (const auto& item : params_.items()) out.params[item.name] = graph.param(item.value, item.name);
  auto var = [&](const std::string& name) { return out.params.at(name); };
  auto vars_for = [&](const std::string& prefix) {
    LayerVars v;
    v.w = var(prefix + "w");
    v.scale = var(prefix + "A");
    v.tau_raw = var(prefix + "tau_raw");
    v.mask_w = var(prefix + "mask_w");
    v.mask_b = var(prefix + "mask_b");
    if (buffers_.contains(prefix + "c")) v.c = buffers_.at(prefix + "c").item();
    return v;
  };

  std::size_t head_in = 0;
  const auto shapes = block_shapes(cfg, head_in);
  const LayerMode mode = mode_for(cfg);
  const std::size_t n = x.dim(0);
  ad::Var h = graph.constant(x);

  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const std::string prefix = block_prefix(i);
    const ConvGeometry& g = shapes[i].geometry;
    const std::size_t ho = g.out_extent(shapes[i].in_h), wo = g.out_extent(shapes[i].in_w);
    if (!cfg.baseline_mode()) {
      LayerTape t = layer_forward(graph, h, vars_for(prefix), mode, g, PipelineOptions{cfg.nbam, true});
      if (cfg.kind == BlockKind::kRXCNorm) out.stats.patch_std.emplace_back(prefix + "c", t.mean_patch_std);
      h = t.output;
    } else {
      const std::size_t cout = g.out_channels;
      ad::Var y = ad::matmul(ad::im2col(h, g), ad::reshape(var(prefix + "w"), Shape{g.alpha(), cout}));
      y = ad::add(y, ad::reshape(var(prefix + "b"), Shape{1, cout}));
      if (cfg.baseline_norm == NormKind::kInstance) {
        y = ad::reshape(ad::standardize(ad::reshape(y, Shape{n, ho * wo, cout}), kChannelNormEps),
                        Shape{n * ho * wo, cout});
      } else if (train) {
        const Tensor& yv = y.value();
        out.stats.batch_moments.emplace_back(
            prefix, std::make_pair(reduce(ReduceOp::kMean, yv, {0}), reduce(ReduceOp::kVar, yv, {0})));
        y = ad::reshape(ad::standardize(ad::reshape(y, Shape{1, n * ho * wo, cout}), kChannelNormEps),
                        Shape{n * ho * wo, cout});
      } else {
        const Tensor rm = buffers_.at(prefix + "running_mean").reshaped(Shape{1, cout});
        Tensor rsd = elementwise(ElemOp::kSqrt, buffers_.at(prefix + "running_var")).reshaped(Shape{1, cout});
        rsd = rsd + kChannelNormEps;
        y = ad::div(ad::sub(y, graph.constant(rm)), graph.constant(rsd));
      }
      y = ad::add(ad::mul(y, ad::reshape(var(prefix + "gamma"), Shape{1, cout})),
                  ad::reshape(var(prefix + "beta"), Shape{1, cout}));
      h = ad::reshape(ad::max0(y), Shape{n, ho, wo, cout});
    }
    if (i == 0 && fault_factor != 1.0) h = ad::faulty_identity(h, fault_factor);
    if (shapes[i].pooled) {
      h = cfg.pool == PoolKind::kMax ? ad::max_pool(h, cfg.pool_window) : ad::avg_pool(h, cfg.pool_window);
    }
  }

  ad::Var pooled = ad::mean(h, {1, 2});  // [N, C]
  if (cfg.head == HeadKind::kNormalized && !cfg.baseline_mode()) {
    const ConvGeometry hg = head_geometry(cfg, head_in);
    ad::Var as_map = ad::reshape(pooled, Shape{n, 1, 1, head_in});
    LayerTape t = layer_forward(graph, as_map, vars_for(kHeadPrefix), mode, hg, PipelineOptions{cfg.nbam, false});
    if (cfg.kind == BlockKind::kRXCNorm) out.stats.patch_std.emplace_back(kHeadPrefix + "c", t.mean_patch_std);
    out.logits = ad::reshape(t.output, Shape{n, cfg.n_classes});
  } else {
    out.logits = ad::add(ad::matmul(pooled, var(kHeadPrefix + "w")),
                         ad::reshape(var(kHeadPrefix + "b"), Shape{1, cfg.n_classes}));
  }
  return out;
}

Tensor Model::logits(const Tensor& x) const {
  constexpr std::size_t kChunk = 128;
  const std::size_t n = x.dim(0);
  if (n <= kChunk) {
    ad::Graph graph;
    return forward(graph, x, false).logits.value();
  }
  std::vector<Tensor> parts;
  for (std::size_t start = 0; start < n; start += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(n, start + kChunk); ++i) idx.push_back(i);
    ad::Graph graph;
    parts.push_back(forward(graph, take(x, idx), false).logits.value());
  }
  return concat_rows(parts);
}

void Model::apply_statistics(const ForwardStats& stats, double c_momentum, double bn_momentum) {
  for (const auto& [name, sd] : stats.patch_std) {
    Tensor& c = buffers_.at(name);
    c[0] = update_robust_scale(c[0], sd, c_momentum);
  }
  for (const auto& [prefix, moments] : stats.batch_moments) {
    Tensor& rm = buffers_.at(prefix + "running_mean");
    Tensor& rv = buffers_.at(prefix + "running_var");
    for (std::size_t i = 0; i < rm.numel(); ++i) {
      rm[i] = (1.0 - bn_momentum) * rm[i] + bn_momentum * moments.first[i];
      rv[i] = (1.0 - bn_momentum) * rv[i] + bn_momentum * moments.second[i];
    }
  }
}

std::vector<double> Model::robust_scales() const {
  std::vector<double> out;
  for (const auto& item : buffers_.items()) {
    if (item.name.size() > 2 && item.name.compare(item.name.size() - 2, 2, ".c") == 0) out.push_back(item.value.item());
  }
  return out;
}

Tensor model_forward(const Model& model, const Tensor& x, bool train) {
  ad::Graph graph;
  return model.forward(graph, x, train).logits.value();
}

// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "softmax expects [N, classes]");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, logits[i * k + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(logits[i * k + j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < k; ++j) p[i * k + j] = std::exp(logits[i * k + j] - lse);
  }
  return p;
}

XentResult softmax_xent(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "logits must be [N, classes]");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) throw Error(ErrorCode::kShapeMismatch, "label count does not match batch");
  if (n == 0) throw Error(ErrorCode::kEmptyReduction, "empty batch");
  XentResult r;
  r.probs = softmax(logits);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(y) + " with " + std::to_string(k) + " classes");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, logits[i * k + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(logits[i * k + j] - mx);
    r.loss += mx + std::log(s) - logits[i * k + static_cast<std::size_t>(y)];
  }
  r.loss /= static_cast<double>(n);
  return r;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (logits[i * k + j] > logits[i * k + best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace xcnet
