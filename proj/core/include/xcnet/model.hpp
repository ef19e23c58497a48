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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xcnet/autodiff.hpp"
#include "xcnet/rng.hpp"
#include "xcnet/tensor.hpp"
#include "xcnet/xcnorm.hpp"

namespace xcnet {

enum class BlockKind { kXCNorm, kRXCNorm, kBaseline };
enum class NormKind { kBatch, kInstance };
enum class PoolKind { kMax, kAvg };
enum class HeadKind { kNormalized, kLinear };

struct LayerSpec {
  std::size_t out_channels = 32;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
};

/// Network description. Every block is a normalized-correlation layer (or,
/// in baseline mode, conv + norm + relu) followed by pooling when the map is
/// still large enough; then a global average pool and a dense head.
struct ModelConfig {
  BlockKind kind = BlockKind::kXCNorm;
  WelschForm welsch_form = WelschForm::kInfluence;
  std::vector<LayerSpec> layers{{32}, {64}, {128}, {128}};
  PoolKind pool = PoolKind::kMax;
  std::size_t pool_window = 2;
  HeadKind head = HeadKind::kNormalized;
  NormKind baseline_norm = NormKind::kBatch;
  bool nbam = true;
  std::size_t n_classes = 10;
  std::size_t in_height = 32;
  std::size_t in_width = 32;
  std::size_t in_channels = 1;

  bool baseline_mode() const noexcept { return kind == BlockKind::kBaseline; }
  /// Throws ConfigError on inconsistent settings (channel chaining, extents).
  void validate() const;
  /// Canonical text form of every architecture-defining field.
  std::string canonical() const;
  /// FNV-1a of canonical(); guards checkpoint/config pairing.
  std::uint64_t fingerprint() const;
};

std::string to_string(BlockKind kind);
std::string to_string(WelschForm form);
std::string to_string(NormKind kind);
std::string to_string(PoolKind kind);
std::string to_string(HeadKind kind);

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Ordered name -> tensor list; insertion order is the canonical order for
/// optimisation and serialisation.
class TensorList {
 public:
  void add(std::string name, Tensor value);
  bool contains(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  std::vector<NamedTensor>& items() noexcept { return items_; }
  const std::vector<NamedTensor>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }

 private:
  std::vector<NamedTensor> items_;
  std::map<std::string, std::size_t> index_;
};

/// Batch statistics produced by a training-mode forward pass.
struct ForwardStats {
  /// Mean patchwise input std per robust layer, keyed by its c buffer name.
  std::vector<std::pair<std::string, double>> patch_std;
  /// Batch mean / variance per batch-norm layer, keyed by block prefix.
  std::vector<std::pair<std::string, std::pair<Tensor, Tensor>>> batch_moments;
};

struct TapeForward {
  ad::Var logits;                       ///< [N, n_classes]
  std::map<std::string, ad::Var> params;  ///< leaf per learnable tensor
  ForwardStats stats;
};

class Model {
 public:
  Model(ModelConfig config, Rng& init_rng);
  Model(ModelConfig config, TensorList params, TensorList buffers);

  const ModelConfig& config() const noexcept { return config_; }
  TensorList& params() noexcept { return params_; }
  const TensorList& params() const noexcept { return params_; }
  /// Tracked, non-gradient state: robust scales c, batch-norm running moments.
  TensorList& buffers() noexcept { return buffers_; }
  const TensorList& buffers() const noexcept { return buffers_; }

  /// Differentiable forward of x [N, H, W, C]. In train mode batch-norm uses
  /// batch moments; the returned stats feed apply_statistics().
  TapeForward forward(ad::Graph& graph, const Tensor& x, bool train,
                      double fault_factor = 1.0) const;

  /// Inference logits; no graph is retained.
  Tensor logits(const Tensor& x) const;

  /// Moving-average updates of c and batch-norm moments from one batch.
  void apply_statistics(const ForwardStats& stats, double c_momentum = kRobustScaleMomentum,
                        double bn_momentum = 0.1);

  /// Robust scale of each robust block in order (empty for other kinds).
  std::vector<double> robust_scales() const;
  /// LayerParams view of normalized block `i` (the head is index layers.size()).
  LayerParams layer_params(std::size_t i) const;

 private:
  void init_params(Rng& rng);

  ModelConfig config_;
  TensorList params_;
  TensorList buffers_;
};

/// Logits for a batch; see Model::forward for the train flag.
Tensor model_forward(const Model& model, const Tensor& x, bool train = false);

struct XentResult {
  double loss = 0.0;
  Tensor probs;  ///< [N, classes], rows sum to 1
};

/// Mean softmax cross-entropy with a log-sum-exp formulation.
XentResult softmax_xent(const Tensor& logits, const std::vector<int>& labels);
Tensor softmax(const Tensor& logits);

/// Argmax per row, ties to the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace xcnet
