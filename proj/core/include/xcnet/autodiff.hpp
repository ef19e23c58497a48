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

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "xcnet/patch_ops.hpp"
#include "xcnet/tensor.hpp"

namespace xcnet::ad {

class Graph;

/// Handle to a node on a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the tape is
/// topologically sorted by construction and backward() walks it once in
/// reverse. One graph per forward pass; graphs are not shared across threads.
class Graph {
 public:
  /// Receives the node's forward value and the gradient of its output;
  /// accumulates into inputs through Graph::accumulate.
  using BackwardFn = std::function<void(Graph&, const Tensor& out, const Tensor& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad, std::string name = {});
  Var param(Tensor value, std::string name = {}) { return leaf(std::move(value), true, std::move(name)); }
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Appends an op node. `backward` is only stored (and later called) when at
  /// least one input requires a gradient.
  Var record(Tensor value, const std::vector<Var>& inputs, const char* op, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  const std::string& name(Var v) const { return nodes_[v.id].name; }
  const char* op(Var v) const { return nodes_[v.id].op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. The loss must hold exactly
  /// one element (NonScalarLoss otherwise). Gradients accumulate in a fixed
  /// order, so identical tapes yield bit-identical gradients.
  void backward(Var loss);

  /// Gradient of `v` after backward(); zeros when `v` is disconnected from
  /// the loss.
  Tensor grad(Var v) const;

  void accumulate(std::size_t id, const Tensor& g);
  void accumulate(Var v, const Tensor& g) { accumulate(v.id, g); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    const char* op = "leaf";
    std::string name;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph->value(*this); }

/// Sums a broadcast gradient back down to `shape`.
Tensor unbroadcast(const Tensor& grad, const Shape& shape);

// Arithmetic (broadcasting as in xcnet::elementwise).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);
/// max(0, x); subgradient 0 at exactly 0.
Var max0(Var a);
Var abs(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
/// base^exponent with a single-element exponent. The base must be >= 0.
/// The exponent gradient uses log(max(base, 1e-12)).
Var pow(Var base, Var exponent);

/// Elementwise function with a caller-supplied derivative.
Var unary(Var a, std::function<double(double)> fn, std::function<double(double)> dfn, const char* op);

Var sum(Var a, const std::vector<std::size_t>& axes = {}, bool keepdims = false);
Var mean(Var a, const std::vector<std::size_t>& axes = {}, bool keepdims = false);
Var reshape(Var a, Shape shape);

Var matmul(Var a, Var b);
Var im2col(Var x, const ConvGeometry& g);

/// L2 norm over the last axis of a matrix, kept as [rows, 1]. The gradient
/// of a zero row is defined as zero.
Var row_norm(Var a);

/// Standardises a [G, P, C] tensor over axis 1:
/// (x - mean) / (std + eps), population std, per (g, c).
Var standardize(Var a, double eps);

/// Non-overlapping max pooling over [N, H, W, C] with a square window;
/// trailing rows/columns that do not fill a window are dropped. Ties pick
/// the first element in raster order.
Var max_pool(Var x, std::size_t window);
Var avg_pool(Var x, std::size_t window);

/// Mean softmax cross-entropy of [N, classes] logits against integer labels.
Var softmax_xent(Var logits, const std::vector<int>& labels);

/// Identity whose backward rule multiplies the gradient by `factor`. Exists
/// only to build negative controls for gradient checking.
Var faulty_identity(Var a, double factor);

}  // namespace xcnet::ad
