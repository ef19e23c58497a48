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

#include "xcnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace xcnet::ad {

Var Graph::leaf(Tensor value, bool requires_grad, std::string name) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.name = std::move(name);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, const std::vector<Var>& inputs, const char* op, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.op = op;
  for (const Var& in : inputs) {
    if (in.graph != this) throw Error(ErrorCode::kInvalidArgument, std::string("input from another graph in ") + op);
    node.inputs.push_back(in.id);
    node.requires_grad = node.requires_grad || nodes_[in.id].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Graph::accumulate(std::size_t id, const Tensor& g) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return;
  if (g.shape() != node.value.shape()) {
    throw Error(ErrorCode::kShapeMismatch, std::string("gradient shape ") + shape_string(g.shape()) +
                                               " for node of shape " + shape_string(node.value.shape()) + " (" +
                                               node.op + ")");
  }
  if (!node.has_grad) {
    node.grad = g;
    node.has_grad = true;
  } else {
    auto dst = node.grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw Error(ErrorCode::kInvalidArgument, "loss belongs to another graph");
  const Tensor& lv = nodes_[loss.id].value;
  if (lv.numel() != 1) {
    throw Error(ErrorCode::kNonScalarLoss, "loss has shape " + shape_string(lv.shape()));
  }
  for (auto& node : nodes_) {
    node.has_grad = false;
    node.grad = Tensor();
  }
  accumulate(loss.id, Tensor(lv.shape(), 1.0));
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backward) continue;
    node.backward(*this, node.value, node.grad);
  }
}

Tensor Graph::grad(Var v) const {
  const Node& node = nodes_[v.id];
  if (node.has_grad) return node.grad;
  return Tensor(node.value.shape(), 0.0);
}

Tensor unbroadcast(const Tensor& grad, const Shape& shape) {
  if (grad.shape() == shape) return grad;
  if (shape_numel(shape) == 1) return Tensor(shape, xcnet::sum(grad));
  if (grad.rank() != shape.size()) {
    throw Error(ErrorCode::kShapeMismatch, "cannot unbroadcast " + shape_string(grad.shape()) + " to " +
                                               shape_string(shape));
  }
  std::vector<std::size_t> axes;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 1 && grad.shape()[i] != 1) axes.push_back(i);
  }
  return reduce(ReduceOp::kSum, grad, axes, true);
}

namespace {

template <typename Fn>
Tensor map_binary(const Tensor& a, const Tensor& b, Fn fn) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

template <typename Fn>
Tensor map_unary(const Tensor& a, Fn fn) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = fn(a[i]);
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

constexpr double kPowFloor = 1e-12;

}  // namespace

Var add(Var a, Var b) {
  return a.graph->record(a.value() + b.value(), {a, b}, "add", [a, b](Graph& g, const Tensor&, const Tensor& go) {
    g.accumulate(a, unbroadcast(go, a.shape()));
    g.accumulate(b, unbroadcast(go, b.shape()));
  });
}

Var sub(Var a, Var b) {
  return a.graph->record(a.value() - b.value(), {a, b}, "sub", [a, b](Graph& g, const Tensor&, const Tensor& go) {
    g.accumulate(a, unbroadcast(go, a.shape()));
    g.accumulate(b, unbroadcast(go * -1.0, b.shape()));
  });
}

Var mul(Var a, Var b) {
  return a.graph->record(a.value() * b.value(), {a, b}, "mul", [a, b](Graph& g, const Tensor&, const Tensor& go) {
    if (g.requires_grad(a)) g.accumulate(a, unbroadcast(go * b.value(), a.shape()));
    if (g.requires_grad(b)) g.accumulate(b, unbroadcast(go * a.value(), b.shape()));
  });
}

Var div(Var a, Var b) {
  return a.graph->record(a.value() / b.value(), {a, b}, "div", [a, b](Graph& g, const Tensor& out, const Tensor& go) {
    const Tensor gb = go / b.value();
    if (g.requires_grad(a)) g.accumulate(a, unbroadcast(gb, a.shape()));
    if (g.requires_grad(b)) g.accumulate(b, unbroadcast(gb * out * -1.0, b.shape()));
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double s) {
  return a.graph->record(a.value() * s, {a}, "scale",
                         [a, s](Graph& g, const Tensor&, const Tensor& go) { g.accumulate(a, go * s); });
}

Var add_scalar(Var a, double s) {
  return a.graph->record(a.value() + s, {a}, "add_scalar",
                         [a](Graph& g, const Tensor&, const Tensor& go) { g.accumulate(a, go); });
}

Var exp(Var a) {
  return a.graph->record(elementwise(ElemOp::kExp, a.value()), {a}, "exp",
                         [a](Graph& g, const Tensor& out, const Tensor& go) { g.accumulate(a, go * out); });
}

Var log(Var a) {
  return a.graph->record(map_unary(a.value(), [](double x) { return std::log(x); }), {a}, "log",
                         [a](Graph& g, const Tensor&, const Tensor& go) {
                           g.accumulate(a, map_binary(go, a.value(), [](double gg, double x) { return gg / x; }));
                         });
}

Var sqrt(Var a) {
  return a.graph->record(elementwise(ElemOp::kSqrt, a.value()), {a}, "sqrt",
                         [a](Graph& g, const Tensor& out, const Tensor& go) {
                           g.accumulate(a, map_binary(go, out, [](double gg, double y) {
                                          return y > 0.0 ? gg * 0.5 / y : 0.0;
                                        }));
                         });
}

Var square(Var a) {
  return a.graph->record(a.value() * a.value(), {a}, "square", [a](Graph& g, const Tensor&, const Tensor& go) {
    g.accumulate(a, map_binary(go, a.value(), [](double gg, double x) { return 2.0 * gg * x; }));
  });
}

Var max0(Var a) {
  return a.graph->record(elementwise(ElemOp::kMax0, a.value()), {a}, "max0",
                         [a](Graph& g, const Tensor&, const Tensor& go) {
                           g.accumulate(a, map_binary(go, a.value(), [](double gg, double x) {
                                          return x > 0.0 ? gg : 0.0;
                                        }));
                         });
}

Var abs(Var a) {
  return a.graph->record(elementwise(ElemOp::kAbs, a.value()), {a}, "abs",
                         [a](Graph& g, const Tensor&, const Tensor& go) {
                           g.accumulate(a, map_binary(go, a.value(), [](double gg, double x) {
                                          return x > 0.0 ? gg : (x < 0.0 ? -gg : 0.0);
                                        }));
                         });
}

Var sigmoid(Var a) {
  return a.graph->record(map_unary(a.value(), stable_sigmoid), {a}, "sigmoid",
                         [a](Graph& g, const Tensor& out, const Tensor& go) {
                           g.accumulate(a, map_binary(go, out, [](double gg, double s) { return gg * s * (1.0 - s); }));
                         });
}

Var softplus(Var a) {
  return a.graph->record(map_unary(a.value(), stable_softplus), {a}, "softplus",
                         [a](Graph& g, const Tensor&, const Tensor& go) {
                           g.accumulate(a, map_binary(go, a.value(), [](double gg, double x) {
                                          return gg * stable_sigmoid(x);
                                        }));
                         });
}

Var pow(Var base, Var exponent) {
  if (exponent.value().numel() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "pow exponent must hold one element");
  }
  const double e = exponent.value()[0];
  Tensor out = map_unary(base.value(), [e](double x) {
    if (x < 0.0) throw Error(ErrorCode::kInvalidArgument, "pow base must be non-negative");
    return std::pow(x, e);
  });
  return base.graph->record(std::move(out), {base, exponent}, "pow",
                            [base, exponent, e](Graph& g, const Tensor& out, const Tensor& go) {
                              const Tensor& x = base.value();
                              if (g.requires_grad(base)) {
                                g.accumulate(base, map_binary(go, x, [e](double gg, double v) {
                                               return gg * e * std::pow(std::max(v, kPowFloor), e - 1.0);
                                             }));
                              }
                              if (g.requires_grad(exponent)) {
                                double acc = 0.0;
                                for (std::size_t i = 0; i < x.numel(); ++i) {
                                  acc += go[i] * out[i] * std::log(std::max(x[i], kPowFloor));
                                }
                                g.accumulate(exponent, Tensor(exponent.shape(), acc));
                              }
                            });
}

Var unary(Var a, std::function<double(double)> fn, std::function<double(double)> dfn, const char* op) {
  Tensor out = map_unary(a.value(), fn);
  return a.graph->record(std::move(out), {a}, op, [a, dfn = std::move(dfn)](Graph& g, const Tensor&, const Tensor& go) {
    g.accumulate(a, map_binary(go, a.value(), [&dfn](double gg, double x) { return gg * dfn(x); }));
  });
}

Var sum(Var a, const std::vector<std::size_t>& axes, bool keepdims) {
  Tensor out = reduce(ReduceOp::kSum, a.value(), axes, keepdims);
  return a.graph->record(std::move(out), {a}, "sum", [a, axes](Graph& g, const Tensor&, const Tensor& go) {
    // Restore reduced axes as extent-1 dims, then broadcast.
    Shape kept = a.shape();
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (axes.empty() || std::find(axes.begin(), axes.end(), i) != axes.end()) kept[i] = 1;
    }
    g.accumulate(a, Tensor(a.shape(), 0.0) + go.reshaped(kept));
  });
}

Var mean(Var a, const std::vector<std::size_t>& axes, bool keepdims) {
  std::size_t count = 1;
  for (std::size_t i = 0; i < a.shape().size(); ++i) {
    if (axes.empty() || std::find(axes.begin(), axes.end(), i) != axes.end()) count *= a.shape()[i];
  }
  return scale(sum(a, axes, keepdims), 1.0 / static_cast<double>(std::max<std::size_t>(count, 1)));
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.graph->record(std::move(out), {a}, "reshape", [a](Graph& g, const Tensor&, const Tensor& go) {
    g.accumulate(a, go.reshaped(a.shape()));
  });
}

Var matmul(Var a, Var b) {
  return a.graph->record(xcnet::matmul(a.value(), b.value()), {a, b}, "matmul",
                         [a, b](Graph& g, const Tensor&, const Tensor& go) {
                           if (g.requires_grad(a)) g.accumulate(a, xcnet::matmul(go, b.value(), false, true));
                           if (g.requires_grad(b)) g.accumulate(b, xcnet::matmul(a.value(), go, true, false));
                         });
}

Var im2col(Var x, const ConvGeometry& geom) {
  return x.graph->record(im2col_matrix(x.value(), geom), {x}, "im2col",
                         [x, geom](Graph& g, const Tensor&, const Tensor& go) {
                           g.accumulate(x, col2im(go, x.shape(), geom));
                         });
}

Var row_norm(Var a) {
  if (a.value().rank() != 2) throw Error(ErrorCode::kShapeMismatch, "row_norm expects a matrix");
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  Tensor out(Shape{rows, 1});
  const auto& v = a.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < cols; ++j) ss += v[r * cols + j] * v[r * cols + j];
    out[r] = std::sqrt(ss);
  }
  return a.graph->record(std::move(out), {a}, "row_norm", [a, rows, cols](Graph& g, const Tensor& out, const Tensor& go) {
    const auto& v = a.value();
    Tensor ga(a.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      if (out[r] == 0.0) continue;
      const double f = go[r] / out[r];
      for (std::size_t j = 0; j < cols; ++j) ga[r * cols + j] = f * v[r * cols + j];
    }
    g.accumulate(a, ga);
  });
}

Var standardize(Var a, double eps) {
  if (a.value().rank() != 3) throw Error(ErrorCode::kShapeMismatch, "standardize expects [G, P, C]");
  const std::size_t groups = a.shape()[0], positions = a.shape()[1], channels = a.shape()[2];
  if (positions == 0) throw Error(ErrorCode::kEmptyReduction, "standardize over zero positions");
  const auto& x = a.value();
  Tensor out(a.shape());
  Tensor sigma(Shape{groups, channels});
  const double inv = 1.0 / static_cast<double>(positions);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = gi * positions * channels + c;
      double s = 0.0;
      for (std::size_t p = 0; p < positions; ++p) s += x[base + p * channels];
      const double mu = s * inv;
      double ss = 0.0;
      for (std::size_t p = 0; p < positions; ++p) {
        const double d = x[base + p * channels] - mu;
        ss += d * d;
      }
      const double sd = std::sqrt(ss * inv);
      sigma[gi * channels + c] = sd;
      const double denom = sd + eps;
      for (std::size_t p = 0; p < positions; ++p) out[base + p * channels] = (x[base + p * channels] - mu) / denom;
    }
  }
  return a.graph->record(std::move(out), {a}, "standardize",
                         [a, sigma = std::move(sigma), eps, groups, positions, channels](
                             Graph& g, const Tensor& out, const Tensor& go) {
                           Tensor ga(a.shape());
                           const double inv = 1.0 / static_cast<double>(positions);
                           std::vector<double> gc(positions);
                           for (std::size_t gi = 0; gi < groups; ++gi) {
                             for (std::size_t c = 0; c < channels; ++c) {
                               const std::size_t base = gi * positions * channels + c;
                               const double sd = sigma[gi * channels + c];
                               const double denom = sd + eps;
                               // out = centered / denom, so centered = out * denom.
                               double g_sigma = 0.0;
                               for (std::size_t p = 0; p < positions; ++p) {
                                 g_sigma -= go[base + p * channels] * out[base + p * channels] / denom;
                               }
                               double mean_gc = 0.0;
                               for (std::size_t p = 0; p < positions; ++p) {
                                 const double centered = out[base + p * channels] * denom;
                                 double v = go[base + p * channels] / denom;
                                 if (sd > 0.0) v += g_sigma * centered * inv / sd;
                                 gc[p] = v;
                                 mean_gc += v;
                               }
                               mean_gc *= inv;
                               for (std::size_t p = 0; p < positions; ++p) ga[base + p * channels] = gc[p] - mean_gc;
                             }
                           }
                           g.accumulate(a, ga);
                         });
}

namespace {

struct PoolDims {
  std::size_t n, h, w, c, oh, ow;
};

PoolDims pool_dims(const Shape& s, std::size_t window) {
  if (s.size() != 4) throw Error(ErrorCode::kShapeMismatch, "pooling expects [N,H,W,C], got " + shape_string(s));
  if (window == 0) throw Error(ErrorCode::kInvalidArgument, "pool window must be >= 1");
  PoolDims d{s[0], s[1], s[2], s[3], s[1] / window, s[2] / window};
  if (d.oh == 0 || d.ow == 0) throw Error(ErrorCode::kGeometryInvalid, "pool window larger than input");
  return d;
}

}  // namespace

Var max_pool(Var x, std::size_t window) {
  const PoolDims d = pool_dims(x.shape(), window);
  const auto& v = x.value();
  Tensor out(Shape{d.n, d.oh, d.ow, d.c});
  std::vector<std::size_t> argmax(out.numel());
  std::size_t o = 0;
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t oy = 0; oy < d.oh; ++oy) {
      for (std::size_t ox = 0; ox < d.ow; ++ox) {
        for (std::size_t c = 0; c < d.c; ++c, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_i = 0;
          for (std::size_t ky = 0; ky < window; ++ky) {
            for (std::size_t kx = 0; kx < window; ++kx) {
              const std::size_t i = ((n * d.h + oy * window + ky) * d.w + ox * window + kx) * d.c + c;
              if (v[i] > best) {
                best = v[i];
                best_i = i;
              }
            }
          }
          out[o] = best;
          argmax[o] = best_i;
        }
      }
    }
  }
  return x.graph->record(std::move(out), {x}, "max_pool",
                         [x, argmax = std::move(argmax)](Graph& g, const Tensor&, const Tensor& go) {
                           Tensor gx(x.shape());
                           for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += go[i];
                           g.accumulate(x, gx);
                         });
}

Var avg_pool(Var x, std::size_t window) {
  const PoolDims d = pool_dims(x.shape(), window);
  const auto& v = x.value();
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor out(Shape{d.n, d.oh, d.ow, d.c});
  auto for_each = [d, window](auto&& fn) {
    std::size_t o = 0;
    for (std::size_t n = 0; n < d.n; ++n)
      for (std::size_t oy = 0; oy < d.oh; ++oy)
        for (std::size_t ox = 0; ox < d.ow; ++ox)
          for (std::size_t c = 0; c < d.c; ++c, ++o)
            for (std::size_t ky = 0; ky < window; ++ky)
              for (std::size_t kx = 0; kx < window; ++kx)
                fn(o, ((n * d.h + oy * window + ky) * d.w + ox * window + kx) * d.c + c);
  };
  for_each([&](std::size_t o, std::size_t i) { out[o] += v[i] * inv; });
  return x.graph->record(std::move(out), {x}, "avg_pool", [x, for_each, inv](Graph& g, const Tensor&, const Tensor& go) {
    Tensor gx(x.shape());
    for_each([&](std::size_t o, std::size_t i) { gx[i] += go[o] * inv; });
    g.accumulate(x, gx);
  });
}

Var softmax_xent(Var logits, const std::vector<int>& labels) {
  const auto& z = logits.value();
  if (z.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "logits must be [N, classes]");
  const std::size_t n = z.dim(0), k = z.dim(1);
  if (labels.size() != n) throw Error(ErrorCode::kShapeMismatch, "label count does not match batch");
  if (n == 0) throw Error(ErrorCode::kEmptyReduction, "empty batch");
  Tensor probs(z.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(y) + " with " + std::to_string(k) + " classes");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, z[i * k + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(z[i * k + j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(z[i * k + j] - lse);
    loss += lse - z[i * k + static_cast<std::size_t>(y)];
  }
  loss /= static_cast<double>(n);
  return logits.graph->record(Tensor::scalar(loss), {logits}, "softmax_xent",
                              [logits, labels, probs = std::move(probs), n, k](Graph& g, const Tensor&,
                                                                                const Tensor& go) {
                                Tensor gz = probs;
                                for (std::size_t i = 0; i < n; ++i) gz[i * k + static_cast<std::size_t>(labels[i])] -= 1.0;
                                g.accumulate(logits, gz * (go[0] / static_cast<double>(n)));
                              });
}

Var faulty_identity(Var a, double factor) {
  return a.graph->record(a.value(), {a}, "faulty_identity", [a, factor](Graph& g, const Tensor&, const Tensor& go) {
    g.accumulate(a, go * factor);
  });
}

}  // namespace xcnet::ad
