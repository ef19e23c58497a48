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

#include "xcnet/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace xcnet {

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw Error(ErrorCode::kShapeMismatch, "data length " + std::to_string(data_.size()) +
                                               " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw Error(ErrorCode::kAxisOutOfRange, "axis " + std::to_string(axis) + " for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::flat_index(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "index rank does not match tensor rank");
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw Error(ErrorCode::kAxisOutOfRange, "index out of range");
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[flat_index(index)]; }
double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[flat_index(index)]; }

double Tensor::item() const {
  if (data_.size() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "item() on tensor of shape " + shape_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

// ---------------------------------------------------------------------------

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double apply_unary(ElemOp op, double x) {
  switch (op) {
    case ElemOp::kExp: return std::exp(x);
    case ElemOp::kSqrt: return std::sqrt(x);
    case ElemOp::kMax0: return x > 0.0 ? x : 0.0;
    case ElemOp::kSigmoid: return sigmoid(x);
    case ElemOp::kSign: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    case ElemOp::kAbs: return std::abs(x);
    default: return x;
  }
}

double apply_binary(ElemOp op, double x, double y) {
  switch (op) {
    case ElemOp::kAdd: return x + y;
    case ElemOp::kSub: return x - y;
    case ElemOp::kMul: return x * y;
    case ElemOp::kDiv:
      if (y == 0.0) throw Error(ErrorCode::kDivideByZero, "elementwise division by zero");
      return x / y;
    case ElemOp::kPow: return std::pow(x, y);
    default: return apply_unary(op, x);
  }
}

bool is_unary(ElemOp op) {
  return op == ElemOp::kExp || op == ElemOp::kSqrt || op == ElemOp::kMax0 || op == ElemOp::kSigmoid ||
         op == ElemOp::kSign || op == ElemOp::kAbs;
}

// Row-major strides of `shape` with broadcast axes (extent 1 against a larger
// output extent) given stride 0.
std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = out.size(); i-- > 0;) {
    strides[i] = (shape[i] == 1 && out[i] != 1) ? 0 : stride;
    stride *= shape[i];
  }
  return strides;
}

template <typename Fn>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, Fn fn) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = fn(a[i], b[i]);
    return out;
  }
  if (b.numel() == 1) {
    Tensor out(a.shape());
    const double y = b[0];
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = fn(a[i], y);
    return out;
  }
  if (a.numel() == 1) {
    Tensor out(b.shape());
    const double x = a[0];
    for (std::size_t i = 0; i < b.numel(); ++i) out[i] = fn(x, b[i]);
    return out;
  }
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  Tensor out(out_shape);
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  const std::size_t rank = out_shape.size();
  // Odometer over the outer axes; the innermost axis runs as a strided loop.
  const std::size_t inner = out_shape[rank - 1], ia_step = sa[rank - 1], ib_step = sb[rank - 1];
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t flat = 0; flat < out.numel(); flat += inner) {
    double* dst = out.data().data() + flat;
    for (std::size_t k = 0; k < inner; ++k) dst[k] = fn(a[ia + k * ia_step], b[ib + k * ib_step]);
    for (std::size_t axis = rank - 1; axis-- > 0;) {
      ++idx[axis];
      ia += sa[axis];
      ib += sb[axis];
      if (idx[axis] < out_shape[axis]) break;
      ia -= sa[axis] * idx[axis];
      ib -= sb[axis] * idx[axis];
      idx[axis] = 0;
    }
  }
  return out;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (shape_numel(b) == 1) return a;
  if (shape_numel(a) == 1) return b;
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kShapeMismatch, "cannot broadcast " + shape_string(a) + " with " + shape_string(b));
  }
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i] || b[i] == 1) {
      out[i] = a[i];
    } else if (a[i] == 1) {
      out[i] = b[i];
    } else {
      throw Error(ErrorCode::kShapeMismatch, "cannot broadcast " + shape_string(a) + " with " + shape_string(b));
    }
  }
  return out;
}

Tensor elementwise(ElemOp op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case ElemOp::kAdd: return broadcast_apply(a, b, [](double x, double y) { return x + y; });
    case ElemOp::kSub: return broadcast_apply(a, b, [](double x, double y) { return x - y; });
    case ElemOp::kMul: return broadcast_apply(a, b, [](double x, double y) { return x * y; });
    default: break;
  }
  if (is_unary(op)) return elementwise(op, a, 0.0);
  return broadcast_apply(a, b, [op](double x, double y) { return apply_binary(op, x, y); });
}

Tensor elementwise(ElemOp op, const Tensor& a, double b) {
  Tensor out(a.shape());
  if (is_unary(op)) {
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = apply_unary(op, a[i]);
  } else {
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = apply_binary(op, a[i], b);
  }
  return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) { return elementwise(ElemOp::kAdd, a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return elementwise(ElemOp::kSub, a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return elementwise(ElemOp::kMul, a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return elementwise(ElemOp::kDiv, a, b); }
Tensor operator*(const Tensor& a, double s) { return elementwise(ElemOp::kMul, a, s); }
Tensor operator+(const Tensor& a, double s) { return elementwise(ElemOp::kAdd, a, s); }

void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

Tensor map(const Tensor& a, double (*fn)(double)) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = fn(a[i]);
  return out;
}

// ---------------------------------------------------------------------------

Tensor reduce(ReduceOp op, const Tensor& a, const std::vector<std::size_t>& axes, bool keepdims) {
  const std::size_t rank = a.rank();
  std::vector<bool> reduced(rank, axes.empty());
  for (auto axis : axes) {
    if (axis >= rank) {
      throw Error(ErrorCode::kAxisOutOfRange,
                  "axis " + std::to_string(axis) + " for shape " + shape_string(a.shape()));
    }
    reduced[axis] = true;
  }

  Shape kept_shape(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    kept_shape[i] = reduced[i] ? 1 : a.shape()[i];
    if (reduced[i]) count *= a.shape()[i];
  }
  if (count == 0 || a.numel() == 0) {
    throw Error(ErrorCode::kEmptyReduction, "reduction over zero elements of shape " + shape_string(a.shape()));
  }

  // Map every input element to its output slot via broadcast strides.
  const auto out_strides = broadcast_strides(kept_shape, a.shape());
  const std::size_t out_n = shape_numel(kept_shape);
  std::vector<double> acc(out_n, 0.0);
  std::vector<double> acc2(op == ReduceOp::kVar ? out_n : 0, 0.0);
  if (op == ReduceOp::kMax) std::fill(acc.begin(), acc.end(), -std::numeric_limits<double>::infinity());
  if (op == ReduceOp::kMin) std::fill(acc.begin(), acc.end(), std::numeric_limits<double>::infinity());

  auto visit = [&](auto&& fn) {
    if (rank == 0) {
      fn(std::size_t{0}, a[0]);
      return;
    }
    const std::size_t inner = a.shape()[rank - 1], step = out_strides[rank - 1];
    std::vector<std::size_t> idx(rank, 0);
    std::size_t o = 0;
    for (std::size_t flat = 0; flat < a.numel(); flat += inner) {
      for (std::size_t k = 0; k < inner; ++k) fn(o + k * step, a[flat + k]);
      for (std::size_t axis = rank - 1; axis-- > 0;) {
        ++idx[axis];
        o += out_strides[axis];
        if (idx[axis] < a.shape()[axis]) break;
        o -= out_strides[axis] * idx[axis];
        idx[axis] = 0;
      }
    }
  };

  switch (op) {
    case ReduceOp::kSum:
    case ReduceOp::kMean:
    case ReduceOp::kVar:
      visit([&](std::size_t o, double v) { acc[o] += v; });
      break;
    case ReduceOp::kMax:
      visit([&](std::size_t o, double v) { acc[o] = std::max(acc[o], v); });
      break;
    case ReduceOp::kMin:
      visit([&](std::size_t o, double v) { acc[o] = std::min(acc[o], v); });
      break;
  }
  const double inv = 1.0 / static_cast<double>(count);
  if (op == ReduceOp::kMean || op == ReduceOp::kVar) {
    for (auto& v : acc) v *= inv;
  }
  if (op == ReduceOp::kVar) {
    // Two-pass: sum of squared deviations from the already computed mean.
    visit([&](std::size_t o, double v) {
      const double d = v - acc[o];
      acc2[o] += d * d;
    });
    for (std::size_t i = 0; i < out_n; ++i) acc[i] = acc2[i] * inv;
  }

  Shape out_shape;
  if (keepdims) {
    out_shape = kept_shape;
  } else {
    for (std::size_t i = 0; i < rank; ++i) {
      if (!reduced[i]) out_shape.push_back(a.shape()[i]);
    }
  }
  return Tensor(std::move(out_shape), std::move(acc));
}

double mean(const Tensor& a) { return reduce(ReduceOp::kMean, a).item(); }
double variance(const Tensor& a) { return reduce(ReduceOp::kVar, a).item(); }
double sum(const Tensor& a) { return reduce(ReduceOp::kSum, a).item(); }
double max_value(const Tensor& a) { return reduce(ReduceOp::kMax, a).item(); }
double min_value(const Tensor& a) { return reduce(ReduceOp::kMin, a).item(); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool all_finite(const Tensor& a) noexcept {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------

namespace {
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "matmul expects matrices, got " + shape_string(a.shape()) + " and " +
                                               shape_string(b.shape()));
  }
  const auto ar = static_cast<Eigen::Index>(a.dim(0)), ac = static_cast<Eigen::Index>(a.dim(1));
  const auto br = static_cast<Eigen::Index>(b.dim(0)), bc = static_cast<Eigen::Index>(b.dim(1));
  const auto m = transpose_a ? ac : ar;
  const auto k = transpose_a ? ar : ac;
  const auto k2 = transpose_b ? bc : br;
  const auto n = transpose_b ? br : bc;
  if (k != k2) {
    throw Error(ErrorCode::kShapeMismatch, "matmul inner dimensions differ: " + shape_string(a.shape()) + " x " +
                                               shape_string(b.shape()));
  }
  Tensor out(Shape{static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
  ConstMap A(a.data().data(), ar, ac);
  ConstMap B(b.data().data(), br, bc);
  MutMap C(out.data().data(), m, n);
  if (m == 0 || n == 0) return out;
  if (k == 0) return out;
  if (!transpose_a && !transpose_b) {
    C.noalias() = A * B;
  } else if (transpose_a && !transpose_b) {
    C.noalias() = A.transpose() * B;
  } else if (!transpose_a && transpose_b) {
    C.noalias() = A * B.transpose();
  } else {
    C.noalias() = A.transpose() * B.transpose();
  }
  return out;
}

Tensor take(const Tensor& a, const std::vector<std::size_t>& index) {
  if (a.rank() == 0) throw Error(ErrorCode::kShapeMismatch, "take on rank-0 tensor");
  const std::size_t rows = a.dim(0);
  const std::size_t stride = rows ? a.numel() / rows : 0;
  Shape shape = a.shape();
  shape[0] = index.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) throw Error(ErrorCode::kAxisOutOfRange, "take index out of range");
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(index[i] * stride), stride,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) return Tensor();
  Shape shape = parts.front().shape();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() || !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1)) {
      throw Error(ErrorCode::kShapeMismatch, "concat_rows trailing extents differ");
    }
    rows += p.dim(0);
  }
  shape[0] = rows;
  std::vector<double> data;
  data.reserve(shape_numel(shape));
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace xcnet
