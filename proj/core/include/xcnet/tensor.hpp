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
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "xcnet/error.hpp"

namespace xcnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Feature maps are laid out [N, H, W, C]
/// (or [H, W, C] for a single sample) with channels innermost, so every
/// receptive-field row of a patch is contiguous in memory.
///
/// A default-constructed tensor has rank 1 and zero elements. A rank-0 tensor
/// (empty shape) holds exactly one value.
class Tensor {
 public:
  Tensor() : shape_{0} {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Multi-index access; the number of indices must equal rank().
  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);

  /// Value of a single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const noexcept {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::size_t flat_index(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Elementwise math

enum class ElemOp { kAdd, kSub, kMul, kDiv, kExp, kSqrt, kMax0, kPow, kSigmoid, kSign, kAbs };

/// Applies `op` elementwise. Binary ops broadcast: shapes must be equal, or
/// have equal rank with each extent either matching or 1, or one operand
/// must hold a single element. Unary ops ignore `b`.
/// Division by an exact zero raises DivideByZero; callers stabilise
/// denominators with an explicit epsilon.
Tensor elementwise(ElemOp op, const Tensor& a, const Tensor& b);
Tensor elementwise(ElemOp op, const Tensor& a, double b = 0.0);

/// Output shape of a broadcasting binary op, or ShapeMismatch.
Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, double s);
Tensor operator+(const Tensor& a, double s);

Tensor map(const Tensor& a, double (*fn)(double));

/// Keeps large freed blocks on the heap instead of handing them back to the
/// OS. A training step drops and reallocates the same buffer sizes every
/// batch; without this each one is re-faulted. No-op outside glibc.
void retain_freed_memory();

// ---------------------------------------------------------------------------
// Reductions

enum class ReduceOp { kMean, kVar, kSum, kMax, kMin };

/// Reduces over `axes` (duplicates ignored). An empty axis list reduces over
/// every axis. Variance uses the population convention (divide by count).
/// Reduced axes are removed unless `keepdims` is set, in which case they stay
/// with extent 1.
Tensor reduce(ReduceOp op, const Tensor& a, const std::vector<std::size_t>& axes = {},
              bool keepdims = false);

double mean(const Tensor& a);
double variance(const Tensor& a);
double sum(const Tensor& a);
double max_value(const Tensor& a);
double min_value(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& a) noexcept;

// ---------------------------------------------------------------------------
// Linear algebra

/// [m, k] x [k, n] -> [m, n]. Optional transposes act on the stored matrices.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false, bool transpose_b = false);

/// Gathers slices along axis 0 (rows of a matrix, samples of a batch).
Tensor take(const Tensor& a, const std::vector<std::size_t>& index);

/// Concatenates along axis 0; trailing extents must agree.
Tensor concat_rows(const std::vector<Tensor>& parts);

}  // namespace xcnet
