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

#include "xcnet/tensor.hpp"

namespace xcnet {

/// Square-kernel sliding-window geometry shared by plain correlation and the
/// normalized operators. A dense layer is the kernel = 1, 1x1-spatial case.
struct ConvGeometry {
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;

  /// Number of entries in one patch, K * K * C_in.
  std::size_t alpha() const noexcept { return kernel * kernel * in_channels; }
  std::size_t out_extent(std::size_t in_extent) const;

  /// Throws GeometryInvalid unless the kernel is odd and positive, the
  /// stride is positive and both output extents are at least 1.
  void validate(std::size_t height, std::size_t width) const;
};

/// im2col matrix of an input plus per-patch statistics. Statistics include
/// zero-padded slots: every patch has exactly alpha entries.
struct PatchView {
  Tensor patches;              ///< [rows, alpha], rows = N * H_out * W_out in raster order
  Tensor patch_mean;           ///< [rows]
  Tensor patch_std;            ///< [rows], population
  Tensor patch_norm_centered;  ///< [rows], ||z - mean(z)||
  Shape out_prefix;            ///< [H_out, W_out] or [N, H_out, W_out]

  std::size_t rows() const { return patches.dim(0); }
  std::size_t alpha() const { return patches.dim(1); }
};

/// Per-output-channel statistics of a [K, K, C_in, C_out] weight tensor.
struct WeightStats {
  Tensor w_mean;           ///< [C_out]
  Tensor w_std;            ///< [C_out], population
  Tensor w_centered_norm;  ///< [C_out]
};

/// Extracts zero-padded patches from x ([H, W, C] or [N, H, W, C]). Row r of
/// the result is the window feeding output pixel r; within a row the order is
/// (ky, kx, c), matching a row-major flatten of the first three weight axes.
PatchView im2col(const Tensor& x, const ConvGeometry& g);

/// Patch matrix only, without statistics.
Tensor im2col_matrix(const Tensor& x, const ConvGeometry& g);

/// Adjoint of im2col_matrix: scatters [rows, alpha] back onto an input of
/// `input_shape`, summing overlapping contributions and dropping padding.
Tensor col2im(const Tensor& cols, const Shape& input_shape, const ConvGeometry& g);

/// Weights reshaped to [alpha, C_out].
Tensor weight_matrix(const Tensor& w, const ConvGeometry& g);

WeightStats weight_stats(const Tensor& w, const ConvGeometry& g);

/// Plain cross-correlation: every output pixel is the dot product of its
/// patch with the flattened channel weights.
Tensor linear_xcorr(const Tensor& x, const Tensor& w, const ConvGeometry& g);

/// Patch mean at every output location, computed as a correlation with the
/// constant 1/alpha kernel. Output has a single channel.
Tensor mean_filter(const Tensor& x, const ConvGeometry& g);

/// Constant [K, K, C_in, 1] kernel with every entry 1/alpha.
Tensor averaging_kernel(const ConvGeometry& g);

}  // namespace xcnet
