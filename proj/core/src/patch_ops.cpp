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

#include "xcnet/patch_ops.hpp"

#include <algorithm>
#include <cmath>

namespace xcnet {

std::size_t ConvGeometry::out_extent(std::size_t in_extent) const {
  const std::size_t padded = in_extent + 2 * padding;
  if (stride == 0 || padded < kernel) return 0;
  return (padded - kernel) / stride + 1;
}

void ConvGeometry::validate(std::size_t height, std::size_t width) const {
  if (kernel == 0 || kernel % 2 == 0) {
    throw Error(ErrorCode::kGeometryInvalid, "kernel must be odd and >= 1, got " + std::to_string(kernel));
  }
  if (stride == 0) throw Error(ErrorCode::kGeometryInvalid, "stride must be >= 1");
  if (in_channels == 0 || out_channels == 0) throw Error(ErrorCode::kGeometryInvalid, "channel counts must be >= 1");
  if (out_extent(height) < 1 || out_extent(width) < 1) {
    throw Error(ErrorCode::kGeometryInvalid, "output extent < 1 for input " + std::to_string(height) + "x" +
                                                 std::to_string(width) + ", kernel " + std::to_string(kernel));
  }
}

namespace {

struct InputDims {
  std::size_t n, h, w, c;
  bool batched;
};

InputDims input_dims(const Shape& s, const ConvGeometry& g) {
  InputDims d{};
  if (s.size() == 3) {
    d = {1, s[0], s[1], s[2], false};
  } else if (s.size() == 4) {
    d = {s[0], s[1], s[2], s[3], true};
  } else {
    throw Error(ErrorCode::kShapeMismatch, "feature map must be [H,W,C] or [N,H,W,C], got " + shape_string(s));
  }
  if (d.c != g.in_channels) {
    throw Error(ErrorCode::kShapeMismatch, "input has " + std::to_string(d.c) + " channels, geometry expects " +
                                               std::to_string(g.in_channels));
  }
  g.validate(d.h, d.w);
  return d;
}

Shape output_prefix(const InputDims& d, const ConvGeometry& g) {
  const std::size_t ho = g.out_extent(d.h), wo = g.out_extent(d.w);
  return d.batched ? Shape{d.n, ho, wo} : Shape{ho, wo};
}

}  // namespace

Tensor im2col_matrix(const Tensor& x, const ConvGeometry& g) {
  const InputDims d = input_dims(x.shape(), g);
  const std::size_t ho = g.out_extent(d.h), wo = g.out_extent(d.w);
  const std::size_t alpha = g.alpha();
  const std::size_t k = g.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  Tensor cols(Shape{d.n * ho * wo, alpha});
  auto src = x.data();
  auto dst = cols.data();
  std::size_t row = 0;
  for (std::size_t n = 0; n < d.n; ++n) {
    const std::size_t base = n * d.h * d.w * d.c;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++row) {
        double* out = dst.data() + row * alpha;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
            double* slot = out + (ky * k + kx) * d.c;
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(d.h) || ix >= static_cast<std::ptrdiff_t>(d.w)) {
              std::fill_n(slot, d.c, 0.0);
            } else {
              const double* in = src.data() + base + (static_cast<std::size_t>(iy) * d.w + static_cast<std::size_t>(ix)) * d.c;
              std::copy_n(in, d.c, slot);
            }
          }
        }
      }
    }
  }
  return cols;
}

Tensor col2im(const Tensor& cols, const Shape& input_shape, const ConvGeometry& g) {
  const InputDims d = input_dims(input_shape, g);
  const std::size_t ho = g.out_extent(d.h), wo = g.out_extent(d.w);
  const std::size_t alpha = g.alpha();
  if (cols.rank() != 2 || cols.dim(0) != d.n * ho * wo || cols.dim(1) != alpha) {
    throw Error(ErrorCode::kShapeMismatch, "col2im got " + shape_string(cols.shape()));
  }
  const std::size_t k = g.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  Tensor x(input_shape);
  auto dst = x.data();
  auto src = cols.data();
  std::size_t row = 0;
  for (std::size_t n = 0; n < d.n; ++n) {
    const std::size_t base = n * d.h * d.w * d.c;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++row) {
        const double* in = src.data() + row * alpha;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
            const double* slot = in + (ky * k + kx) * d.c;
            double* out = dst.data() + base + (static_cast<std::size_t>(iy) * d.w + static_cast<std::size_t>(ix)) * d.c;
            for (std::size_t c = 0; c < d.c; ++c) out[c] += slot[c];
          }
        }
      }
    }
  }
  return x;
}

PatchView im2col(const Tensor& x, const ConvGeometry& g) {
  const InputDims d = input_dims(x.shape(), g);
  PatchView pv;
  pv.patches = im2col_matrix(x, g);
  pv.out_prefix = output_prefix(d, g);
  const std::size_t rows = pv.patches.dim(0);
  const std::size_t alpha = pv.patches.dim(1);
  pv.patch_mean = Tensor(Shape{rows});
  pv.patch_std = Tensor(Shape{rows});
  pv.patch_norm_centered = Tensor(Shape{rows});
  const double inv = 1.0 / static_cast<double>(alpha);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = pv.patches.data().data() + r * alpha;
    double s = 0.0;
    for (std::size_t j = 0; j < alpha; ++j) s += p[j];
    const double mu = s * inv;
    double ss = 0.0;
    for (std::size_t j = 0; j < alpha; ++j) ss += (p[j] - mu) * (p[j] - mu);
    pv.patch_mean[r] = mu;
    pv.patch_std[r] = std::sqrt(ss * inv);
    pv.patch_norm_centered[r] = std::sqrt(ss);
  }
  return pv;
}

Tensor weight_matrix(const Tensor& w, const ConvGeometry& g) {
  const Shape expected{g.kernel, g.kernel, g.in_channels, g.out_channels};
  if (w.shape() != expected) {
    throw Error(ErrorCode::kShapeMismatch, "weights " + shape_string(w.shape()) + ", expected " + shape_string(expected));
  }
  return w.reshaped(Shape{g.alpha(), g.out_channels});
}

WeightStats weight_stats(const Tensor& w, const ConvGeometry& g) {
  const Tensor wm = weight_matrix(w, g);
  const std::size_t alpha = g.alpha(), cout = g.out_channels;
  WeightStats ws{Tensor(Shape{cout}), Tensor(Shape{cout}), Tensor(Shape{cout})};
  const double inv = 1.0 / static_cast<double>(alpha);
  for (std::size_t c = 0; c < cout; ++c) {
    double s = 0.0;
    for (std::size_t j = 0; j < alpha; ++j) s += wm[j * cout + c];
    const double mu = s * inv;
    double ss = 0.0;
    for (std::size_t j = 0; j < alpha; ++j) ss += (wm[j * cout + c] - mu) * (wm[j * cout + c] - mu);
    ws.w_mean[c] = mu;
    ws.w_std[c] = std::sqrt(ss * inv);
    ws.w_centered_norm[c] = std::sqrt(ss);
  }
  return ws;
}

Tensor linear_xcorr(const Tensor& x, const Tensor& w, const ConvGeometry& g) {
  const InputDims d = input_dims(x.shape(), g);
  Tensor out = matmul(im2col_matrix(x, g), weight_matrix(w, g));
  Shape shape = output_prefix(d, g);
  shape.push_back(g.out_channels);
  return out.reshaped(std::move(shape));
}

Tensor averaging_kernel(const ConvGeometry& g) {
  return Tensor(Shape{g.kernel, g.kernel, g.in_channels, 1}, 1.0 / static_cast<double>(g.alpha()));
}

Tensor mean_filter(const Tensor& x, const ConvGeometry& g) {
  ConvGeometry single = g;
  single.out_channels = 1;
  return linear_xcorr(x, averaging_kernel(single), single);
}

}  // namespace xcnet
