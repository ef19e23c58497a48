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

#include "xcnet/corrupt.hpp"

#include <algorithm>
#include <cmath>

#include "xcnet/patch_ops.hpp"

namespace xcnet {

std::string to_string(CorruptionFamily family) {
  switch (family) {
    case CorruptionFamily::kGaussianNoise: return "gaussian_noise";
    case CorruptionFamily::kSaltPepper: return "salt_pepper";
    case CorruptionFamily::kGaussianBlur: return "gaussian_blur";
    case CorruptionFamily::kBrightnessContrast: return "brightness_contrast";
    case CorruptionFamily::kPixelate: return "pixelate";
  }
  return "unknown";
}

const std::vector<CorruptionFamily>& all_families() {
  static const std::vector<CorruptionFamily> families{
      CorruptionFamily::kGaussianNoise, CorruptionFamily::kSaltPepper, CorruptionFamily::kGaussianBlur,
      CorruptionFamily::kBrightnessContrast, CorruptionFamily::kPixelate};
  return families;
}

CorruptionFamily parse_family(std::string_view name) {
  for (auto f : all_families()) {
    if (to_string(f) == name) return f;
  }
  throw Error(ErrorCode::kUnknownFamily, "unknown corruption family '" + std::string(name) + "'");
}

namespace {

void clamp_unit(Tensor& t) {
  for (auto& v : t.data()) v = std::clamp(v, 0.0, 1.0);
}

Tensor blur(const Tensor& img, double sigma) {
  const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = std::exp(-static_cast<double>(k * k) / (2 * sigma * sigma));
    taps[static_cast<std::size_t>(k + radius)] = v;
    total += v;
  }
  for (auto& v : taps) v /= total;
  auto clampi = [](std::ptrdiff_t i, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  // Separable; borders replicate the edge pixel.
  Tensor tmp(img.shape());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) {
        double acc = 0;
        for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
          acc += taps[static_cast<std::size_t>(d + radius)] *
                 img[(y * w + clampi(static_cast<std::ptrdiff_t>(x) + d, w)) * c + k];
        }
        tmp[(y * w + x) * c + k] = acc;
      }
  Tensor out(img.shape());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) {
        double acc = 0;
        for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
          acc += taps[static_cast<std::size_t>(d + radius)] *
                 tmp[(clampi(static_cast<std::ptrdiff_t>(y) + d, h) * w + x) * c + k];
        }
        out[(y * w + x) * c + k] = acc;
      }
  return out;
}

Tensor pixelate(const Tensor& img, double factor) {
  const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  const auto sh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(h) / factor)));
  const auto sw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(w) / factor)));
  // Box-average into sh x sw cells, then nearest-neighbour back up.
  Tensor cells(Shape{sh, sw, c});
  std::vector<double> count(sh * sw, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t cy = y * sh / h, cx = x * sw / w;
      count[cy * sw + cx] += 1;
      for (std::size_t k = 0; k < c; ++k) cells[(cy * sw + cx) * c + k] += img[(y * w + x) * c + k];
    }
  Tensor out(img.shape());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t cy = y * sh / h, cx = x * sw / w;
      for (std::size_t k = 0; k < c; ++k) {
        out[(y * w + x) * c + k] = cells[(cy * sw + cx) * c + k] / count[cy * sw + cx];
      }
    }
  return out;
}

}  // namespace

Tensor corrupt(const Tensor& image, const CorruptionSpec& spec, const SeverityTable& table) {
  if (spec.severity < 0 || spec.severity > kMaxSeverity) {
    throw Error(ErrorCode::kSeverityOutOfRange, "severity " + std::to_string(spec.severity) + " outside 0..5");
  }
  if (image.rank() != 3) throw Error(ErrorCode::kShapeMismatch, "corrupt expects [H, W, C]");
  if (spec.severity == 0) return image;
  const auto s = static_cast<std::size_t>(spec.severity);
  Rng rng(spec.seed);
  Tensor out = image;
  switch (spec.family) {
    case CorruptionFamily::kGaussianNoise: {
      const double sigma = table.noise_sigma[s];
      for (auto& v : out.data()) v += sigma * rng.normal();
      break;
    }
    case CorruptionFamily::kSaltPepper: {
      const double p = table.flip_prob[s];
      for (auto& v : out.data()) {
        // Two draws per pixel regardless of outcome keeps streams aligned.
        const double u = rng.uniform();
        const double coin = rng.uniform();
        if (u < p) v = coin < 0.5 ? 0.0 : 1.0;
      }
      break;
    }
    case CorruptionFamily::kGaussianBlur:
      out = blur(image, table.blur_sigma[s]);
      break;
    case CorruptionFamily::kBrightnessContrast: {
      const auto [a, b] = table.contrast_shift[s];
      const double mu = mean(image);
      for (auto& v : out.data()) v = (v - mu) * a + mu + b;
      break;
    }
    case CorruptionFamily::kPixelate:
      out = pixelate(image, table.pixelate_factor[s]);
      break;
  }
  clamp_unit(out);
  return out;
}

Dataset corrupt_dataset(const Dataset& ds, const CorruptionSpec& spec, const SeverityTable& table) {
  Dataset out = ds;
  if (spec.severity < 0 || spec.severity > kMaxSeverity) {
    throw Error(ErrorCode::kSeverityOutOfRange, "severity " + std::to_string(spec.severity) + " outside 0..5");
  }
  if (spec.severity == 0) return out;
  const std::size_t per = ds.height() * ds.width() * ds.images.dim(3);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CorruptionSpec local = spec;
    local.seed = hash_combine(spec.seed, i);
    const Tensor img = corrupt(ds.image(i), local, table);
    std::copy(img.data().begin(), img.data().end(), out.images.data().begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  out.provenance += "; " + to_string(spec.family) + " s" + std::to_string(spec.severity);
  return out;
}

Tensor random_conv_apply(const Tensor& image, const Tensor& kernel, double mix) {
  if (mix < 0.0 || mix > 1.0) throw Error(ErrorCode::kInvalidArgument, "mix must lie in [0, 1]");
  ConvGeometry g;
  g.kernel = kernel.dim(0);
  g.padding = g.kernel / 2;
  g.in_channels = image.dim(2);
  g.out_channels = kernel.dim(3);
  const Tensor conv = linear_xcorr(image, kernel, g);
  Tensor out = conv * mix + image * (1.0 - mix);
  const double lo = min_value(out), hi = max_value(out);
  if (hi - lo <= 0.0) {
    for (auto& v : out.data()) v = std::clamp(v, 0.0, 1.0);
    return out;
  }
  for (auto& v : out.data()) v = (v - lo) / (hi - lo);
  return out;
}

Tensor random_conv_augment(const Tensor& image, Rng& rng, double p_apply, double mix) {
  if (rng.uniform() >= p_apply) return image;
  static constexpr std::size_t kSizes[] = {1, 3, 5, 7};
  const std::size_t k = kSizes[rng.below(4)];
  const std::size_t c = image.dim(2);
  const Tensor kernel = rand_fill(rng, Shape{k, k, c, c}, Normal{0.0, 1.0 / static_cast<double>(k * k)});
  return random_conv_apply(image, kernel, mix);
}

}  // namespace xcnet
