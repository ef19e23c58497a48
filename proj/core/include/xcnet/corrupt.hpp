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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xcnet/dataset.hpp"
#include "xcnet/rng.hpp"
#include "xcnet/tensor.hpp"

namespace xcnet {

enum class CorruptionFamily { kGaussianNoise, kSaltPepper, kGaussianBlur, kBrightnessContrast, kPixelate };

inline constexpr int kMaxSeverity = 5;

struct CorruptionSpec {
  CorruptionFamily family = CorruptionFamily::kGaussianNoise;
  int severity = 0;
  std::uint64_t seed = 0;
};

/// Per-severity parameters, index 0..5. Index 0 must be the identity setting.
struct SeverityTable {
  std::array<double, 6> noise_sigma{0.0, 0.04, 0.08, 0.12, 0.18, 0.26};
  std::array<double, 6> flip_prob{0.0, 0.01, 0.02, 0.04, 0.07, 0.10};
  std::array<double, 6> blur_sigma{0.0, 0.4, 0.6, 0.9, 1.3, 1.8};
  std::array<std::pair<double, double>, 6> contrast_shift{
      {{1.0, 0.0}, {1.1, 0.05}, {1.25, 0.1}, {1.4, -0.1}, {1.6, 0.15}, {1.8, -0.2}}};
  std::array<double, 6> pixelate_factor{1.0, 1.25, 1.5, 2.0, 2.5, 3.0};
};

std::string to_string(CorruptionFamily family);
/// Throws UnknownFamily.
CorruptionFamily parse_family(std::string_view name);
const std::vector<CorruptionFamily>& all_families();

/// Corrupts one [H, W, C] image. Severity 0 returns an exact copy; every
/// other output is clamped to [0, 1]. Throws SeverityOutOfRange.
Tensor corrupt(const Tensor& image, const CorruptionSpec& spec, const SeverityTable& table = {});

/// Corrupts every image; image i uses seed hash_combine(spec.seed, i).
Dataset corrupt_dataset(const Dataset& ds, const CorruptionSpec& spec, const SeverityTable& table = {});

/// Zero-padded same-size correlation of an [H, W, C] image with a
/// [K, K, C, C] kernel, blended with the input and min-max rescaled to [0,1].
Tensor random_conv_apply(const Tensor& image, const Tensor& kernel, double mix);

/// With probability p_apply draws K from {1,3,5,7} and kernel weights from
/// normal(0, 1/K^2), then applies random_conv_apply. Exactly one uniform draw
/// is consumed when the augmentation is skipped.
Tensor random_conv_augment(const Tensor& image, Rng& rng, double p_apply, double mix);

}  // namespace xcnet
