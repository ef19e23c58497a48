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

#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "xcnet/rng.hpp"

namespace xcnet {
namespace {

Tensor random_image(std::uint64_t seed, std::size_t side = 16) {
  Rng rng(seed);
  return rand_fill(rng, Shape{side, side, 1}, Uniform{});
}

TEST(Families, NamesRoundTrip) {
  ASSERT_EQ(all_families().size(), 5u);
  for (auto f : all_families()) EXPECT_EQ(parse_family(to_string(f)), f);
  EXPECT_EQ(to_string(CorruptionFamily::kSaltPepper), "salt_pepper");
  EXPECT_XCNET_ERROR(parse_family("fog"), kUnknownFamily);
}

TEST(Corrupt, SeverityZeroIsBitwiseIdentity) {
  const Tensor img = random_image(1);
  for (auto f : all_families()) EXPECT_EQ(corrupt(img, {f, 0, 99}), img) << to_string(f);
}

TEST(Corrupt, SeverityOutOfRange) {
  const Tensor img = random_image(1);
  EXPECT_XCNET_ERROR(corrupt(img, {CorruptionFamily::kGaussianNoise, 6, 0}), kSeverityOutOfRange);
  EXPECT_XCNET_ERROR(corrupt(img, {CorruptionFamily::kPixelate, -1, 0}), kSeverityOutOfRange);
}

TEST(Corrupt, DeterministicPerSpec) {
  const Tensor img = random_image(2);
  for (auto f : all_families()) {
    EXPECT_EQ(corrupt(img, {f, 3, 5}), corrupt(img, {f, 3, 5}));
  }
  EXPECT_NE(corrupt(img, {CorruptionFamily::kGaussianNoise, 3, 5}),
            corrupt(img, {CorruptionFamily::kGaussianNoise, 3, 6}));
}

TEST(Corrupt, OutputsStayInUnitRange) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor img = random_image(seed);
    for (auto f : all_families())
      for (int s = 0; s <= kMaxSeverity; ++s) {
        const Tensor out = corrupt(img, {f, s, seed});
        EXPECT_TRUE(all_finite(out));
        EXPECT_GE(min_value(out), 0.0);
        EXPECT_LE(max_value(out), 1.0);
        EXPECT_EQ(out.shape(), img.shape());
      }
  }
}

TEST(Corrupt, NoiseStdAtTopSeverity) {
  const Tensor img(Shape{128, 128, 1}, 0.5);
  const Tensor out = corrupt(img, {CorruptionFamily::kGaussianNoise, 5, 11});
  // Clamping at 0 and 1 trims tails beyond 1.9 sigma, which costs ~8% of
  // the std, inside the 15% allowance.
  EXPECT_NEAR(std::sqrt(variance(out)), 0.26, 0.15 * 0.26);
}

TEST(Corrupt, SaltPepperFlipRate) {
  const std::size_t n = 128 * 128;
  const Tensor img(Shape{128, 128, 1}, 0.5);
  const Tensor out = corrupt(img, {CorruptionFamily::kSaltPepper, 5, 3});
  std::size_t flipped = 0, salt = 0;
  for (double v : out.data()) {
    if (v != 0.5) {
      ++flipped;
      EXPECT_TRUE(v == 0.0 || v == 1.0);
      salt += v == 1.0;
    }
  }
  const double p = 0.10, sd = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(static_cast<double>(flipped) / n, p, 2 * sd);
  EXPECT_NEAR(static_cast<double>(salt) / flipped, 0.5, 2 * std::sqrt(0.25 / flipped));
}

TEST(Corrupt, BlurKeepsConstantsAndSpreadsImpulses) {
  const Tensor flat(Shape{9, 9, 1}, 0.3);
  const Tensor blurred = corrupt(flat, {CorruptionFamily::kGaussianBlur, 4, 0});
  for (double v : blurred.data()) EXPECT_NEAR(v, 0.3, 1e-12);

  Tensor impulse(Shape{21, 21, 1}, 0.0);
  impulse.at({10, 10, 0}) = 1.0;
  const Tensor out = corrupt(impulse, {CorruptionFamily::kGaussianBlur, 5, 0});
  EXPECT_NEAR(sum(out), 1.0, 1e-12);
  EXPECT_NEAR(out.at({10, 12, 0}), out.at({12, 10, 0}), 1e-15);
  EXPECT_NEAR(out.at({9, 10, 0}), out.at({11, 10, 0}), 1e-15);
  // Separable gaussian with sigma 1.8: the ratio of neighbouring taps.
  const double ratio = out.at({10, 11, 0}) / out.at({10, 10, 0});
  EXPECT_NEAR(ratio, std::exp(-1.0 / (2 * 1.8 * 1.8)), 1e-12);
}

TEST(Corrupt, BrightnessContrastAroundImageMean) {
  const Tensor img(Shape{1, 4, 1}, std::vector<double>{0.4, 0.45, 0.55, 0.6});
  const Tensor out = corrupt(img, {CorruptionFamily::kBrightnessContrast, 1, 0});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out[i], (img[i] - 0.5) * 1.1 + 0.5 + 0.05, 1e-12);
}

TEST(Corrupt, PixelateAveragesBlocks) {
  Tensor img(Shape{4, 4, 1});
  for (std::size_t i = 0; i < 16; ++i) img[i] = i / 16.0;
  const Tensor out = corrupt(img, {CorruptionFamily::kPixelate, 3, 0});  // factor 2
  for (std::size_t by = 0; by < 2; ++by)
    for (std::size_t bx = 0; bx < 2; ++bx) {
      double m = 0;
      for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 2; ++x) m += img.at({2 * by + y, 2 * bx + x, 0}) / 4;
      for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 2; ++x) EXPECT_NEAR(out.at({2 * by + y, 2 * bx + x, 0}), m, 1e-12);
    }
}

TEST(CorruptDataset, PerImageSeedsAreIndependentOfOrder) {
  const Dataset ds = synth_corpus(1, 6);
  const CorruptionSpec spec{CorruptionFamily::kGaussianNoise, 3, 17};
  const Dataset out = corrupt_dataset(ds, spec);
  for (std::size_t i = 0; i < 6; ++i) {
    CorruptionSpec local = spec;
    local.seed = hash_combine(17, i);
    EXPECT_EQ(out.image(i), corrupt(ds.image(i), local));
  }
  EXPECT_EQ(out.labels, ds.labels);
  EXPECT_EQ(corrupt_dataset(ds, {CorruptionFamily::kPixelate, 0, 1}).images, ds.images);
  EXPECT_XCNET_ERROR(corrupt_dataset(ds, {CorruptionFamily::kPixelate, 9, 1}), kSeverityOutOfRange);
}

TEST(RandomConv, ZeroProbabilityIsIdentity) {
  const Tensor img = random_image(4);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(random_conv_augment(img, rng, 0.0, 0.5), img);
}

TEST(RandomConv, UnitKernelFullMixIsMinMaxRescale) {
  const Tensor img = random_image(5) * 0.5 + 0.2;
  const Tensor out = random_conv_apply(img, Tensor(Shape{1, 1, 1, 1}, 1.0), 1.0);
  const double lo = min_value(img), hi = max_value(img);
  for (std::size_t i = 0; i < img.numel(); ++i) EXPECT_NEAR(out[i], (img[i] - lo) / (hi - lo), 1e-12);
}

TEST(RandomConv, MatchesZeroPaddedCorrelation) {
  Rng rng(6);
  const Tensor img = random_image(6, 6);
  const Tensor k = rand_fill(rng, Shape{3, 3, 1, 1}, Normal{});
  const Tensor out = random_conv_apply(img, k, 0.3);
  const oracle::Image im{6, 6, 1, img.values()};
  const std::vector<double> conv = oracle::xcorr(im, k.values(), 3, 1, 1, 1);
  std::vector<double> blend(36);
  for (std::size_t i = 0; i < 36; ++i) blend[i] = 0.3 * conv[i] + 0.7 * img[i];
  const double lo = *std::min_element(blend.begin(), blend.end());
  const double hi = *std::max_element(blend.begin(), blend.end());
  for (std::size_t i = 0; i < 36; ++i) EXPECT_NEAR(out[i], (blend[i] - lo) / (hi - lo), 1e-12);
}

TEST(RandomConv, SameSeedSameAugmentation) {
  const Tensor img = random_image(7);
  Rng a(9), b(9);
  for (int i = 0; i < 10; ++i) {
    const Tensor x = random_conv_augment(img, a, 0.7, 0.5);
    EXPECT_EQ(x, random_conv_augment(img, b, 0.7, 0.5));
    EXPECT_GE(min_value(x), 0.0);
    EXPECT_LE(max_value(x), 1.0);
  }
}

}  // namespace
}  // namespace xcnet
