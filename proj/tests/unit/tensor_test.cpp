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

#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "xcnet/rng.hpp"

namespace xcnet {
namespace {

TEST(Elementwise, Max0ClipsNegatives) {
  const Tensor y = elementwise(ElemOp::kMax0, Tensor::vector({-1, 0, 2}));
  EXPECT_EQ(y, Tensor::vector({0, 0, 2}));
}

TEST(Elementwise, ExpOfZeroIsOne) { EXPECT_EQ(elementwise(ElemOp::kExp, Tensor::vector({0}))[0], 1.0); }

TEST(Elementwise, PowSquares) { EXPECT_DOUBLE_EQ(elementwise(ElemOp::kPow, Tensor::vector({0.5}), 2.0)[0], 0.25); }

TEST(Elementwise, SignAbsSigmoid) {
  const Tensor x = Tensor::vector({-2, 0, 3});
  EXPECT_EQ(elementwise(ElemOp::kSign, x), Tensor::vector({-1, 0, 1}));
  EXPECT_EQ(elementwise(ElemOp::kAbs, x), Tensor::vector({2, 0, 3}));
  EXPECT_DOUBLE_EQ(elementwise(ElemOp::kSigmoid, x)[1], 0.5);
}

TEST(Elementwise, ScalarAndAxisBroadcast) {
  const Tensor a(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor row(Shape{1, 3}, std::vector<double>{10, 20, 30});
  const Tensor sum = a + row;
  EXPECT_EQ(sum.shape(), (Shape{2, 3}));
  EXPECT_EQ(sum.at({1, 2}), 36.0);
  EXPECT_EQ((a * Tensor::scalar(2.0)).at({0, 1}), 4.0);
}

TEST(Elementwise, IncompatibleShapesThrow) {
  EXPECT_XCNET_ERROR(Tensor(Shape{2, 3}) + Tensor(Shape{3, 2}), kShapeMismatch);
  EXPECT_XCNET_ERROR(Tensor(Shape{2}) + Tensor(Shape{2, 1}), kShapeMismatch);
}

TEST(Elementwise, DivisionByExactZeroThrows) {
  EXPECT_XCNET_ERROR(Tensor::vector({1, 2}) / Tensor::vector({1, 0}), kDivideByZero);
}

TEST(Reduce, MeanAndPopulationVariance) {
  const Tensor a = Tensor::vector({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(mean(a), 2.5);
  EXPECT_DOUBLE_EQ(variance(a), oracle::var({1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(variance(a), 1.25);
}

TEST(Reduce, EmptyAxisThrows) {
  EXPECT_XCNET_ERROR(reduce(ReduceOp::kMean, Tensor(Shape{0})), kEmptyReduction);
  EXPECT_XCNET_ERROR(reduce(ReduceOp::kMean, Tensor(Shape{3, 0}), {1}), kEmptyReduction);
}

TEST(Reduce, AxisOutOfRangeThrows) {
  EXPECT_XCNET_ERROR(reduce(ReduceOp::kSum, Tensor(Shape{2, 2}), {2}), kAxisOutOfRange);
}

TEST(Reduce, AxesRemovedOrKept) {
  Rng rng(3);
  const Tensor a = rand_fill(rng, Shape{2, 3, 4}, Normal{});
  const Tensor s = reduce(ReduceOp::kSum, a, {1});
  EXPECT_EQ(s.shape(), (Shape{2, 4}));
  const Tensor k = reduce(ReduceOp::kMax, a, {0, 2}, true);
  EXPECT_EQ(k.shape(), (Shape{1, 3, 1}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t l = 0; l < 4; ++l) {
      double acc = 0;
      for (std::size_t j = 0; j < 3; ++j) acc += a.at({i, j, l});
      EXPECT_NEAR(s.at({i, l}), acc, 1e-14);
    }
}

TEST(Reduce, MeanLiesBetweenMinAndMax) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = rand_fill(rng, Shape{1 + rng.below(40)}, Normal{rng.uniform(-5, 5), rng.uniform(0, 10)});
    EXPECT_LE(min_value(a), mean(a));
    EXPECT_GE(max_value(a), mean(a));
  }
}

TEST(Reduce, VarianceIdentity) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = rand_fill(rng, Shape{2 + rng.below(60)}, Normal{rng.uniform(-3, 3), rng.uniform(0.1, 4)});
    const double m = mean(a);
    const double identity = mean(a * a) - m * m;
    EXPECT_NEAR(variance(a), identity, 1e-12 * std::max(1.0, std::abs(mean(a * a))));
  }
}

TEST(Shape, ReshapeRoundTripIsBitwise) {
  Rng rng(4);
  const Tensor a = rand_fill(rng, Shape{2, 3, 4}, Normal{});
  EXPECT_EQ(a.reshaped(Shape{6, 4}).reshaped(Shape{2, 3, 4}), a);
  EXPECT_XCNET_ERROR(a.reshaped(Shape{5, 5}), kShapeMismatch);
}

TEST(Shape, DataLengthMatchesExtents) {
  EXPECT_EQ(Tensor(Shape{2, 0, 3}).numel(), 0u);
  EXPECT_EQ(Tensor(Shape{}).numel(), 1u);
  EXPECT_XCNET_ERROR(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), kShapeMismatch);
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(42);
  const Tensor a = rand_fill(rng, Shape{5, 7}, Normal{});
  const Tensor b = rand_fill(rng, Shape{7, 3}, Normal{});
  const Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = 0;
      for (std::size_t k = 0; k < 7; ++k) acc += a.at({i, k}) * b.at({k, j});
      EXPECT_NEAR(c.at({i, j}), acc, 1e-12);
    }
  const Tensor ct = matmul(b, a, true, true);  // (a b)^T
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(ct.at({j, i}), c.at({i, j}), 1e-12);
  EXPECT_XCNET_ERROR(matmul(a, a), kShapeMismatch);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(7), b(7);
  EXPECT_EQ(rand_fill(a, Shape{2}, Uniform{}), rand_fill(b, Shape{2}, Uniform{}));
  EXPECT_EQ(rand_fill(a, Shape{2}, Uniform{}), rand_fill(b, Shape{2}, Uniform{}));
}

TEST(Rng, DifferentSeedsDiffer) {
  Rng a(7), b(8);
  EXPECT_FALSE(rand_fill(a, Shape{8}, Uniform{}) == rand_fill(b, Shape{8}, Uniform{}));
}

TEST(Rng, ZeroStddevGivesZeros) {
  Rng a(1);
  const Tensor z = rand_fill(a, Shape{10}, Normal{0.0, 0.0});
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Rng, ConsumesOneVariatePerElement) {
  Rng a(9), b(9);
  (void)rand_fill(a, Shape{3}, Uniform{});
  for (int i = 0; i < 3; ++i) (void)b.uniform();
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(2024);
  const Tensor u = rand_fill(rng, Shape{200000}, Uniform{});
  EXPECT_NEAR(mean(u), 0.5, 0.005);
  EXPECT_NEAR(variance(u), 1.0 / 12.0, 0.002);
  const Tensor n = rand_fill(rng, Shape{200000}, Normal{1.0, 2.0});
  EXPECT_NEAR(mean(n), 1.0, 0.02);
  EXPECT_NEAR(std::sqrt(variance(n)), 2.0, 0.02);
}

TEST(Rng, BelowStaysInRange) {
  Rng rng(5);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[rng.below(7)];
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Rng, ForksAreIndependentAndStable) {
  const Rng root(99);
  Rng a = root.fork("init"), b = root.fork("init"), c = root.fork("data-order");
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(a.next_u64(), c.next_u64());
}

TEST(Hash, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace xcnet
