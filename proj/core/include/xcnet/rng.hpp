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
#include <string_view>

#include "xcnet/tensor.hpp"

namespace xcnet {

/// xoshiro256** seeded through splitmix64. The algorithm is fixed so a seed
/// yields the same stream on every platform; nothing here touches OS entropy.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; always consumes two raw draws.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent generator keyed by (this stream's seed, name). Forking does
  /// not advance this generator.
  Rng fork(std::string_view name) const;
  Rng fork(std::uint64_t key) const;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
/// Order-sensitive mix of two 64-bit values (per-image seed derivation).
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

struct Uniform {
  double lo = 0.0;
  double hi = 1.0;
};
struct Normal {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Fills a tensor of `shape` from the stream, one variate per element in
/// row-major order.
Tensor rand_fill(Rng& rng, const Shape& shape, Uniform dist);
Tensor rand_fill(Rng& rng, const Shape& shape, Normal dist);

}  // namespace xcnet
