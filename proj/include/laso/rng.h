// Copyright 2026 The Laso Authors
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

#include <cstdint>
#include <random>

namespace laso {

// Mixes two 64-bit values into a well-spread seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Deterministic random stream. All distributions are implemented by hand on
// top of mt19937_64 so that sequences are reproducible bit-for-bit; the
// standard <random> distributions are not pinned across library versions.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();

  // Uniform in [lo, hi], inclusive. Throws ConfigError if lo > hi.
  int uniform_int(int lo, int hi);

  // Standard normal via Box-Muller. Pairs are cached, so draws come two
  // uniforms at a time.
  double normal();

  // Child stream whose sequence depends only on this stream's seed and the
  // given id, not on how much of this stream has been consumed.
  RngStream fork(std::uint64_t stream_id) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace laso
