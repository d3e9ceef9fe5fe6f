// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace condot {

/// splitmix64 step: advances `state` by the golden-ratio increment and
/// returns the finalized output.
std::uint64_t splitmix64_next(std::uint64_t& state);

/// The splitmix64 finalizer applied to a single word.
std::uint64_t mix64(std::uint64_t x);

/// 64-bit FNV-1a of a byte string. Used to key per-question streams.
std::uint64_t fnv1a64(std::string_view bytes);

/// Seed for an independent stream identified by (seed, a, b).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// xoshiro256** seeded by four splitmix64 draws.
///
/// Every distribution used in the project is derived from `next()` with
/// fixed arithmetic so streams are identical across platforms and
/// standard-library implementations.
class Xoshiro256 {
 public:
  using State = std::array<std::uint64_t, 4>;

  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer on [0, n); n must be positive. Rejection sampling, no
  /// modulo bias.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (cosine branch only; no cached pair).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  const State& state() const { return s_; }
  void set_state(const State& s) { s_ = s; }

 private:
  State s_{};
};

}  // namespace condot
