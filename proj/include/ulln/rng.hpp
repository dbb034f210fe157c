// Copyright 2026 The ulln Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace ulln {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a substream key from a root seed and an ordered list of counters
// (experiment, n, replicate, ...). Distinct counter tuples give statistically
// independent keys; the mapping is a pure function so replicates can be
// generated in any order or on any thread.
inline constexpr std::uint64_t derive_stream_key(
    std::uint64_t seed, std::initializer_list<std::uint64_t> counters) noexcept {
  std::uint64_t state = seed;
  std::uint64_t key = splitmix64(state);
  for (std::uint64_t c : counters) {
    state = key ^ (c * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    key = splitmix64(state);
  }
  return key;
}

// xoshiro256** seeded through splitmix64. Satisfies UniformRandomBitGenerator
// so it plugs into the <random> distributions.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr RngStream(std::uint64_t key = 0) noexcept : key_(key) {
    std::uint64_t sm = key;
    for (auto& w : s_) w = splitmix64(sm);
  }

  // Substream for a tuple of counters under a root seed.
  static constexpr RngStream substream(
      std::uint64_t seed, std::initializer_list<std::uint64_t> counters) noexcept {
    return RngStream(derive_stream_key(seed, counters));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform01() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

  friend constexpr bool operator==(const RngStream&, const RngStream&) = default;

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t key_;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace ulln
