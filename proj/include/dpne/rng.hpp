// Copyright 2026 The DPNE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Counter-based random streams.
//
// Every random draw in a simulation is addressed by (seed, player, channel,
// iteration) and computed by hashing that key, so a draw never depends on how
// many other draws happened before it. Two runs that share a seed therefore
// see identical trigger and quantizer randomness even if their trajectories
// diverge, and players can be evaluated in any order.

#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace dpne {

enum class Channel : std::uint32_t {
  kTrigger = 1,
  kQuantizer = 2,
  kNoise = 3,
  kInit = 4,
};

namespace detail {

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint32_t player = 0;
  Channel channel = Channel::kTrigger;
};

constexpr std::uint64_t StreamBits(const StreamKey& key, std::uint64_t k) {
  std::uint64_t h = detail::Mix64(key.seed);
  h = detail::Mix64(h ^ (static_cast<std::uint64_t>(key.player) << 32 |
                         static_cast<std::uint64_t>(key.channel)));
  return detail::Mix64(h ^ k);
}

// Uniform draw in [0, 1) with 53 bits of resolution.
constexpr double StreamUniform(const StreamKey& key, std::uint64_t k) {
  return static_cast<double>(StreamBits(key, k) >> 11) * 0x1.0p-53;
}

// Sequential generator for Monte Carlo probes that do not need addressable
// draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double Uniform() { return unit_(engine_); }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace dpne
