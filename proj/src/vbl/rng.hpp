/*
 * Copyright 2026 The vbilstm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Counter-based randomness. Every random draw in a forward pass is a pure
// function of (seed, sequence id, timestep, stream), so a sequence sees the
// same noise regardless of which batch or batch row it lands in.

#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace vbl {

/// SplitMix64 as a standard UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Order-sensitive mix of several words into one seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  SplitMix64 g(a ^ (b * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
  return g();
}

template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return mix_seed(mix_seed(a, b), static_cast<std::uint64_t>(rest)...);
}

/// Distinct noise streams drawn per (sequence, timestep).
enum class NoiseStream : std::uint64_t {
  kLatent = 1,       // epsilon for z_t
  kBackwardProxy = 2,  // epsilon for the sampled backward-state proxy
  kGateMask = 3,     // Bernoulli stochastic-backprop mask
  kEmission = 4,     // sampling emitted tokens/frames during generation
};

/// Draws `n` standard normals for one (seed, sequence, step, stream) cell.
inline std::vector<double> normal_noise(std::uint64_t seed, std::uint64_t sequence,
                                        std::uint64_t step, NoiseStream stream,
                                        std::size_t n) {
  SplitMix64 g(mix_seed(seed, sequence, step, static_cast<std::uint64_t>(stream)));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (double& v : out) v = normal(g);
  return out;
}

/// One Bernoulli(p) draw for one (seed, sequence, step, stream) cell.
inline bool bernoulli_draw(std::uint64_t seed, std::uint64_t sequence, std::uint64_t step,
                           NoiseStream stream, double p) {
  SplitMix64 g(mix_seed(seed, sequence, step, static_cast<std::uint64_t>(stream)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(g) < p;
}

}  // namespace vbl
