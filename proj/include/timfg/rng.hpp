// Copyright 2026 The timfg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Counter-based random numbers: every draw is a pure function of
// (seed, sample, agent, step), so Monte Carlo results do not depend on the
// order in which samples are processed.

#ifndef TIMFG_RNG_HPP_
#define TIMFG_RNG_HPP_

#include <cstdint>
#include <span>

namespace timfg {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) : seed_(splitmix64(seed)) {}

  constexpr std::uint64_t bits(std::uint64_t sample, std::uint64_t agent, std::uint64_t step) const {
    std::uint64_t h = splitmix64(seed_ ^ sample);
    h = splitmix64(h ^ agent);
    return splitmix64(h ^ step);
  }

  /// Uniform on [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t sample, std::uint64_t agent, std::uint64_t step) const {
    return static_cast<double>(bits(sample, agent, step) >> 11) * 0x1.0p-53;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Index drawn from a probability vector by inverse CDF.
inline int sample_index(std::span<const double> probs, double u) {
  double c = 0.0;
  int last = 0;
  const int n = static_cast<int>(probs.size());
  for (int i = 0; i < n; ++i) {
    if (probs[i] <= 0.0) continue;
    c += probs[i];
    last = i;
    if (u < c) return i;
  }
  return last;
}

}  // namespace timfg

#endif  // TIMFG_RNG_HPP_
