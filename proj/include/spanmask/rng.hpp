// Copyright 2026 The spanmask Authors.
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

#ifndef SPANMASK_RNG_HPP
#define SPANMASK_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

// Deterministic, platform-independent randomness. Everything downstream
// (masking, sampling, init, dropout) is keyed off these primitives so that
// identical seeds give bit-identical runs regardless of thread count or
// standard-library implementation. std::uniform_int_distribution and friends
// are implementation-defined and must not be used anywhere in the library.

namespace spanmask::rng {

// splitmix64 finalizer.
inline constexpr std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline constexpr std::uint64_t combine(std::uint64_t a, std::uint64_t b,
                                       std::uint64_t c) {
  return combine(combine(a, b), c);
}

inline constexpr std::uint64_t combine(std::uint64_t a, std::uint64_t b,
                                       std::uint64_t c, std::uint64_t d) {
  return combine(combine(combine(a, b), c), d);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform double in [0, 1) from the top 53 bits.
inline double to_unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// One independent Bernoulli draw addressed by a key tuple. Order-independent:
// the outcome depends only on the key, never on how many draws came before.
inline bool bernoulli_at(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                         std::uint64_t c, double rate) {
  return to_unit(combine(seed, a, b, c)) < rate;
}

// Sequential deterministic stream (splitmix64).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return mix(state_++); }

  double next_unit() { return to_unit(next_u64()); }

  // Unbiased draw in [0, n) by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= bound);
    return v % n;
  }

  // Box-Muller, no cached spare so draws stay addressable one-by-one.
  double next_gaussian() {
    double u1 = next_unit();
    double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace spanmask::rng

#endif  // SPANMASK_RNG_HPP
