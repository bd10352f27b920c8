// Copyright 2026 the atc authors
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

// Seeded, counter-based random number generation. The generator is pinned so
// reports are reproducible across runs and reimplementations:
//
//   raw(i)     = splitmix64_fin(seed + (i+1) * 0x9E3779B97F4A7C15)
//   uniform(i) = ((raw(i) >> 11) + 0.5) * 2^-53          in (0, 1)
//   gaussian pair j (counters 2j, 2j+1), Box-Muller:
//     r = sqrt(-2 ln u0), z0 = r cos(2 pi u1), z1 = r sin(2 pi u1)
//
// splitmix64_fin is the standard splitmix64 output function, so raw(0..k)
// equals the stateful splitmix64 sequence for the same seed, while staying
// random-access (any counter can be evaluated independently).

#ifndef ATC_RANDOM_HPP
#define ATC_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <span>

namespace atc {

inline uint64_t splitmix64_fin(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed; used for per-worker/per-layer substreams.
inline uint64_t derive_seed(uint64_t seed, uint64_t salt) {
  return splitmix64_fin(seed ^ (0x9E3779B97F4A7C15ULL + salt * 0xD1B54A32D192ED03ULL));
}

class CounterRng {
 public:
  explicit CounterRng(uint64_t seed) : seed_(seed) {}

  uint64_t raw(uint64_t counter) const {
    return splitmix64_fin(seed_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  }

  double uniform(uint64_t counter) const {
    return (static_cast<double>(raw(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
};

// Sequential view over the counter-based generator producing N(0,1) draws.
class GaussianStream {
 public:
  explicit GaussianStream(uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u0 = rng_.uniform(counter_++);
    double u1 = rng_.uniform(counter_++);
    double r = std::sqrt(-2.0 * std::log(u0));
    double theta = 2.0 * 3.14159265358979323846 * u1;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  void fill(std::span<double> out) {
    for (double& v : out) v = next();
  }

 private:
  CounterRng rng_;
  uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace atc

#endif  // ATC_RANDOM_HPP
