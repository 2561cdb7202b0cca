#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tvgnn/common.hpp"

namespace tvgnn {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Seed derivation for the (master, split, init) hierarchy. Split seeds
// depend only on (master, a) so paired experiments with the same master
// seed see identical splits.
inline uint64_t derive_seed(uint64_t master, uint64_t a) {
  return splitmix64(splitmix64(master) ^ splitmix64(a + 0x51ED270B7A94ull));
}

inline uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b) {
  return splitmix64(derive_seed(master, a) ^ splitmix64(b + 0xC2B2AE3D27D4EB4Full));
}

// Deterministic RNG. All conversions from raw 64-bit output are spelled out
// here rather than going through std distributions, so streams are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer on [0, n), rejection sampled
  uint64_t below(uint64_t n) {
    require(n > 0, "Rng::below: empty range");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace tvgnn
