#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace regram {

// splitmix64 — used to derive independent stream seeds from one master seed.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic random source.  The engine (mt19937_64) has a standardized
// output sequence; every mapping from raw 64-bit draws to doubles, bounded
// integers, shuffles and variates is spelled out here instead of delegating
// to std distributions, whose algorithms vary between standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Standard normal via Box-Muller (one value per pair of uniforms; the
  // second is discarded to keep the draw count per call fixed).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  // Knuth's product method; fine for the small means used here.
  int poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("Rng::poisson: mean must be >= 0");
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  // Fisher-Yates, descending, using below() — portable across platforms.
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = size_t(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Child stream with a seed derived from this stream's seed and a tag.
  static Rng stream(uint64_t master_seed, uint64_t tag) {
    return Rng(splitmix64(master_seed ^ splitmix64(tag)));
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace regram
