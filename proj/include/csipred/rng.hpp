#pragma once

// Seeded RNG with self-contained distribution transforms. std::mt19937_64 is
// specified bit-exactly by the standard; the distribution code here avoids
// the implementation-defined std::*_distribution classes so that a (seed,
// stream) pair produces identical values on every platform.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace csipred {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(splitmix64(seed)), seed_material_(splitmix64(seed)) {}

  // Independent child stream; used so e.g. every frame owns its own RNG and
  // generation order does not matter.
  Rng derive(uint64_t stream) const {
    return Rng(seed_material_ ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
  }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; draws are consumed in pairs with the spare cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Inverse-CDF Rayleigh with scale gamma.
  double rayleigh(double gamma) {
    double u = uniform();
    if (u >= 1.0) u = std::nextafter(1.0, 0.0);
    return gamma * std::sqrt(-2.0 * std::log1p(-u));
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    const uint64_t limit = n * (UINT64_MAX / n);
    uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
  uint64_t seed_material_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace csipred
