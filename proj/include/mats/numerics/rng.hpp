#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace mats {

// SplitMix64 sequence. Every stochastic choice in the library draws from one
// of these, seeded from an explicit 64-bit value, so runs are reproducible.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one draw per call, the second variate is discarded.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and a list of ids
// (agent index, episode index, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = base;
  for (std::uint64_t id : ids) {
    SplitMix64 mix(s ^ (id * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
    s = mix.next_u64();
  }
  return s;
}

}  // namespace mats
