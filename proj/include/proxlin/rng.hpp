#pragma once

// Counter-based RNG: every draw is a pure function of (seed, counter), so
// streams are reproducible across platforms and independent of call order
// elsewhere.  splitmix64 is the mixing function.

#include <cmath>
#include <cstdint>

namespace proxlin {

inline uint64_t splitmix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Distinct-stream mix; used e.g. for component sampling at (seed, epoch, step).
inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c = 0) {
  return splitmix64(splitmix64(splitmix64(a) ^ b) ^ c);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed) {}

  // uniform in [0, 1)
  double uniform() {
    return (next() >> 11) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; draws two uniforms per call
  double gaussian() {
    double u1 = uniform(), u2 = uniform();
    if (u1 <= 0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  uint64_t integer(uint64_t n) { return next() % n; }

 private:
  uint64_t next() { return splitmix64(seed_ + 0x9e3779b97f4a7c15ull * ++ctr_); }
  uint64_t seed_;
  uint64_t ctr_ = 0;
};

}  // namespace proxlin
