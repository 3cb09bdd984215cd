#pragma once
#include <cmath>
#include <cstdint>
#include <random>

namespace scorelab {

// splitmix64 step; used both as a seed scrambler and to derive independent
// child seeds (chain i of a run, record j of a sweep, ...) from one master
// seed without coupling the streams.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t index) {
  uint64_t s = master ^ (0x6a09e667f3bcc909ull + index * 0x9e3779b97f4a7c15ull);
  splitmix64(s);
  return splitmix64(s);
}

// Deterministic RNG: all draws go through explicit methods so a fixed seed
// reproduces byte-identical output for a fixed binary.  Gaussian uses
// Box-Muller with a one-value cache (cache is object-local, so streams from
// distinct Rng objects never interleave).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(splitmix_scramble(seed)) {}

  double uniform01() {  // [0,1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // integer in [0, n)
  uint64_t below(uint64_t n) {
    // modulo bias is < 2^-40 for every n used here (n < 2^24); acceptable.
    return engine_() % n;
  }

  double gaussian() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double c = std::cos(6.283185307179586477 * u2);
    double s = std::sin(6.283185307179586477 * u2);
    cache_ = r * s;
    has_cache_ = true;
    return r * c;
  }

  void gaussian_fill(double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = gaussian();
  }

  int sign() { return (engine_() & 1ull) ? -1 : 1; }  // uniform on {+1,-1}

  uint64_t raw() { return engine_(); }

 private:
  static uint64_t splitmix_scramble(uint64_t seed) {
    splitmix64(seed);
    return splitmix64(seed);
  }
  std::mt19937_64 engine_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

}  // namespace scorelab
