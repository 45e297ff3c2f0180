#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rwmcv {

/// splitmix64 finalizer; mixes a 64-bit value into a well-spread one.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Counter-based seed derivation: streams for (run k, step n, ...) are
/// reproducible functions of the master seed, independent of scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = mix64(base);
  h = mix64(h ^ (a + 0x700fe0d1c3a9f00dull));
  h = mix64(h ^ (b + 0x2545f4914f6cdd1dull));
  h = mix64(h ^ (c + 0x9e3779b97f4a7c15ull));
  return h;
}

/// Seeded random stream. Samplers take one of these explicitly; there is no
/// hidden global state anywhere in the library.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(mix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the spare value is cached so the
  /// stream consumption pattern is fixed per draw sequence.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rwmcv
