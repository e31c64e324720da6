#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace graphon {

/// Counter-based PRNG built on the SplitMix64 finalizer.
///
/// The value of counter c under seed s is mix64(s + (c+1) * 0x9E3779B97F4A7C15),
/// where mix64 is the SplitMix64 output function (Steele, Lea & Flood 2014).
/// Every draw is a pure function of (seed, counter), so streams are
/// reproducible across platforms and languages, random access is O(1), and
/// separate counter ranges never overlap.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t word(std::uint64_t counter) const {
    return mix64(seed_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform double in [0, 1) using the top 53 bits of the counter word.
  double uniform01(std::uint64_t counter) const {
    return static_cast<double>(word(counter) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on counters (2c, 2c+1).
  /// Draws with distinct c are independent.
  double gaussian(std::uint64_t counter) const {
    const double u1 = uniform01(2 * counter);
    const double u2 = uniform01(2 * counter + 1);
    // Guard u1 = 0; the offset keeps the log argument in (0, 1].
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Order-sensitive 64-bit combine for deriving sub-seeds, e.g.
/// mix_seed(mix_seed(base, hash_str("holder")), n).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return CounterRng::mix64(a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2)));
}

/// FNV-1a for tagging streams with short labels.
inline std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace graphon
