#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

namespace encassist {

/// SplitMix64 generator. Output is identical on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % bound;
  }

  /// Uniform double in [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from a master seed and a counter.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) noexcept {
  SplitMix64 mix(master ^ (counter * 0xD1B54A32D192ED03ULL));
  mix.next();
  return mix.next();
}

/// Seeded Fisher-Yates shuffle.
template <typename RandomIt>
void fisher_yates(RandomIt first, RandomIt last, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const std::uint64_t j = rng.below(i);
    using std::swap;
    swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
  }
}

}  // namespace encassist
