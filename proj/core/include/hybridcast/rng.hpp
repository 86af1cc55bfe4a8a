#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

#include "hybridcast/common.hpp"

namespace hybridcast {

// SplitMix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the random stream for replicate `index` under master `seed`.
/// Replicate streams depend only on (seed, index), never on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Seed of a named pipeline stage under a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) noexcept {
  return derive_seed(seed, fnv1a64(stage));
}

// Random source with platform-independent draws: the engine is fully
// specified by the standard, and all conversions below are done by hand
// instead of through the implementation-defined std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool coin() noexcept { return (engine_() >> 63) != 0; }

  /// Uniform integer on [0, n), n > 0.
  std::size_t index(std::size_t n) noexcept {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  /// Poisson draw by sequential inversion. Intensities of 10 or more are
  /// split into equal parts below 10 and the part draws summed.
  int poisson(double lambda) noexcept {
    if (!(lambda > 0.0)) return 0;
    if (lambda >= 10.0) {
      const int parts = static_cast<int>(std::ceil(lambda / 9.0));
      const double piece = lambda / parts;
      int total = 0;
      for (int i = 0; i < parts; ++i) total += poisson(piece);
      return total;
    }
    const double u = uniform();
    double p = std::exp(-lambda);
    double cdf = p;
    int k = 0;
    while (u >= cdf && k < 200) {
      ++k;
      p *= lambda / k;
      cdf += p;
    }
    return k;
  }

  /// Fisher-Yates shuffle.
  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) noexcept {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hybridcast
