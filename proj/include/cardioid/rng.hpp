#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

// Deterministic draws built directly on the engine: std::normal_distribution,
// std::uniform_int_distribution and std::shuffle are implementation-defined,
// which would break cross-platform reproducibility of seeded runs.
namespace cardioid::rng {

inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double gaussian(std::mt19937_64& g) {
  double u1 = 0.0;
  do {
    u1 = uniform01(g);
  } while (u1 <= 0.0);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::uint64_t below(std::mt19937_64& g, std::uint64_t n) {
  const std::uint64_t lim =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = 0;
  do {
    x = g();
  } while (x >= lim);
  return x % n;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& g) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[below(g, i)]);
}

}  // namespace cardioid::rng
