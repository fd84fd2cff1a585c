#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

// Seeded sampling helpers. std::mt19937_64 output is fixed by the standard,
// but the std distributions are not, so anything that feeds a report or a
// fixture draws through these instead.
namespace geoprofile::rng {

using Engine = std::mt19937_64;

// Uniform integer in [0, n). n must be positive.
inline std::uint64_t index(Engine& e, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = e();
  } while (x >= limit);
  return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double unit(Engine& e) { return static_cast<double>(e() >> 11) * 0x1.0p-53; }

// Standard normal via Box-Muller (one of the pair is discarded).
inline double normal(Engine& e) {
  double u1;
  do {
    u1 = unit(e);
  } while (u1 <= 0.0);
  const double u2 = unit(e);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace geoprofile::rng
