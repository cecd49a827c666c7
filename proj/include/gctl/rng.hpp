#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace gctl {

// Counter-based normal variates: every (seed, path, step, slot) tuple maps to
// a fixed value, so results do not depend on evaluation order or threads.

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                                  std::uint64_t slot) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ path);
  h = splitmix64(h ^ step);
  return splitmix64(h ^ slot);
}

/// Uniform on the open interval (0, 1).
inline double to_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Fills out with independent standard normals for one (path, step).
inline void counter_normals(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                            std::span<double> out) {
  for (std::size_t k = 0; k < out.size(); k += 2) {
    const double u1 = to_unit(counter_hash(seed, path, step, k));
    const double u2 = to_unit(counter_hash(seed, path, step, k + 1));
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    out[k] = r * std::cos(a);
    if (k + 1 < out.size()) out[k + 1] = r * std::sin(a);
  }
}

}  // namespace gctl
