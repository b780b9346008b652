#pragma once

#include <cstdint>
#include <random>

namespace shapetest {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream for (seed, stream index); stable across thread schedules.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t domain = 0) {
  const std::uint64_t s = splitmix64(splitmix64(seed ^ splitmix64(domain)) + stream);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(domain)};
  return std::mt19937_64(seq);
}

// Uniform integer in [0, n) by rejection; does not depend on the standard library's distribution code.
inline std::size_t uniform_index(std::mt19937_64& g, std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t r;
  do r = g(); while (r >= limit);
  return static_cast<std::size_t>(r % range);
}

inline double uniform01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

}  // namespace shapetest
