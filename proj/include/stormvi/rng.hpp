#pragma once

#include <cstdint>
#include <random>

namespace stormvi {

// splitmix64 step; used to mix a master seed with stream indices so that
// per-location / per-purpose generators are decorrelated and reproducible.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t idx,
                                 std::uint64_t purpose = 0) {
  std::uint64_t s = splitmix64(seed ^ splitmix64(idx ^ splitmix64(purpose)));
  return std::mt19937_64(s);
}

}  // namespace stormvi
