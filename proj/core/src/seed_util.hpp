#pragma once

#include <cstdint>

namespace pmp::detail {

// splitmix64 over the combined words; keeps derived substreams decorrelated
// even for adjacent base seeds and phases.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t phase) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (phase + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace pmp::detail
