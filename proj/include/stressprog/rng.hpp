#pragma once

#include <cstdint>
#include <initializer_list>

namespace stressprog {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for the stochastic decision identified by (seed, counters...). Every
// random draw in training is keyed this way so runs replay exactly.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
  std::uint64_t state = splitmix64(seed);
  for (std::uint64_t c : counters) state = splitmix64(state ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return state;
}

}  // namespace stressprog
