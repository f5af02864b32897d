#pragma once

#include <cstdint>
#include <random>

namespace nbsel {

// splitmix64 step; good enough to decorrelate counter-derived seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream derivation: run (or shard) `index` of an experiment
// seeded with `master_seed` always gets the same generator, no matter how
// the runs are scheduled across threads.
inline std::mt19937_64 derive_stream(std::uint64_t master_seed, std::uint64_t index) {
  const std::uint64_t s = splitmix64(splitmix64(master_seed) ^ splitmix64(index + 1));
  return std::mt19937_64(s);
}

// Uniform in [0, 1) from the top 53 bits of a 64-bit draw.
template <class Rng>
double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace nbsel
