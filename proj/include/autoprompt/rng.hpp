#pragma once

#include <cstdint>
#include <random>

namespace autoprompt {

using Rng = std::mt19937_64;

// Portable draws: the standard distributions are implementation-defined, so
// results would differ between standard libraries.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = Rng::max() - Rng::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream for (seed, step, purpose). Search loops draw all of a
// step's randomness from its own substream, so a resumed run only needs the
// seed and the step index.
inline Rng substream(std::uint64_t seed, std::uint64_t step, std::uint64_t purpose) {
  return Rng(splitmix64(splitmix64(splitmix64(seed) ^ step) ^ purpose));
}

}  // namespace autoprompt
