#pragma once

#include <cstdint>
#include <initializer_list>

namespace semap {

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic child seed for a (stream, indices...) path under a master
/// seed, so every random draw in a run is replayable from one number.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (auto p : path) s = mix64(s ^ mix64(p));
  return s;
}

// Stream tags.
enum SeedStream : std::uint64_t {
  kStreamInit = 1,
  kStreamPredict = 2,
  kStreamResample = 3,
  kStreamSynth = 4,
  kStreamEval = 5,
};

}  // namespace semap
