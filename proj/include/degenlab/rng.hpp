#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace degenlab {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the named sub-stream of a run seed (FNV-1a of the name, mixed).
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

/// Independent generator for block `index` of a stream, so batched work
/// gives the same numbers regardless of how blocks map to threads.
inline std::mt19937_64 block_rng(std::uint64_t stream_seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(stream_seed + splitmix64(index)));
}

}  // namespace degenlab

namespace degenlab {

/// Uniform double in [0, 1) from the top 53 bits; portable across libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace degenlab
