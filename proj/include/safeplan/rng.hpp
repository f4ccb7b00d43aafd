#pragma once

#include <cstdint>
#include <random>

namespace safeplan {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30u)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27u)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31u);
}

/// Seed of the independent stream used for sample `index` under a run-level `seed`.
/// Streams depend only on (seed, index), so any split of samples across workers
/// reproduces the same draws.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ull));
}

using Engine = std::mt19937_64;

inline Engine make_stream(std::uint64_t seed, std::uint64_t index) {
  return Engine(stream_seed(seed, index));
}

/// Uniform draw in [0, 1) with 53 random bits; identical on every standard library.
inline double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11u) * 0x1.0p-53;
}

}  // namespace safeplan
