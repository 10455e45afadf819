#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace disfl {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `index` under `seed`. Results do not depend on how
/// work is partitioned across workers.
constexpr std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Named sub-streams so every component draws from its own generator.
enum class Stream : std::uint64_t {
  Synthesis = 1,
  Split = 2,
  Init = 3,
  Batching = 4,
  Noise = 5,
};

constexpr std::uint64_t stream_seed(std::uint64_t seed, Stream s) {
  return split_seed(seed, 0xA5A5000000000000ULL + static_cast<std::uint64_t>(s));
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline std::size_t uniform_between(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace disfl
