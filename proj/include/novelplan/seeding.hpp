#pragma once

#include <cstdint>

namespace novelplan {

// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return seed ^ mix_seed(index);
}

// Separate streams that share a base seed.
enum class Stream : std::uint64_t {
  episode = 1,
  init = 2,
  train = 3,
  plan = 4,
  goal = 5,
  split = 6,
  probe = 7,
  dropout = 8,
  vae_noise = 9,
  corpus = 10,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return derive_seed(seed ^ mix_seed(0x5151000000000000ULL + static_cast<std::uint64_t>(stream)), index);
}

}  // namespace novelplan
