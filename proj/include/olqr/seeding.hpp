// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace olqr {

/// SplitMix64 finalizer; used to derive independent RNG streams from one master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stream tags so that x0, exploration and noise never share a stream.
enum class SeedStream : std::uint64_t {
  Noise = 1,
  InitialState = 2,
  Exploration = 3,
  FreshBatch = 4,
  Bootstrap = 5,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(stream))) + index);
}

}  // namespace olqr
