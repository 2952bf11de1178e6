#pragma once

#include <cstdint>
#include <random>

namespace contextloc {

/// Engine for an independent stream derived from (seed, stream).
inline std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

/// Stream ids used across the library.
namespace streams {
inline constexpr std::uint64_t world = 0;
inline constexpr std::uint64_t class_rotation = 1;
inline constexpr std::uint64_t model_init = 2;
inline constexpr std::uint64_t batch_order = 3;
inline constexpr std::uint64_t first_video = 1000;
}  // namespace streams

}  // namespace contextloc
