#pragma once

#include <cstdint>

namespace tamed {

/// SplitMix64 finalizer. A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kMaxStreamGroup = (1ULL << 24) - 1;
inline constexpr std::uint64_t kMaxStreamIndex = (1ULL << 40) - 1;

/// Seed of path `index` in experiment group `group` (one group per Hurst value).
///
/// For a fixed master seed the map (group, index) -> seed is injective on
/// group <= kMaxStreamGroup, index <= kMaxStreamIndex: the packed key is
/// xor-ed with a constant and passed through a bijection.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t group,
                                    std::uint64_t index) noexcept {
    const std::uint64_t key = (group << 40) | (index & kMaxStreamIndex);
    return mix64(mix64(master) ^ key);
}

/// Seed for coordinate `component` of a d-dimensional path.
constexpr std::uint64_t component_seed(std::uint64_t path_seed, std::uint64_t component) noexcept {
    return mix64(path_seed ^ mix64(component + 1));
}

}  // namespace tamed
