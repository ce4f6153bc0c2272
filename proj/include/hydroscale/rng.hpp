#pragma once

#include <array>
#include <cstdint>

namespace hydroscale {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Pure function of (counter, key); no state.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Stream identity for one replica: the base seed keys the block cipher and
/// the replica index occupies the upper half of the counter.
struct RngKey {
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;

    friend bool operator==(const RngKey&, const RngKey&) = default;
};

/// Injective, integer-only map (base, replica) -> key. Stable across versions.
constexpr RngKey replica_seed(std::uint64_t base, std::uint64_t replica) { return {base, replica}; }

/// Two independent standard normals for draw slot (step, pair) of a stream.
/// Slot `pair` covers noise modes 2*pair and 2*pair+1.
std::array<double, 2> normal_pair(const RngKey& key, std::uint64_t step, std::uint32_t pair);

/// Uniform in (0, 1) built from 52 random bits.
double to_unit_open(std::uint32_t hi, std::uint32_t lo);

}  // namespace hydroscale
