#pragma once

#include <cstdint>
#include <random>

namespace pcdtest {

using Rng = std::mt19937_64;

/// Stage tags for seed derivation. Every random stream in the library is
/// derive_seed(top_level_seed, tag, index); nothing reads ambient entropy.
enum class StreamTag : std::uint64_t {
    Data = 1,
    Bootstrap = 2,
    Directions = 3,
    Shuffle = 4,
    Learn = 5,
    Test = 6,
    Replication = 7,
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

constexpr std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t index) noexcept {
    std::uint64_t h = detail::splitmix64(seed);
    h = detail::splitmix64(h ^ static_cast<std::uint64_t>(tag));
    return detail::splitmix64(h ^ index);
}

inline Rng make_rng(std::uint64_t seed, StreamTag tag, std::uint64_t index) {
    return Rng(derive_seed(seed, tag, index));
}

}  // namespace pcdtest
