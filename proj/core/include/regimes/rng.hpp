#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace regimes {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent 64-bit seed from a root seed and a path of stream indices,
/// e.g. derive_seed(seed, {rep, b}). Same inputs always give the same seed.
constexpr std::uint64_t derive_seed(std::uint64_t root,
                                    std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(root ^ 0x5ca1ab1e0ddba11ULL);
    for (auto p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Rng(seq);
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    return make_rng(derive_seed(root, path));
}

}  // namespace regimes
