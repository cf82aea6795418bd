#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace netsample {

using Engine = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and a path of stream indices.
/// Distinct paths give statistically independent streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(seed);
    for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

inline Engine make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return Engine{derive_seed(seed, path)};
}

// Named top-level streams hanging off the master seed.
namespace stream {
inline constexpr std::uint64_t kTrace = 1;
inline constexpr std::uint64_t kSampling = 2;
inline constexpr std::uint64_t kSolver = 3;
inline constexpr std::uint64_t kModel = 4;
}  // namespace stream

}  // namespace netsample
