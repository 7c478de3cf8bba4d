#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace sbp {

// Stable 64-bit hashes. Values are part of on-disk formats and must never
// depend on the standard library implementation.

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
    return splitmix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

/// Order-sensitive hash of a token window.
inline std::uint64_t hash_tokens(std::span<const std::uint32_t> tokens,
                                 std::uint64_t seed = kFnvOffset) {
    std::uint64_t h = seed;
    for (std::uint32_t t : tokens) h = hash_combine(h, t);
    return hash_combine(h, tokens.size());
}

}  // namespace sbp
