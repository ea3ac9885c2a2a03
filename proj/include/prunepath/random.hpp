// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace prunepath {

using Rng = std::mt19937_64;

// Named stages of a path's life; each gets an independent random stream.
enum class Stage : std::uint64_t {
    query = 1,
    launch = 2,
    resume = 3,
    rollout = 4,
    judge = 5,
    random_signal = 6,
    features = 7,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

/// Seed for a named substream of a global seed ("backend", "labeler", ...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
    return mix(seed, fnv1a(name));
}

/// Generator for one (query, path, stage, draw) cell. Everything random in
/// the simulator comes from one of these, which makes results independent of
/// call order and thread scheduling.
inline Rng stream(std::uint64_t seed, std::string_view query_id, std::int64_t path_id, Stage stage,
                  std::uint64_t draw = 0) {
    std::uint64_t h = mix(seed, fnv1a(query_id));
    h = mix(h, static_cast<std::uint64_t>(path_id));
    h = mix(h, static_cast<std::uint64_t>(stage));
    h = mix(h, draw);
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

}  // namespace prunepath
