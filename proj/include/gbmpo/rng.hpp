#ifndef GBMPO_RNG_HPP
#define GBMPO_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace gbmpo {

using Rng = std::mt19937_64;

/// Deterministic child seed from a root seed and a path of indices, e.g.
/// (seed, iteration, member). Distinct paths give independent streams.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * (path.size() + 1));
    auto push = [&](std::uint64_t x) {
        words.push_back(static_cast<std::uint32_t>(x));
        words.push_back(static_cast<std::uint32_t>(x >> 32));
    };
    push(root);
    for (auto p : path) push(p);
    std::seed_seq seq(words.begin(), words.end());
    std::uint32_t halves[2];
    seq.generate(halves, halves + 2);
    return (static_cast<std::uint64_t>(halves[1]) << 32) | halves[0];
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> path = {}) {
    return Rng(derive_seed(root, path));
}

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace gbmpo

#endif  // GBMPO_RNG_HPP
