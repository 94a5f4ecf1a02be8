#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fpdn {

// Draw helpers on top of std::mt19937_64. The engine itself is specified
// bit-exactly by the standard; the std::*_distribution adapters are not, so
// every draw in the project goes through these to keep seeded runs
// reproducible across standard libraries.

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive bounds
    const auto span = static_cast<uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(rng() % span);
}

inline double normal(std::mt19937_64& rng) {
    // Box-Muller; one value per call keeps the draw sequence easy to reason about.
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline bool bernoulli(std::mt19937_64& rng, double p) { return uniform01(rng) < p; }

// splitmix64 finalizer; derives independent sub-seeds from (seed, salt).
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace fpdn
