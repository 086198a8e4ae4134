#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "cm3/error.hpp"

namespace cm3 {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Independent child seed for a labelled sub-stream of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t label_a, std::uint64_t label_b = 0) {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s);
    s = h ^ label_a;
    h = splitmix64(s);
    s = h ^ label_b;
    return splitmix64(s);
}

// Uniform integer in [0, n), unbiased.
inline std::uint64_t bounded(Rng& rng, std::uint64_t n) {
    if (n == 0)
        throw ConfigError("bounded: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Index drawn proportionally to non-negative weights. The caller guarantees a
// positive total; a floating point tail that leaves the cursor past the last
// bucket falls back to the last positive weight.
inline std::size_t sample_weights(std::span<const double> weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights)
        total += w;
    if (!(total > 0.0))
        throw DataError("sample_weights: total weight must be positive");
    const double r = uniform01(rng) * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        cum += weights[i];
        if (r < cum)
            return i;
    }
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0)
            return i;
    return weights.size() - 1;
}

} // namespace cm3
