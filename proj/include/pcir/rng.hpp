#pragma once

#include <cstdint>

namespace pcir {

// splitmix64: advances *state by the 64-bit golden ratio and scrambles.
// Bit-exact on every platform, which is why the samplers below use it
// instead of std:: distributions (those are implementation-defined).
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// One-shot mix of a single value (state is discarded).
inline std::uint64_t splitmix64(std::uint64_t x) {
    return splitmix64_next(x);
}

struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

    std::uint64_t next() { return splitmix64_next(state); }

    // Uniform double in [0, 1): top 53 bits scaled by 2^-53.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

}  // namespace pcir
