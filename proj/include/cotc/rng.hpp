#pragma once

#include <cstdint>
#include <string_view>

namespace cotc {

/**
 * SplitMix64 (Steele, Lea & Flood 2014).
 *
 * 64-bit state, pure integer arithmetic, identical output on every platform.
 * This is the generator behind every seeded draw that has to be reproducible
 * bit-for-bit (random pruning, sweep item seeds, synthetic model sampling).
 */
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Unbiased draw in [0, n), n >= 1. Rejection sampling keeps the result
    // independent of how the compiler implements 128-bit ops.
    std::uint64_t bounded(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % n;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

private:
    std::uint64_t state_;
};

// FNV-1a, 64 bit. Used for config hashes, input digests and per-item seed
// derivation; not cryptographic and not meant to be.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace cotc
