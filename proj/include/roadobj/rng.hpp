#pragma once

#include <cmath>
#include <cstdint>

namespace roadobj {

/// SplitMix64: a small, portable 64-bit generator with one sequential
/// stream. Every consumer documents its draw order next to the code, so a
/// seed pins the whole output byte-for-byte.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    /// Box-Muller transform; consumes exactly two uniform draws per call.
    double normal(double mean = 0.0, double sigma = 1.0) {
        double u1 = uniform01();
        const double u2 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(2.0 * M_PI * u2);
    }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::uint64_t state_;
};

}  // namespace roadobj
