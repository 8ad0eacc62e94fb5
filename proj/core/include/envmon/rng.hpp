#pragma once

#include <cmath>
#include <cstdint>

namespace envmon {

// Deterministic, platform-independent random streams. std::normal_distribution
// is not required to produce the same sequence everywhere, so the simulation
// rolls its own draws from splitmix64.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1).
    double next_unit() {
        return (double)(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Standard normal via Box-Muller.
    double next_gaussian() {
        double u1 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Gaussian with the given sigma, resampled until within +/- bound.
    double next_truncated_gaussian(double sigma, double bound) {
        for (;;) {
            const double v = sigma * next_gaussian();
            if (std::fabs(v) <= bound) return v;
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace envmon
