#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace streamocc {

// Seeded counter-based generator (splitmix64). The standard <random>
// distributions are implementation-defined, so every stochastic piece of the
// engine draws from this generator to keep runs byte-reproducible across
// toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (two fresh uniforms per call).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    /// Normal restricted to [lo, hi]; rejection with a clamp fallback.
    double truncated_normal(double mean, double sigma, double lo, double hi) {
        if (sigma <= 0.0) return std::fmin(hi, std::fmax(lo, mean));
        for (int i = 0; i < 64; ++i) {
            const double x = normal(mean, sigma);
            if (x >= lo && x <= hi) return x;
        }
        return std::fmin(hi, std::fmax(lo, mean));
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
}

} // namespace streamocc
