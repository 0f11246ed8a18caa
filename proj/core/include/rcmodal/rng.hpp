#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace rcmodal {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; derives independent stream seeds from (seed, a, b).
[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// The std distributions are implementation-defined; these keep generated
// data identical across standard libraries.

/// Uniform in [0, 1) with 53 random bits.
[[nodiscard]] inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

[[nodiscard]] inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

[[nodiscard]] inline double log_uniform(Rng& rng, double lo, double hi) {
    return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

[[nodiscard]] inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

/// Standard normal via Box-Muller.
[[nodiscard]] inline double normal(Rng& rng) {
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Normal(0, std) resampled until within two standard deviations.
[[nodiscard]] inline double truncated_normal(Rng& rng, double std) {
    for (;;) {
        const double x = normal(rng);
        if (std::abs(x) <= 2.0) return x * std;
    }
}

}  // namespace rcmodal
