#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace eegattr {

/// SplitMix64 finalizer. Used as a stateless hash so that every random draw
/// is a pure function of (seed, indices).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Fold a list of counters into a seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) noexcept {
    std::uint64_t h = mix64(seed);
    for (auto c : counters) h = mix64(h ^ mix64(c + 0x632BE59BD9B4E019ULL));
    return h;
}

/// Counter-based stream: draw k is mix64(key + k).
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    constexpr std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Multiply-shift; bias is below 2^-32 for the n used here.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t x = next_u64();
        const std::uint64_t x_lo = x & 0xFFFFFFFFULL, x_hi = x >> 32;
        const std::uint64_t n_lo = n & 0xFFFFFFFFULL, n_hi = n >> 32;
        const std::uint64_t lo_lo = x_lo * n_lo;
        const std::uint64_t hi_lo = x_hi * n_lo;
        const std::uint64_t lo_hi = x_lo * n_hi;
        const std::uint64_t mid = (lo_lo >> 32) + (hi_lo & 0xFFFFFFFFULL) + lo_hi;
        return x_hi * n_hi + (hi_lo >> 32) + (mid >> 32);
    }

    /// Standard normal via Box-Muller (one value per two uniforms).
    double normal() noexcept {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace eegattr
