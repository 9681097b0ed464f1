#pragma once

// Reproducible random streams.
//
// The generator is SplitMix64 (Steele, Lea & Flood): a 64-bit counter that
// advances by 0x9E3779B97F4A7C15 per draw, followed by a fixed avalanche mix.
// Every derived quantity is specified here rather than delegated to
// <random> distributions, whose algorithms are implementation-defined:
//
//   uniform01  = (next() >> 11) * 2^-53                     in [0, 1)
//   normal     = Box-Muller cosine branch,
//                sqrt(-2 ln(1 - u1)) * cos(2 pi u2)          one normal per two draws
//
// Any implementation following these three rules reproduces the same
// sequences bit-for-bit on IEEE-754 hardware with a correctly rounded libm.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gem {

class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    constexpr result_type operator()() noexcept { return next(); }

    constexpr std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    constexpr double uniform01() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double normal() noexcept {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

private:
    std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and a tag (component
// count, restart index, ...). One SplitMix64 round of the combined value.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) noexcept {
    SplitMix64 g(base ^ (tag * 0xD1B54A32D192ED03ULL));
    return g.next();
}

}  // namespace gem
