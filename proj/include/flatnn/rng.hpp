#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace flatnn {

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministically mixes a base seed with up to two salts (epoch, batch, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt0, std::uint64_t salt1 = 0) {
    return splitmix64(splitmix64(base ^ splitmix64(salt0)) ^ splitmix64(salt1 ^ 0xa5a5a5a5a5a5a5a5ULL));
}

/// Seeded generator with hand-rolled distributions. std::mt19937_64 output is
/// fully specified by the standard, and the mappings below avoid the
/// implementation-defined std:: distributions, so every draw is reproducible
/// across platforms and toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal via Box-Muller (two draws per value, no cached state).
    double normal() {
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Unbiased integer in [0, n); n must be positive.
    std::size_t index(std::size_t n) {
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t threshold = (0ULL - bound) % bound;  // 2^64 mod n
        std::uint64_t r = gen_();
        while (r < threshold) r = gen_();
        return static_cast<std::size_t>(r % bound);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace flatnn
