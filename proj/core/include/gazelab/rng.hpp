#pragma once

// Seeded random streams whose output is fixed by the standard (mt19937_64)
// plus hand-rolled distributions; std::*_distribution output is
// implementation-defined and would break byte-identical simulation output.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace gazelab::rng {

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic child seed for a (parent, path...) tuple.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(parent);
    for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(mix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive), rejection-sampled.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(engine_());
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Box-Muller; one variate per call, the pair's second half is cached.
    double normal(double mean = 0.0, double sd = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sd * spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + sd * r * std::cos(theta);
    }

    double exponential(double rate) {
        double u = 0.0;
        while (u <= 0.0) u = uniform();
        return -std::log(u) / rate;
    }

    /// Fisher-Yates with this stream's uniform_int.
    template <class RandomIt>
    void shuffle(RandomIt first, RandomIt last) {
        const auto n = last - first;
        for (auto i = n - 1; i > 0; --i) {
            const auto j = uniform_int(0, i);
            std::swap(first[i], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace gazelab::rng
