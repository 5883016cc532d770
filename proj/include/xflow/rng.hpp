#pragma once

// Portable random streams.
//
// std::mt19937_64 is bit-exact across standard libraries, but the standard
// distributions are not, so every draw used by the library goes through the
// helpers below. Monte Carlo output therefore reproduces on any platform.

#include <cmath>
#include <cstdint>
#include <random>

namespace xflow {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = -bound % bound;  // 2^64 mod bound
        for (;;) {
            const std::uint64_t r = engine_();
            if (r >= limit) return r % bound;
        }
    }

    /// Uniform integer in [lo, hi].
    std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1).
    double open_uniform() {
        for (;;) {
            const double u = uniform();
            if (u > 0.0) return u;
        }
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Derived stream for item `index` of a run seeded with `seed`.
    static Rng stream(std::uint64_t seed, std::uint64_t index) { return Rng(seed + index); }

private:
    // splitmix64 finalizer so that consecutive seeds give unrelated streams
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace xflow
