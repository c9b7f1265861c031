#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace additive {

// Deterministic random stream. All sampling in the project goes through this
// wrapper so that a seed fully determines every draw; distributions are
// implemented inline instead of relying on unspecified std::*_distribution
// algorithms.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Independent stream for a shard; (seed, index) determines it.
    RandomStream derive(std::uint64_t index) const {
        std::uint64_t s = seed_ ^ (0x9e3779b97f4a7c15ULL * (index + 1));
        s ^= s >> 33;
        s *= 0xff51afd7ed558ccdULL;
        s ^= s >> 33;
        return RandomStream(s);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Standard normal via Box-Muller with a cached spare.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Uniform sign in {-1, +1}.
    double sign() { return (engine_() & 1ULL) ? 1.0 : -1.0; }

    // Uniform over {-1, 0, +1} (rejection keeps the three cases equiprobable).
    int ternary_sign() {
        for (;;) {
            const std::uint64_t v = engine_() & 3ULL;
            if (v < 3ULL) return static_cast<int>(v) - 1;
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace additive
