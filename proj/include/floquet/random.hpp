#pragma once

#include <cstdint>
#include <random>

namespace floquet {

/// Seeded 64-bit Mersenne Twister with a platform-independent mapping to
/// doubles (std::uniform_real_distribution is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t next_u64() { return engine_(); }

    /// Independent child stream, derived deterministically from this one.
    Rng split() { return Rng(engine_()); }

private:
    std::mt19937_64 engine_;
};

} // namespace floquet
