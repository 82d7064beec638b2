#pragma once

// =============================================================================
// Deterministic RNG primitives
// =============================================================================
// All randomness in the pipeline flows through SplitMix64 so that every
// record, candidate, and training run is reproducible from a single 64-bit
// seed. Derived streams (per record, per candidate) come from mix_seed so
// that worker count and batching never change results.
// =============================================================================

#include <cstdint>
#include <cmath>
#include <numbers>

namespace rfgen {

/// SplitMix64 finalizer: one full avalanche round.
inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream seed for (base seed, index).
/// Used for per-record dataset seeds and per-candidate sampler streams.
inline constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    std::uint64_t s = index;
    return seed ^ splitmix64(s);
}

/// Minimal deterministic generator: uniforms via SplitMix64, normals via
/// Box-Muller with a cached spare.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept { return splitmix64(state_); }

    /// Uniform in [0, 1).
    double uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * uniform();
    }

    /// Integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) noexcept {
        return next_u64() % n;
    }

    /// Standard normal.
    double normal() noexcept {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0,1] so the log is finite.
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace rfgen
