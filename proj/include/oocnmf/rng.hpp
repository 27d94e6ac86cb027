#pragma once

#include <cstdint>

namespace oocnmf {

/// Counter-based PRNG: SplitMix64 finalizer applied to (key, index). Any
/// entry of a generated array is a pure function of (seed, stream, index),
/// so a worker can reproduce an arbitrary slab of a matrix draw without
/// generating the rest.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL))) {}

    /// 64 uniform bits at the given counter index.
    std::uint64_t bits(std::uint64_t index) const {
        return mix(key_ + (index + 1) * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform double in [0, 1).
    double uniform(std::uint64_t index) const {
        return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(std::uint64_t index, double lo, double hi) const {
        return lo + (hi - lo) * uniform(index);
    }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
};

/// Deterministic seed derivation for sub-tasks (per-k, per-perturbation, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return CounterRng::mix(seed ^ CounterRng::mix(a ^ CounterRng::mix(b)));
}

} // namespace oocnmf
