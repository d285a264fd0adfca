#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace hlstm {

/// Seeded random source. Distributions are computed here from raw 64-bit
/// draws instead of the <random> distribution classes, whose output differs
/// between standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n);
    /// Standard normal via Box-Muller.
    double normal();

    /// Derives an independent child seed; used to fan one seed out to many consumers.
    std::uint64_t fork_seed() { return engine_() ^ 0x9E3779B97F4A7C15ULL; }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hlstm
