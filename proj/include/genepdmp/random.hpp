#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace genepdmp {

/// Seeded Mersenne Twister stream. Streams for (seed, index) pairs are
/// derived through std::seed_seq, so replicate i of a run is reproducible on
/// its own, independent of how many threads produced the other replicates.
class RngStream {
 public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream),
                          static_cast<std::uint32_t>(stream >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform on the open interval (0, 1), 53 bits.
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Exp(1) variate.
    double exponential() { return -std::log(uniform()); }

 private:
    std::mt19937_64 engine_;
};

}  // namespace genepdmp
