#ifndef MLCD_RNG_HPP
#define MLCD_RNG_HPP

#include <cstdint>

namespace mlcd {

/// Counter-based SplitMix64 generator.
///
/// The whole state is a single 64-bit counter, so snapshots are trivial and
/// independent streams are derived by hashing (seed, stream id). All
/// distributions are implemented here rather than through <random> so that
/// draws are bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    /// Independent stream for a (seed, stream id) pair.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64();

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t uniform_below(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    /// Standard normal via Box-Muller (one value per call, no caching).
    double normal();

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    std::uint64_t state_;
};

}  // namespace mlcd

#endif  // MLCD_RNG_HPP
