#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dsmedian {

/// (master_seed, stream_id) fully determines every draw. Replicate r of a
/// simulation uses stream_id = r.
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;
};

/// Counter-based generator: output i is a SplitMix64 finalizer applied to
/// key + (i + 1) * golden_gamma, with the key derived from the SeedSpec.
/// Streams with different ids are independent and need no coordination.
class CounterRng {
public:
    explicit CounterRng(SeedSpec seed);

    std::uint64_t next();

    /// Unbiased integer in [0, range) by rejection; range > 0.
    std::uint64_t bounded(std::uint64_t range);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    /// Standard normal variate (Box-Muller, both outputs used).
    double normal();

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

/// k distinct indices in [0, N), sorted ascending. Every k-subset is equally
/// likely. Throws InvalidInput unless 1 <= k <= N.
std::vector<std::size_t> srswor(std::size_t N, std::size_t k, SeedSpec seed);
std::vector<std::size_t> srswor(std::size_t N, std::size_t k, CounterRng& rng);

/// Nested SRSWOR draw: S_n from the population, then S_m from S_n.
struct TwoPhaseSample {
    std::vector<std::size_t> first_phase;   // size n
    std::vector<std::size_t> second_phase;  // size m, subset of first_phase
};

/// Throws InvalidInput ("require m < n <= N") unless 1 <= m < n <= N.
TwoPhaseSample draw_two_phase(std::size_t N, std::size_t n, std::size_t m, SeedSpec seed);

}  // namespace dsmedian
