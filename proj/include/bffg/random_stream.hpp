#pragma once

#include <cstdint>
#include <utility>

namespace bffg {

// Deterministic splittable random stream: a keyed counter hashed through the
// SplitMix64 finalizer. Same seed and same operation sequence give identical
// outputs; split() derives two children that are statistically independent of
// each other and of the parent's subsequent draws (each lives in its own key
// subspace). One stream is owned by one consumer at a time; split() is the only
// way to fan out.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed);

    // Independent stream for one replicate of an embarrassingly parallel run.
    static RandomStream for_replicate(std::uint64_t seed, std::uint64_t replicate_index);

    // Uniform draw in (0,1) with 53-bit resolution (never exactly 0 or 1, so
    // inverse-CDF transforms stay finite).
    double next_uniform();

    // Two child streams; consumes one counter slot of the parent.
    std::pair<RandomStream, RandomStream> split();

    static constexpr const char* algorithm_id = "splitmix64-path-v1";

private:
    RandomStream(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

    static std::uint64_t mix(std::uint64_t z);
    static std::uint64_t hash2(std::uint64_t a, std::uint64_t b);

    std::uint64_t key_;
    std::uint64_t counter_;
};

} // namespace bffg
