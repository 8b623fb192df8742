#include "bffg/random_stream.hpp"

namespace bffg {

namespace {
// Domain-separation tags; arbitrary odd constants.
constexpr std::uint64_t kRootTag = 0x6a09e667f3bcc909ULL;
constexpr std::uint64_t kReplicateTag = 0xbb67ae8584caa73bULL;
constexpr std::uint64_t kLeftTag = 0x3c6ef372fe94f82bULL;
constexpr std::uint64_t kRightTag = 0xa54ff53a5f1d36f1ULL;
} // namespace

std::uint64_t RandomStream::mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t RandomStream::hash2(std::uint64_t a, std::uint64_t b) {
    return mix(mix(a) ^ (b * 0xda942042e4dd58b5ULL));
}

RandomStream::RandomStream(std::uint64_t seed) : key_(hash2(seed, kRootTag)), counter_(0) {}

RandomStream RandomStream::for_replicate(std::uint64_t seed, std::uint64_t replicate_index) {
    RandomStream root(seed);
    return RandomStream(hash2(root.key_ ^ kReplicateTag, replicate_index), 0);
}

double RandomStream::next_uniform() {
    const std::uint64_t h = hash2(key_, counter_++);
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

std::pair<RandomStream, RandomStream> RandomStream::split() {
    const std::uint64_t c = counter_++;
    RandomStream left(hash2(key_ ^ kLeftTag, c), 0);
    RandomStream right(hash2(key_ ^ kRightTag, c), 0);
    return {left, right};
}

} // namespace bffg
