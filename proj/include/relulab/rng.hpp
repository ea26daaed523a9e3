#pragma once

#include <cstdint>
#include <random>

namespace relulab {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based seed derivation: stream k of a base seed never depends on
// how many other streams exist, so sweeps can grow without reshuffling.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(splitmix64(base) ^ (stream * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_a, std::uint64_t stream_b) {
    return derive_seed(derive_seed(base, stream_a), stream_b);
}

inline Rng make_rng(std::uint64_t base, std::uint64_t stream) {
    return Rng(derive_seed(base, stream));
}

} // namespace relulab
