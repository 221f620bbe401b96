#pragma once

#include <cstdint>
#include <random>

namespace fedlap {

/// Mixes a sequence of 64-bit words into one seed (splitmix64 finalizer).
/// Used to derive independent, reproducible RNG streams: every consumer of
/// randomness is keyed by (seed, purpose, ids...) so results do not depend
/// on execution order or thread scheduling.
inline std::uint64_t mix_seed(std::uint64_t h) {
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t first, std::uint64_t second, Rest... rest) {
    return mix_seed(mix_seed(first) ^ (second + 0x9e3779b97f4a7c15ULL), rest...);
}

// Stream tags; keep values stable, they are part of the determinism contract.
enum class Stream : std::uint64_t {
    ClientSampling = 1,  // server-side subset draw, keyed (seed, round)
    LocalBatches = 2,    // mini-batch indices, keyed (seed, client, round)
    Init = 3,            // shared parameter initialization
    DataGen = 4,         // synthetic data, keyed (seed, client) / (seed, purpose)
    Weights = 5,         // random a_kl scenario
    Probes = 6,          // analysis probe points
};

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
    return std::mt19937_64(mix_seed(seed, static_cast<std::uint64_t>(stream), a, b));
}

}  // namespace fedlap
