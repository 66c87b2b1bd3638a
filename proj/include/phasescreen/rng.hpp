#pragma once

#include <cstdint>
#include <limits>

namespace phasescreen {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream key from a master seed and up to three counters.
///
/// Keys are nested mixes, key = mix(mix(mix(seed ^ c0) ^ c1) ^ c2), so every
/// (seed, c0, c1, c2) tuple names its own stream regardless of the order in
/// which streams are consumed.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t c0, std::uint64_t c1 = 0,
                                   std::uint64_t c2 = 0) {
    std::uint64_t k = mix64(seed ^ mix64(c0));
    k = mix64(k ^ mix64(c1 + 0x632be59bd9b4e019ULL));
    return mix64(k ^ mix64(c2 + 0x85157af5ULL));
}

/// Counter-based generator: output n of the stream is mix64(key + n * golden).
class CounterStream {
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterStream(std::uint64_t key) : state_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// Per-sample seed for Monte Carlo sample `index` under `master`.
constexpr std::uint64_t sample_seed(std::uint64_t master, std::uint64_t index) {
    return derive_key(master, index, 0x5a3c1e7dULL);
}

}  // namespace phasescreen
