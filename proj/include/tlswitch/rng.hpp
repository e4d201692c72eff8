#pragma once

#include <cstdint>

namespace tlswitch {

// splitmix64 generator. All randomness in the library goes through this so
// that seeded runs are bit-reproducible regardless of the standard library's
// distribution internals.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // uniform in {0, ..., n-1}
    int next_index(int n) {
        int i = static_cast<int>(next_double() * n);
        return i < n ? i : n - 1;
    }
};

// Derives an independent stream seed from a master seed and a stream index.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    SplitMix64 g(master ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
    return g.next();
}

} // namespace tlswitch
