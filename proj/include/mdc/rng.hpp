#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace mdc {

// Distributions are hand-rolled on top of the raw mt19937_64 stream so that
// output does not depend on the standard library's (implementation-defined)
// std::*_distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (no cached spare, keeps streams simple).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // modulo bias is irrelevant at our n << 2^64
        return engine_() % n;
    }

private:
    std::mt19937_64 engine_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Independent substream for (seed, stream label, item index). Per-sample
/// substreams make parallel sampling order-independent and reproducible.
inline Rng substream(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0) {
    std::uint64_t h = splitmix64(seed ^ fnv1a(stream));
    h = splitmix64(h ^ (0x632be59bd9b4e019ULL + index));
    return Rng(h);
}

} // namespace mdc
