// Deterministic random number generation with a documented stream layout.
//
// Every randomized operation in the library draws from an mt19937_64 engine
// through the helpers below, never through std:: distributions (whose output
// is implementation-defined). This makes runs bit-reproducible across
// platforms and lets tests replay any stream independently:
//
//   uniform01  : one engine draw u64; returns (u64 >> 11) * 2^-53 in [0,1).
//   normal     : exactly two uniform01 draws u1, u2 (in that order);
//                returns sqrt(-2 ln(1-u1)) * cos(2*pi*u2).
//   bounded    : rejection sampling on raw engine draws; each attempt is one
//                draw, retried while it falls in the bias zone.
//
// Independent streams are derived from a base seed with splitmix64 chaining:
// derive_seed(seed, a, b, ...) = sm(sm(sm(seed) ^ a) ^ b) ...
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mmbal {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed) { return splitmix64(seed); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t next, Rest... rest) {
    return derive_seed(splitmix64(seed) ^ next, rest...);
}

// Stream tags for derive_seed. Values are arbitrary but frozen: changing them
// changes every seeded artifact.
namespace stream {
inline constexpr std::uint64_t init = 0x01;
inline constexpr std::uint64_t shuffle = 0x02;
inline constexpr std::uint64_t opm_mask = 0x03;
inline constexpr std::uint64_t noise = 0x04;
inline constexpr std::uint64_t probe = 0x05;
inline constexpr std::uint64_t prototypes = 0x06;
inline constexpr std::uint64_t labels = 0x07;
inline constexpr std::uint64_t sample = 0x08;
inline constexpr std::uint64_t corruption = 0x09;
}  // namespace stream

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // Uniform double in [0,1) with 53 significant bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller. Consumes exactly two uniform01 draws;
    // the second Box-Muller output is discarded to keep the stream position
    // a simple function of the call count.
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Uniform integer in [0, n). Rejection sampling on raw draws.
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    // In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[bounded(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace mmbal
