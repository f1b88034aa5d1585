#pragma once

#include <cstdint>
#include <random>

namespace uwz {

// splitmix64: platform-stable integer mixer, used both for seeding the
// engines below and for the cross-endpoint shared-randomness streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL));
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_keys(mix_keys(a, b), c);
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return mix_keys(mix_keys(a, b, c), d);
}

// Uniform in [0,1) from a 64-bit word, 53-bit mantissa.
inline double u01_from_bits(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Domain tags keep unrelated streams (source sampling, covering, hash
// projections, construction chunks) disjoint under one master seed.
namespace seed_tag {
inline constexpr std::uint64_t source = 0x736f757263650001ULL;
inline constexpr std::uint64_t encoder = 0x656e636f64650001ULL;
inline constexpr std::uint64_t shared = 0x7368617265640001ULL;
inline constexpr std::uint64_t hash_proj = 0x68617368700001ULL;
inline constexpr std::uint64_t construct = 0x636f6e7374720001ULL;
inline constexpr std::uint64_t trial = 0x747269616c0001ULL;
} // namespace seed_tag

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::mt19937_64& engine() { return engine_; }

    double normal(double mean = 0.0, double stddev = 1.0) {
        std::normal_distribution<double> d(mean, stddev);
        return d(engine_);
    }

    double uniform01() {
        return u01_from_bits(engine_());
    }

    std::uint64_t bits() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace uwz
