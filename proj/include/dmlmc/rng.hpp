// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DMLMC_RNG_HPP
#define DMLMC_RNG_HPP

#include <cmath>
#include <cstdint>

namespace dmlmc {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// Stateless: every draw is addressed by (seed, level, purpose, sample, time,
// coordinate), so replays, worker counts and fine/coarse coupling all see the
// same numbers without any stream bookkeeping.
namespace philox {

struct Block {
    std::uint32_t v[4];
};

inline void round_once(std::uint32_t c[4], std::uint32_t k0, std::uint32_t k1) {
    constexpr std::uint32_t mul_a = 0xD2511F53u;
    constexpr std::uint32_t mul_b = 0xCD9E8D57u;
    const std::uint64_t p0 = static_cast<std::uint64_t>(mul_a) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(mul_b) * c[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t out[4] = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    c[0] = out[0];
    c[1] = out[1];
    c[2] = out[2];
    c[3] = out[3];
}

inline Block generate(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                      std::uint32_t c3, std::uint32_t k0, std::uint32_t k1) {
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    std::uint32_t c[4] = {c0, c1, c2, c3};
    for (int r = 0; r < 10; ++r) {
        round_once(c, k0, k1);
        k0 += w0;
        k1 += w1;
    }
    return Block{{c[0], c[1], c[2], c[3]}};
}

}  // namespace philox

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Draw purposes keep the terminal draw, path noise and the truncation draw on
// disjoint key subspaces.
enum class Draw : std::uint32_t {
    PathNoise = 0,
    Terminal = 1,
    Truncation = 2,
    Direct = 3,  // oracle-side direct samplers
};

// Identifies one independent noise stream: a run seed plus the level the
// sample is generated at.
struct RngKey {
    std::uint64_t seed = 0;
    std::uint32_t level = 0;
};

// Uniform in (0,1), 53-bit resolution, never exactly 0 or 1.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(hi) << 32) | static_cast<std::uint64_t>(lo);
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal addressed by (key, purpose, sample, time, coordinate).
inline double normal_at(const RngKey& key, Draw purpose, std::uint64_t sample,
                        std::uint32_t time, std::uint32_t coord) {
    const std::uint64_t folded = splitmix64(
        key.seed ^ splitmix64((static_cast<std::uint64_t>(key.level) << 8) |
                              static_cast<std::uint64_t>(purpose)));
    const philox::Block b = philox::generate(
        time, coord, static_cast<std::uint32_t>(sample),
        static_cast<std::uint32_t>(sample >> 32),
        static_cast<std::uint32_t>(folded),
        static_cast<std::uint32_t>(folded >> 32));
    const double u1 = to_unit(b.v[0], b.v[1]);
    const double u2 = to_unit(b.v[2], b.v[3]);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace dmlmc

#endif  // DMLMC_RNG_HPP
