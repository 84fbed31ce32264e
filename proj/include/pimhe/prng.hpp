#pragma once

#include "pimhe/bigint.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace pimhe {

/// Deterministic counter-mode pseudorandom stream keyed by a user seed and a
/// domain label. The same (seed, domain) always yields the same stream on any
/// platform. Not cryptographic; used to make key generation and encryption
/// reproducible in tests and across the CLI.
class PrfStream {
public:
    PrfStream(std::string_view seed, std::string_view domain) {
        key_ = 0xcbf29ce484222325ULL;  // FNV-1a over seed bytes then domain
        for (char c : seed) absorb(static_cast<std::uint8_t>(c));
        absorb(0xff);
        for (char c : domain) absorb(static_cast<std::uint8_t>(c));
        counter_ = 0;
    }

    std::uint64_t next_u64() { return mix(key_ ^ (0x9e3779b97f4a7c15ULL * ++counter_)); }

    /// Uniform value in [0, 2^bits) — exact for power-of-two ranges.
    BigInt next_bits(unsigned bits) {
        BigInt v = 0;
        unsigned produced = 0;
        while (produced < bits) {
            v <<= 64;
            v += next_u64();
            produced += 64;
        }
        return mod_pow2(v, bits);
    }

    /// Uniform in [lo, hi] via rejection sampling.
    std::int64_t next_range(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if ((span & (span - 1)) == 0) {  // power of two
            return lo + static_cast<std::int64_t>(next_u64() & (span - 1));
        }
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r;
        do { r = next_u64(); } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

    /// Uniform ternary coefficient in {-1, 0, 1}.
    std::int64_t next_ternary() { return next_range(-1, 1); }

private:
    void absorb(std::uint8_t byte) {
        key_ ^= byte;
        key_ *= 0x100000001b3ULL;
    }
    static std::uint64_t mix(std::uint64_t z) {  // splitmix64 finalizer
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace pimhe
