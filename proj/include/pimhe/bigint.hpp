#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <vector>

namespace pimhe {

using BigInt = boost::multiprecision::cpp_int;

inline BigInt pow2(unsigned e) { return BigInt(1) << e; }

/// Number of bits in the minimal unsigned representation of |v|.
inline unsigned bit_length(const BigInt& v) {
    if (v == 0) return 0;
    return static_cast<unsigned>(boost::multiprecision::msb(v < 0 ? BigInt(-v) : v)) + 1;
}

/// v mod 2^k as the canonical representative in [0, 2^k).
inline BigInt mod_pow2(const BigInt& v, unsigned k) {
    BigInt m = v % pow2(k);
    if (m < 0) m += pow2(k);
    return m;
}

/// Floor division by 2^s (rounds toward -inf for negative values too).
/// Shift/mask operators are kept away from negative cpp_int values.
inline BigInt floor_div_pow2(const BigInt& v, unsigned s) {
    if (s == 0) return v;
    if (v >= 0) return v >> s;
    BigInt q = (-v + pow2(s) - 1) >> s;
    return -q;
}

/// Little-endian two's-complement bytes of width `nbytes` for value v (v taken mod 2^(8*nbytes)).
inline std::vector<std::uint8_t> to_le_bytes(const BigInt& v, std::size_t nbytes) {
    BigInt canon = mod_pow2(v, static_cast<unsigned>(8 * nbytes));
    std::vector<std::uint8_t> out(nbytes, 0);
    for (std::size_t i = 0; i < nbytes && canon != 0; ++i) {
        out[i] = static_cast<std::uint8_t>(canon & 0xff);
        canon >>= 8;
    }
    return out;
}

/// Inverse of to_le_bytes: interpret k-bit two's complement, result centered in [-2^(k-1), 2^(k-1)).
inline BigInt from_le_bytes_centered(const std::uint8_t* data, std::size_t nbytes, unsigned k) {
    BigInt v = 0;
    for (std::size_t i = nbytes; i-- > 0;) {
        v <<= 8;
        v += data[i];
    }
    v = mod_pow2(v, k);
    if (v >= pow2(k - 1)) v -= pow2(k);
    return v;
}

/// Pack the canonical (mod 2^(64*words)) value into little-endian 64-bit words.
inline void to_words(const BigInt& v, std::uint64_t* dst, std::size_t words) {
    BigInt canon = mod_pow2(v, static_cast<unsigned>(64 * words));
    for (std::size_t i = 0; i < words; ++i) {
        dst[i] = static_cast<std::uint64_t>(canon & 0xffffffffffffffffULL);
        canon >>= 64;
    }
}

inline BigInt from_words(const std::uint64_t* src, std::size_t words) {
    BigInt v = 0;
    for (std::size_t i = words; i-- > 0;) {
        v <<= 64;
        v += src[i];
    }
    return v;
}

}  // namespace pimhe
