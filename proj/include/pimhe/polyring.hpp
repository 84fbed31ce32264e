#pragma once

#include "pimhe/bigint.hpp"

#include <stdexcept>
#include <utility>
#include <vector>

namespace pimhe {

// A Residue is a centered representative of Z mod 2^k: value in [-2^(k-1), 2^(k-1)).
// Residues are plain BigInt values; RingPoly maintains the invariant.
using Residue = BigInt;

/// x mod 2^k reduced to the centered interval [-2^(k-1), 2^(k-1)).
/// The halfway point +2^(k-1) maps down to -2^(k-1) (right-open interval).
inline Residue reduce_centered(const BigInt& x, unsigned k) {
    if (k == 0) throw std::invalid_argument("reduce_centered: k must be >= 1");
    BigInt r = mod_pow2(x, k);
    if (r >= pow2(k - 1)) r -= pow2(k);
    return r;
}

/// Element of R_{2^k} = Z_{2^k}[X]/(X^n + 1) with centered coefficients.
struct RingPoly {
    unsigned k = 0;
    unsigned n = 0;
    std::vector<BigInt> coeffs;  // coeffs[i] multiplies X^i, size n

    RingPoly() = default;
    RingPoly(unsigned k_, unsigned n_) : k(k_), n(n_), coeffs(n_, BigInt(0)) {}

    static RingPoly from_coeffs(unsigned k, unsigned n, std::vector<BigInt> raw) {
        if (raw.size() != n) throw std::invalid_argument("RingPoly: coefficient count != n");
        RingPoly p(k, n);
        for (unsigned i = 0; i < n; ++i) p.coeffs[i] = reduce_centered(raw[i], k);
        return p;
    }

    bool operator==(const RingPoly& o) const {
        return k == o.k && n == o.n && coeffs == o.coeffs;
    }
};

namespace detail {
inline void require_same_ring(const RingPoly& a, const RingPoly& b) {
    if (a.k != b.k || a.n != b.n)
        throw std::invalid_argument("ring mismatch: operands must share (k, n)");
}
}  // namespace detail

inline RingPoly poly_add(const RingPoly& a, const RingPoly& b) {
    detail::require_same_ring(a, b);
    RingPoly r(a.k, a.n);
    for (unsigned i = 0; i < a.n; ++i) r.coeffs[i] = reduce_centered(a.coeffs[i] + b.coeffs[i], a.k);
    return r;
}

inline RingPoly poly_sub(const RingPoly& a, const RingPoly& b) {
    detail::require_same_ring(a, b);
    RingPoly r(a.k, a.n);
    for (unsigned i = 0; i < a.n; ++i) r.coeffs[i] = reduce_centered(a.coeffs[i] - b.coeffs[i], a.k);
    return r;
}

/// Full product in Z[X] (no ring reduction): result length 2n-1.
/// Plain double-sum convolution; the independent baseline for everything else.
inline std::vector<BigInt> convolve_schoolbook(const std::vector<BigInt>& a, const std::vector<BigInt>& b) {
    std::vector<BigInt> out(a.size() + b.size() - 1, BigInt(0));
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0) continue;
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

/// Full product in Z[X] via recursive Karatsuba (split at floor(n/2), exact integers).
inline std::vector<BigInt> convolve_karatsuba(const std::vector<BigInt>& a, const std::vector<BigInt>& b) {
    const std::size_t n = a.size();
    if (n != b.size()) throw std::invalid_argument("convolve_karatsuba: length mismatch");
    if (n <= 8) return convolve_schoolbook(a, b);
    const std::size_t h = n / 2;
    std::vector<BigInt> al(a.begin(), a.begin() + h), ah(a.begin() + h, a.end());
    std::vector<BigInt> bl(b.begin(), b.begin() + h), bh(b.begin() + h, b.end());
    std::vector<BigInt> sa(ah.size()), sb(bh.size());
    for (std::size_t i = 0; i < ah.size(); ++i) sa[i] = ah[i] + (i < al.size() ? al[i] : BigInt(0));
    for (std::size_t i = 0; i < bh.size(); ++i) sb[i] = bh[i] + (i < bl.size() ? bl[i] : BigInt(0));
    auto r3 = convolve_karatsuba(al, bl);          // low*low
    auto r2 = convolve_karatsuba(ah, bh);          // high*high
    auto r1 = convolve_karatsuba(sa, sb);          // (low+high)*(low+high)
    for (std::size_t i = 0; i < r1.size(); ++i) {
        if (i < r3.size()) r1[i] -= r3[i];
        r1[i] -= r2[i];
    }
    std::vector<BigInt> out(2 * n - 1, BigInt(0));
    for (std::size_t i = 0; i < r3.size(); ++i) out[i] += r3[i];
    for (std::size_t i = 0; i < r1.size(); ++i) out[h + i] += r1[i];
    for (std::size_t i = 0; i < r2.size(); ++i) out[2 * h + i] += r2[i];
    return out;
}

/// Negacyclic fold: reduce a full (2n-1)-length product by X^n == -1.
inline std::vector<BigInt> negacyclic_fold(const std::vector<BigInt>& full, unsigned n) {
    std::vector<BigInt> out(n, BigInt(0));
    for (std::size_t i = 0; i < full.size(); ++i) {
        if (i < n) out[i] += full[i];
        else out[i - n] -= full[i];
    }
    return out;
}

/// Negacyclic convolution oracle: product in Z[X], reduced by X^n == -1, then centered mod 2^k.
inline RingPoly poly_mult_schoolbook(const RingPoly& a, const RingPoly& b) {
    detail::require_same_ring(a, b);
    auto folded = negacyclic_fold(convolve_schoolbook(a.coeffs, b.coeffs), a.n);
    RingPoly r(a.k, a.n);
    for (unsigned i = 0; i < a.n; ++i) r.coeffs[i] = reduce_centered(folded[i], a.k);
    return r;
}

/// Karatsuba ring multiplication: bit-identical to poly_mult_schoolbook by contract.
inline RingPoly poly_mult_karatsuba(const RingPoly& a, const RingPoly& b) {
    detail::require_same_ring(a, b);
    auto folded = negacyclic_fold(convolve_karatsuba(a.coeffs, b.coeffs), a.n);
    RingPoly r(a.k, a.n);
    for (unsigned i = 0; i < a.n; ++i) r.coeffs[i] = reduce_centered(folded[i], a.k);
    return r;
}

/// Round-half-up scaling of the width-bit two's-complement pattern of `value`
/// by 2^shift: quotient = floor(pattern / 2^shift) + (remainder bit shift-1).
/// This is exactly what the in-memory shift/flag procedure computes.
inline BigInt scale_pattern(const BigInt& value, unsigned shift, unsigned width) {
    if (shift > width) throw std::invalid_argument("scale_pattern: shift exceeds width");
    BigInt v = mod_pow2(value, width);
    if (shift == 0) return v;
    BigInt q = v >> shift;
    if (boost::multiprecision::bit_test(v, shift - 1)) q += 1;
    return q;
}

/// Round-half-up (ties toward +inf) of x / 2^shift on the true signed value.
inline BigInt scale_signed(const BigInt& x, unsigned shift) {
    if (shift == 0) return x;
    BigInt q = floor_div_pow2(x, shift);
    BigInt rem = x - (q << shift);  // in [0, 2^shift)
    if (rem >= pow2(shift - 1)) q += 1;
    return q;
}

/// Rounded scaling by 2^k' of every coefficient. Operates on the k-bit
/// canonical pattern (the bit-level view the shifter sees), then re-centers.
inline RingPoly poly_scale_round(const RingPoly& a, unsigned k_prime) {
    if (k_prime > a.k) throw std::invalid_argument("poly_scale_round: k' out of range");
    RingPoly r(a.k, a.n);
    for (unsigned i = 0; i < a.n; ++i)
        r.coeffs[i] = reduce_centered(scale_pattern(a.coeffs[i], k_prime, a.k), a.k);
    return r;
}

/// Reference bit-serial multiplication (the Shift-Add base case): iterates the
/// multiplier bits LSB-first, adding the running multiplicand copy on 1-bits
/// and left-shifting it every iteration. Returns a*b truncated mod 2^width.
inline BigInt shift_add_reference(const BigInt& a, const BigInt& b, unsigned width) {
    BigInt out = 0;
    BigInt acc = mod_pow2(a, width);
    BigInt bp = mod_pow2(b, width);
    for (unsigned i = 0; i < width; ++i) {
        if (boost::multiprecision::bit_test(bp, i)) out = mod_pow2(out + acc, width);
        acc = mod_pow2(acc << 1, width);
    }
    return out;
}

/// One level of integer Karatsuba splitting a k-bit pair at half_bits, with the
/// intermediate products surfaced. Mirrors the worked toy example: for
/// (11, 6, half_bits=2) the intermediates are r1=15, r2=2, r3=6, r1-r2-r3=7
/// and the recombined product is 66.
struct KaratsubaIntTrace {
    BigInt low_a, high_a, low_b, high_b;
    BigInt sum_a, sum_b;
    BigInt r1, r2, r3, r1_minus_r2_r3;
    BigInt product;
};

inline KaratsubaIntTrace karatsuba_int_once(const BigInt& a, const BigInt& b, unsigned half_bits) {
    KaratsubaIntTrace t;
    t.low_a = mod_pow2(a, half_bits);
    t.high_a = a >> half_bits;
    t.low_b = mod_pow2(b, half_bits);
    t.high_b = b >> half_bits;
    t.sum_a = t.low_a + t.high_a;
    t.sum_b = t.low_b + t.high_b;
    t.r1 = t.sum_a * t.sum_b;
    t.r2 = t.high_a * t.high_b;
    t.r3 = t.low_a * t.low_b;
    t.r1_minus_r2_r3 = t.r1 - t.r2 - t.r3;
    t.product = (t.r2 << (2 * half_bits)) + (t.r1_minus_r2_r3 << half_bits) + t.r3;
    return t;
}

}  // namespace pimhe
