#pragma once

#include "pimhe/params.hpp"
#include "pimhe/polyring.hpp"
#include "pimhe/prng.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pimhe::bfv {

struct Plaintext {
    RingPoly poly;  // modulus t = 2^t_log2
};

struct Ciphertext {
    RingPoly c0;  // modulus q
    RingPoly c1;
    unsigned level_hint = 0;  // multiplications applied (bookkeeping only)

    bool operator==(const Ciphertext& o) const { return c0 == o.c0 && c1 == o.c1; }
};

struct KeySet {
    RingPoly sk;                                   // ternary secret
    std::pair<RingPoly, RingPoly> pk;              // ([-(a*s+e)]_q, a)
    std::vector<std::pair<RingPoly, RingPoly>> rlk;  // digit i encrypts 2^(w*i) * s^2
    unsigned decomp_log2 = 30;                     // w, relinearization digit width
    ParamSet params;
};

namespace detail {

inline RingPoly sample_uniform(const ParamSet& p, PrfStream& g) {
    RingPoly r(p.k, p.n);
    for (unsigned i = 0; i < p.n; ++i) r.coeffs[i] = reduce_centered(g.next_bits(p.k), p.k);
    return r;
}

inline RingPoly sample_ternary(const ParamSet& p, PrfStream& g) {
    RingPoly r(p.k, p.n);
    for (unsigned i = 0; i < p.n; ++i) r.coeffs[i] = g.next_ternary();
    return r;
}

/// Error polynomial with coefficients uniform in [-B, B].
inline RingPoly sample_error(const ParamSet& p, PrfStream& g) {
    RingPoly r(p.k, p.n);
    const auto B = static_cast<std::int64_t>(p.error_bound);
    for (unsigned i = 0; i < p.n; ++i) r.coeffs[i] = g.next_range(-B, B);
    return r;
}

inline RingPoly ring_mult(const RingPoly& a, const RingPoly& b) { return poly_mult_karatsuba(a, b); }

}  // namespace detail

inline unsigned rlk_digit_count(const ParamSet& p, unsigned w) { return (p.k + w - 1) / w; }

inline KeySet keygen(const ParamSet& params, const std::string& seed, unsigned decomp_log2 = 30) {
    ValidationResult v = validate(params);
    if (!v.ok) throw std::invalid_argument("keygen: invalid parameters: " + v.violations.front());
    if (decomp_log2 == 0 || decomp_log2 > params.k)
        throw std::invalid_argument("keygen: decomposition width out of range");

    KeySet ks;
    ks.params = params;
    ks.decomp_log2 = decomp_log2;

    PrfStream gs(seed, "bfv/sk");
    ks.sk = detail::sample_ternary(params, gs);

    PrfStream ga(seed, "bfv/pk-a");
    PrfStream ge(seed, "bfv/pk-e");
    RingPoly a = detail::sample_uniform(params, ga);
    RingPoly e = detail::sample_error(params, ge);
    RingPoly as = detail::ring_mult(a, ks.sk);
    RingPoly p0 = poly_sub(RingPoly(params.k, params.n), poly_add(as, e));  // -(a*s+e)
    ks.pk = {p0, a};

    RingPoly s2 = detail::ring_mult(ks.sk, ks.sk);
    const unsigned ell = rlk_digit_count(params, decomp_log2);
    for (unsigned i = 0; i < ell; ++i) {
        PrfStream gra(seed, "bfv/rlk-a/" + std::to_string(i));
        PrfStream gre(seed, "bfv/rlk-e/" + std::to_string(i));
        RingPoly ai = detail::sample_uniform(params, gra);
        RingPoly ei = detail::sample_error(params, gre);
        // rlk_i = (-(a_i*s + e_i) + 2^(w*i) * s^2, a_i)
        RingPoly base(params.k, params.n);
        for (unsigned c = 0; c < params.n; ++c)
            base.coeffs[c] = reduce_centered(s2.coeffs[c] << (decomp_log2 * i), params.k);
        RingPoly r0 = poly_sub(base, poly_add(detail::ring_mult(ai, ks.sk), ei));
        ks.rlk.emplace_back(r0, ai);
    }
    return ks;
}

/// Encryption with caller-supplied randomness. Refuses an all-zero u unless
/// explicitly allowed (degenerate randomness leaks the plaintext).
inline Ciphertext encrypt_with_randomness(const Plaintext& m, const std::pair<RingPoly, RingPoly>& pk,
                                          const ParamSet& params, const RingPoly& u, const RingPoly& e1,
                                          const RingPoly& e2, bool allow_zero_u = false) {
    if (m.poly.n != params.n || m.poly.k != params.t_log2)
        throw std::invalid_argument("encrypt: plaintext does not match parameters");
    if (!allow_zero_u) {
        bool all_zero = true;
        for (const auto& c : u.coeffs)
            if (c != 0) { all_zero = false; break; }
        if (all_zero) throw std::invalid_argument("encrypt: degenerate (all-zero) randomness refused");
    }
    const BigInt delta = params.delta();
    RingPoly dm(params.k, params.n);
    for (unsigned i = 0; i < params.n; ++i) dm.coeffs[i] = reduce_centered(m.poly.coeffs[i] * delta, params.k);
    RingPoly c0 = poly_add(poly_add(detail::ring_mult(pk.first, u), e1), dm);
    RingPoly c1 = poly_add(detail::ring_mult(pk.second, u), e2);
    return Ciphertext{c0, c1, 0};
}

inline Ciphertext encrypt(const Plaintext& m, const KeySet& ks, const std::string& seed) {
    PrfStream gu(seed, "bfv/enc-u");
    PrfStream g1(seed, "bfv/enc-e1");
    PrfStream g2(seed, "bfv/enc-e2");
    RingPoly u = detail::sample_ternary(ks.params, gu);
    RingPoly e1 = detail::sample_error(ks.params, g1);
    RingPoly e2 = detail::sample_error(ks.params, g2);
    return encrypt_with_randomness(m, ks.pk, ks.params, u, e1, e2);
}

/// Trivial (noiseless, keyless) encryption of a plaintext: (Delta*m, 0).
/// Used for public constants folded into encrypted computations.
inline Ciphertext trivial_encrypt(const Plaintext& m, const ParamSet& params) {
    RingPoly c0(params.k, params.n);
    const BigInt delta = params.delta();
    for (unsigned i = 0; i < params.n; ++i) c0.coeffs[i] = reduce_centered(m.poly.coeffs[i] * delta, params.k);
    return Ciphertext{c0, RingPoly(params.k, params.n), 0};
}

inline Plaintext decrypt(const Ciphertext& c, const KeySet& ks) {
    const ParamSet& p = ks.params;
    RingPoly phase = poly_add(c.c0, detail::ring_mult(c.c1, ks.sk));  // [c0 + c1*s]_q centered
    Plaintext m{RingPoly(p.t_log2, p.n)};
    const unsigned shift = p.k - p.t_log2;
    for (unsigned i = 0; i < p.n; ++i)
        m.poly.coeffs[i] = reduce_centered(scale_signed(phase.coeffs[i], shift), p.t_log2);
    return m;
}

inline Ciphertext hom_add(const Ciphertext& a, const Ciphertext& b) {
    return Ciphertext{poly_add(a.c0, b.c0), poly_add(a.c1, b.c1), std::max(a.level_hint, b.level_hint)};
}

inline Ciphertext hom_sub(const Ciphertext& a, const Ciphertext& b) {
    return Ciphertext{poly_sub(a.c0, b.c0), poly_sub(a.c1, b.c1), std::max(a.level_hint, b.level_hint)};
}

/// Non-negative base-2^w digits of the canonical representative of every
/// coefficient: digit j of x is bits [w*j, w*(j+1)) of x mod 2^k.
inline std::vector<std::vector<BigInt>> digit_decompose(const RingPoly& x, unsigned w) {
    const unsigned ell = (x.k + w - 1) / w;
    std::vector<std::vector<BigInt>> digits(ell, std::vector<BigInt>(x.n, BigInt(0)));
    for (unsigned i = 0; i < x.n; ++i) {
        BigInt v = mod_pow2(x.coeffs[i], x.k);
        for (unsigned j = 0; j < ell; ++j) {
            digits[j][i] = mod_pow2(v, w);
            v >>= w;
        }
    }
    return digits;
}

/// Homomorphic multiplication with relinearization (Eq. (3)/(4) pipeline).
/// The t/q rounded scaling is applied to the exact full-length tensor
/// coefficients; negacyclic reduction and centered mod-q reduction follow.
inline Ciphertext hom_mult(const Ciphertext& a, const Ciphertext& b, const KeySet& ks) {
    const ParamSet& p = ks.params;
    if (a.c0.k != p.k || a.c0.n != p.n || b.c0.k != p.k || b.c0.n != p.n)
        throw std::invalid_argument("hom_mult: ciphertext/parameter mismatch");
    const unsigned shift = p.k - p.t_log2;

    auto scaled_ring = [&](std::vector<BigInt> full) {
        for (auto& c : full) c = scale_signed(c, shift);
        auto folded = negacyclic_fold(full, p.n);
        RingPoly r(p.k, p.n);
        for (unsigned i = 0; i < p.n; ++i) r.coeffs[i] = reduce_centered(folded[i], p.k);
        return r;
    };

    auto p00 = convolve_karatsuba(a.c0.coeffs, b.c0.coeffs);
    auto p01 = convolve_karatsuba(a.c0.coeffs, b.c1.coeffs);
    auto p10 = convolve_karatsuba(a.c1.coeffs, b.c0.coeffs);
    auto p11 = convolve_karatsuba(a.c1.coeffs, b.c1.coeffs);
    for (std::size_t i = 0; i < p01.size(); ++i) p01[i] += p10[i];

    RingPoly cx = scaled_ring(std::move(p00));
    RingPoly cy = scaled_ring(std::move(p01));
    RingPoly cz = scaled_ring(std::move(p11));

    auto digits = digit_decompose(cz, ks.decomp_log2);
    if (digits.size() != ks.rlk.size()) throw std::logic_error("hom_mult: rlk digit count mismatch");
    std::vector<BigInt> acc0(2 * p.n - 1, BigInt(0)), acc1(2 * p.n - 1, BigInt(0));
    for (std::size_t j = 0; j < digits.size(); ++j) {
        auto t0 = convolve_karatsuba(digits[j], ks.rlk[j].first.coeffs);
        auto t1 = convolve_karatsuba(digits[j], ks.rlk[j].second.coeffs);
        for (std::size_t i = 0; i < acc0.size(); ++i) {
            acc0[i] += t0[i];
            acc1[i] += t1[i];
        }
    }
    auto rel0 = negacyclic_fold(acc0, p.n);
    auto rel1 = negacyclic_fold(acc1, p.n);

    Ciphertext out;
    out.c0 = RingPoly(p.k, p.n);
    out.c1 = RingPoly(p.k, p.n);
    for (unsigned i = 0; i < p.n; ++i) {
        out.c0.coeffs[i] = reduce_centered(cx.coeffs[i] + rel0[i], p.k);
        out.c1.coeffs[i] = reduce_centered(cy.coeffs[i] + rel1[i], p.k);
    }
    out.level_hint = std::max(a.level_hint, b.level_hint) + 1;
    return out;
}

}  // namespace pimhe::bfv
