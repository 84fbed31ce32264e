#pragma once

#include "pimhe/bfv.hpp"
#include "pimhe/polyring.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pimhe {

// Binary record layout. Every polynomial record is:
//   [tag u8][k u32 LE][n u32 LE][n * ceil(k/8) bytes, little-endian two's complement]
// Ciphertext files carry two poly records plus a level hint; key files carry
// the secret/public/relinearization polynomials with their digit width.
namespace tags {
constexpr std::uint8_t kPoly = 0x01;
constexpr std::uint8_t kCiphertext = 0x02;
constexpr std::uint8_t kSecretKey = 0x03;
constexpr std::uint8_t kPublicKey = 0x04;
constexpr std::uint8_t kRelinKey = 0x05;
constexpr std::uint8_t kPlaintext = 0x06;
}  // namespace tags

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    std::uint8_t b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("truncated stream");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

}  // namespace detail

inline void write_poly(std::ostream& os, const RingPoly& p, std::uint8_t tag = tags::kPoly) {
    os.put(static_cast<char>(tag));
    detail::put_u32(os, p.k);
    detail::put_u32(os, p.n);
    const std::size_t rec = (p.k + 7) / 8;
    for (const auto& c : p.coeffs) {
        auto bytes = to_le_bytes(c, rec);
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
}

inline RingPoly read_poly(std::istream& is, std::uint8_t expected_tag = tags::kPoly) {
    int tag = is.get();
    if (tag == EOF) throw std::runtime_error("truncated stream");
    if (expected_tag != 0 && tag != expected_tag) throw std::runtime_error("unexpected record tag");
    const unsigned k = detail::get_u32(is);
    const unsigned n = detail::get_u32(is);
    if (k == 0 || k > 4096 || n == 0 || n > (1u << 24)) throw std::runtime_error("implausible poly header");
    const std::size_t rec = (k + 7) / 8;
    RingPoly p(k, n);
    std::vector<std::uint8_t> buf(rec);
    for (unsigned i = 0; i < n; ++i) {
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(rec));
        if (!is) throw std::runtime_error("truncated poly payload");
        p.coeffs[i] = from_le_bytes_centered(buf.data(), rec, k);
    }
    return p;
}

inline void write_ciphertext(std::ostream& os, const bfv::Ciphertext& c) {
    os.put(static_cast<char>(tags::kCiphertext));
    detail::put_u32(os, c.level_hint);
    write_poly(os, c.c0);
    write_poly(os, c.c1);
}

inline bfv::Ciphertext read_ciphertext(std::istream& is) {
    int tag = is.get();
    if (tag != tags::kCiphertext) throw std::runtime_error("not a ciphertext record");
    bfv::Ciphertext c;
    c.level_hint = detail::get_u32(is);
    c.c0 = read_poly(is);
    c.c1 = read_poly(is);
    return c;
}

inline void write_keyset(std::ostream& os, const bfv::KeySet& ks) {
    os.put(static_cast<char>(tags::kSecretKey));
    detail::put_u32(os, ks.decomp_log2);
    detail::put_u32(os, ks.params.k);
    detail::put_u32(os, ks.params.n);
    detail::put_u32(os, ks.params.t_log2);
    detail::put_u32(os, ks.params.error_bound);
    detail::put_u32(os, ks.params.security_bits);
    write_poly(os, ks.sk);
    os.put(static_cast<char>(tags::kPublicKey));
    write_poly(os, ks.pk.first);
    write_poly(os, ks.pk.second);
    os.put(static_cast<char>(tags::kRelinKey));
    detail::put_u32(os, static_cast<std::uint32_t>(ks.rlk.size()));
    for (const auto& [r0, r1] : ks.rlk) {
        write_poly(os, r0);
        write_poly(os, r1);
    }
}

inline bfv::KeySet read_keyset(std::istream& is) {
    if (is.get() != tags::kSecretKey) throw std::runtime_error("not a key file");
    bfv::KeySet ks;
    ks.decomp_log2 = detail::get_u32(is);
    ks.params.k = detail::get_u32(is);
    ks.params.n = detail::get_u32(is);
    ks.params.t_log2 = detail::get_u32(is);
    ks.params.error_bound = detail::get_u32(is);
    ks.params.security_bits = detail::get_u32(is);
    ks.sk = read_poly(is);
    if (is.get() != tags::kPublicKey) throw std::runtime_error("missing public key record");
    ks.pk.first = read_poly(is);
    ks.pk.second = read_poly(is);
    if (is.get() != tags::kRelinKey) throw std::runtime_error("missing relin key record");
    const unsigned ell = detail::get_u32(is);
    for (unsigned i = 0; i < ell; ++i) {
        RingPoly r0 = read_poly(is);
        RingPoly r1 = read_poly(is);
        ks.rlk.emplace_back(std::move(r0), std::move(r1));
    }
    return ks;
}

/// Write-then-rename so consumers never observe partial files.
template <typename Fn>
void atomic_write_file(const std::string& path, Fn&& writer) {
    const std::string tmp = path + ".tmp";
    try {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open for writing: " + tmp);
        writer(os);
        os.flush();
        if (!os) throw std::runtime_error("write failed: " + tmp);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace pimhe
