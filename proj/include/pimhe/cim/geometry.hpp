#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace pimhe::cim {

/// Physical shape of one bank: identical arrays of rows_M x cols_N bitcells.
/// Row indices below data_rows_Mprime hold ciphertext data; the remainder is
/// scratch space for intermediates, staged constants and working vectors.
struct BankGeometry {
    std::uint32_t num_arrays = 4096;
    std::uint32_t rows_M = 8;
    std::uint32_t data_rows_Mprime = 6;
    std::uint32_t cols_N = 1024;
    std::uint32_t word_bits = 256;  // w*64, one coefficient slot

    std::uint32_t slots_per_row() const { return cols_N / word_bits; }  // C
    std::uint32_t words_per_slot() const { return word_bits / 64; }
    std::uint32_t words_per_row() const { return cols_N / 64; }
    std::uint64_t data_slots() const {
        return std::uint64_t(num_arrays) * data_rows_Mprime * slots_per_row();
    }
    std::uint64_t bytes_total() const { return std::uint64_t(num_arrays) * rows_M * cols_N / 8; }

    void validate() const {
        if (num_arrays == 0 || rows_M == 0 || cols_N == 0) throw std::invalid_argument("geometry: zero dimension");
        if (data_rows_Mprime > rows_M) throw std::invalid_argument("geometry: data rows exceed total rows");
        if (word_bits == 0 || word_bits % 64 != 0) throw std::invalid_argument("geometry: word_bits must be a positive multiple of 64");
        if (cols_N % word_bits != 0 || slots_per_row() == 0)
            throw std::invalid_argument("geometry: cols_N must be a positive multiple of word_bits");
    }
};

inline BankGeometry geometry_from_json(const nlohmann::json& j) {
    BankGeometry g;
    g.num_arrays = j.value("num_arrays", 4096u);
    g.rows_M = j.value("rows_M", 8u);
    g.data_rows_Mprime = j.value("data_rows_Mprime", 6u);
    g.cols_N = j.value("cols_N", 1024u);
    g.word_bits = j.value("word_bits", 256u);
    g.validate();
    return g;
}

inline nlohmann::json geometry_to_json(const BankGeometry& g) {
    return {{"num_arrays", g.num_arrays}, {"rows_M", g.rows_M}, {"data_rows_Mprime", g.data_rows_Mprime},
            {"cols_N", g.cols_N}, {"word_bits", g.word_bits}};
}

/// Built-in geometries. "default-4mb" mirrors the evaluated bank: 4096 arrays
/// of 8x1024 with 2 scratch rows (0.25 KB per array), 256-bit slots, C = 4,
/// i.e. 6 resident ciphertexts at the 218/8192 setting. Multiplication needs
/// wider intermediate slots and more scratch; the mult-* geometries provide
/// them while keeping the array fabric.
inline const std::map<std::string, BankGeometry>& builtin_geometries() {
    static const std::map<std::string, BankGeometry> g = {
        {"default-4mb", BankGeometry{4096, 8, 6, 1024, 256}},
        {"mult-large", BankGeometry{4096, 160, 8, 2048, 512}},
        {"mult-desk", BankGeometry{64, 96, 8, 1024, 256}},
    };
    return g;
}

inline BankGeometry geometry_preset(const std::string& name) {
    auto it = builtin_geometries().find(name);
    if (it == builtin_geometries().end()) throw std::invalid_argument("unknown geometry preset: " + name);
    return it->second;
}

}  // namespace pimhe::cim
