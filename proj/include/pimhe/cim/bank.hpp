#pragma once

#include "pimhe/bigint.hpp"
#include "pimhe/cim/geometry.hpp"

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace pimhe::cim {

struct Addr {
    std::uint32_t array = 0;
    std::uint16_t row = 0;
    std::uint16_t slot = 0;

    bool operator==(const Addr& o) const { return array == o.array && row == o.row && slot == o.slot; }
};

/// Simulated bank of bit-matrix arrays. Each array carries its peripherals:
/// a row-wide output latch, a 1-bit controller-visible flag and one
/// controller register (the Shift-Add multiplier register). Array storage is
/// allocated on first touch so huge mostly-idle geometries stay cheap.
class CimBank {
public:
    explicit CimBank(const BankGeometry& g) : geo_(g) {
        g.validate();
        arrays_.resize(g.num_arrays);
    }

    const BankGeometry& geometry() const { return geo_; }

    struct ArrayState {
        std::vector<std::uint64_t> bits;   // rows_M * words_per_row once touched
        std::vector<std::uint64_t> latch;  // words_per_row
        std::vector<std::uint64_t> reg;    // words_per_slot
        bool flag = false;
    };

    std::uint64_t* row_ptr(std::uint32_t array, std::uint32_t row) {
        ArrayState& a = touch(array);
        check_row(row);
        return a.bits.data() + std::size_t(row) * geo_.words_per_row();
    }
    std::uint64_t* slot_ptr(std::uint32_t array, std::uint32_t row, std::uint32_t slot) {
        check_slot(slot);
        return row_ptr(array, row) + std::size_t(slot) * geo_.words_per_slot();
    }
    std::uint64_t* latch_ptr(std::uint32_t array) { return touch(array).latch.data(); }
    std::uint64_t* latch_slot_ptr(std::uint32_t array, std::uint32_t slot) {
        check_slot(slot);
        return latch_ptr(array) + std::size_t(slot) * geo_.words_per_slot();
    }
    std::uint64_t* reg_ptr(std::uint32_t array) { return touch(array).reg.data(); }

    bool flag(std::uint32_t array) const { return state(array).flag; }
    void set_flag(std::uint32_t array, bool v) { touch(array).flag = v; }

    /// Host-side staging read: the canonical word_bits-wide value of a slot.
    BigInt read_slot(const Addr& at) const {
        const ArrayState& a = state(at.array);
        check_row(at.row);
        check_slot(at.slot);
        if (a.bits.empty()) return BigInt(0);
        const std::uint64_t* w = a.bits.data() + std::size_t(at.row) * geo_.words_per_row() +
                                 std::size_t(at.slot) * geo_.words_per_slot();
        return from_words(w, geo_.words_per_slot());
    }

    /// Centered readout at width k (k <= word_bits).
    BigInt read_slot_centered(const Addr& at, unsigned k) const {
        BigInt v = mod_pow2(read_slot(at), k);
        if (v >= pow2(k - 1)) v -= pow2(k);
        return v;
    }

    /// Host-side staging write (initial data load; not a charged step).
    void write_slot(const Addr& at, const BigInt& v) {
        to_words(v, slot_ptr(at.array, at.row, at.slot), geo_.words_per_slot());
    }

    bool same_contents(const CimBank& o) const {
        if (geo_.num_arrays != o.geo_.num_arrays) return false;
        static const std::vector<std::uint64_t> empty;
        for (std::uint32_t i = 0; i < geo_.num_arrays; ++i) {
            const auto& a = arrays_[i].bits.empty() ? empty : arrays_[i].bits;
            const auto& b = o.arrays_[i].bits.empty() ? empty : o.arrays_[i].bits;
            if (a.empty() && b.empty()) continue;
            if (a.empty() || b.empty()) {
                const auto& nz = a.empty() ? b : a;
                for (auto w : nz)
                    if (w) return false;
                continue;
            }
            if (a != b) return false;
        }
        return true;
    }

private:
    ArrayState& touch(std::uint32_t array) {
        check_array(array);
        ArrayState& a = arrays_[array];
        if (a.bits.empty()) {
            a.bits.assign(std::size_t(geo_.rows_M) * geo_.words_per_row(), 0);
            a.latch.assign(geo_.words_per_row(), 0);
            a.reg.assign(geo_.words_per_slot(), 0);
        }
        return a;
    }
    const ArrayState& state(std::uint32_t array) const {
        check_array(array);
        return arrays_[array];
    }
    void check_array(std::uint32_t array) const {
        if (array >= geo_.num_arrays) throw std::out_of_range("array index out of bounds");
    }
    void check_row(std::uint32_t row) const {
        if (row >= geo_.rows_M) throw std::out_of_range("row index out of bounds");
    }
    void check_slot(std::uint32_t slot) const {
        if (slot >= geo_.slots_per_row()) throw std::out_of_range("slot index out of bounds");
    }

    BankGeometry geo_;
    std::vector<ArrayState> arrays_;
};

}  // namespace pimhe::cim
