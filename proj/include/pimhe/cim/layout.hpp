#pragma once

#include "pimhe/cim/bank.hpp"
#include "pimhe/cim/geometry.hpp"
#include "pimhe/params.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace pimhe::cim {

struct CapacityError : std::runtime_error {
    CapacityError(const std::string& what, std::uint64_t required, std::uint64_t available)
        : std::runtime_error(what + " (required " + std::to_string(required) + ", available " +
                             std::to_string(available) + ")"),
          required(required),
          available(available) {}
    std::uint64_t required, available;
};

/// Column-aligned placement of ciphertexts. Polynomial c[0] of every resident
/// ciphertext maps to arrays [0, n1), c[1] to arrays [n1, 2*n1); degree z sits
/// at array z/C, slot z%C, and the ciphertext index selects the row. All
/// coefficients of equal degree therefore share (array, slot) across
/// ciphertexts, which is what the in-memory adders need.
struct LayoutPlan {
    BankGeometry geometry;
    unsigned k = 0;
    unsigned n = 0;
    std::uint32_t arrays_per_poly = 0;  // n1
    std::uint32_t num_ciphertexts = 0;

    std::uint32_t capacity() const {
        const std::uint32_t groups = geometry.num_arrays / (2 * arrays_per_poly);
        return groups == 0 ? 0 : geometry.data_rows_Mprime * groups;
    }

    Addr coeff_addr(std::uint32_t ct, unsigned poly_idx, std::uint32_t degree) const {
        const std::uint32_t c = geometry.slots_per_row();
        const std::uint32_t group = ct / geometry.data_rows_Mprime;
        const std::uint32_t row = ct % geometry.data_rows_Mprime;
        Addr a;
        a.array = group * 2 * arrays_per_poly + poly_idx * arrays_per_poly + degree / c;
        a.row = static_cast<std::uint16_t>(row);
        a.slot = static_cast<std::uint16_t>(degree % c);
        return a;
    }

    std::vector<Addr> poly_vec(std::uint32_t ct, unsigned poly_idx) const {
        std::vector<Addr> v(n);
        for (std::uint32_t z = 0; z < n; ++z) v[z] = coeff_addr(ct, poly_idx, z);
        return v;
    }
};

/// Plans residency for `num_ciphertexts` ciphertexts. Fails with the number
/// that does fit when capacity is exceeded.
inline LayoutPlan plan_layout(std::uint32_t num_ciphertexts, const BankGeometry& g, const ParamSet& p) {
    g.validate();
    if (g.word_bits < p.k)
        throw std::invalid_argument("layout: geometry word_bits smaller than coefficient width k");
    LayoutPlan plan;
    plan.geometry = g;
    plan.k = p.k;
    plan.n = p.n;
    const std::uint32_t c = g.slots_per_row();
    plan.arrays_per_poly = (p.n + c - 1) / c;
    plan.num_ciphertexts = num_ciphertexts;
    if (2ull * plan.arrays_per_poly > g.num_arrays)
        throw CapacityError("layout: one ciphertext does not fit across the arrays", 2ull * plan.arrays_per_poly,
                            g.num_arrays);
    if (num_ciphertexts > plan.capacity())
        throw CapacityError("layout: ciphertext capacity exceeded", num_ciphertexts, plan.capacity());
    return plan;
}

}  // namespace pimhe::cim
