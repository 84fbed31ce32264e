#pragma once

#include "pimhe/bfv.hpp"
#include "pimhe/cim/compiler.hpp"
#include "pimhe/cim/executor.hpp"
#include "pimhe/cim/layout.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pimhe::cim {

enum class HomOp { Add, Sub, Mult };

inline const char* hom_op_name(HomOp op) {
    switch (op) {
        case HomOp::Add: return "homadd";
        case HomOp::Sub: return "homsub";
        default: return "hommult";
    }
}

// ---- layout-level primitive compilation (also used by the `sim` subcommand) --

inline void compile_mod_reduce(ProgramBuilder& pb, AddrSpan v) { pb.vec_mod_reduce(v, pb.modulus_bits()); }

inline void compile_poly_add(ProgramBuilder& pb, AddrSpan a, AddrSpan b, AddrSpan out) {
    pb.vec_add(a, b, out);
    pb.vec_mod_reduce(out, pb.modulus_bits());
}

inline void compile_poly_sub(ProgramBuilder& pb, AddrSpan a, AddrSpan b, AddrSpan out) {
    pb.vec_sub(a, b, out);
    pb.vec_mod_reduce(out, pb.modulus_bits());
}

inline void compile_poly_scale(ProgramBuilder& pb, AddrSpan v, unsigned k_prime) {
    pb.vec_scale_round(v, k_prime, pb.modulus_bits());
    pb.vec_mod_reduce(v, pb.modulus_bits());
}

inline void compile_poly_mult(ProgramBuilder& pb, AddrSpan a, AddrSpan b, AddrSpan out) {
    pb.poly_mult(a, b, out, pb.modulus_bits(), pb.modulus_bits());
}

/// One simulated bank holding resident ciphertexts in the column-aligned
/// layout, with the staged relinearization key and a persistent scratch pool.
/// Each homomorphic op compiles and executes as one step stream, returning
/// its trace. Mutation is serialized per machine; independent machines
/// (banks) run concurrently.
class HomMachine {
public:
    HomMachine(const ParamSet& params, const BankGeometry& g, const CostModel& cm, bool record_steps = false)
        : params_(params),
          geo_(g),
          cost_(cm),
          record_(record_steps),
          bank_(g),
          layout_(plan_layout(1, g, params)),
          alloc_(g, ProgramBuilder::first_pool_row(g)) {
        cm.validate();
    }

    const LayoutPlan& layout() const { return layout_; }
    const ParamSet& params() const { return params_; }
    CimBank& bank() { return bank_; }
    std::uint32_t capacity() const { return layout_.capacity(); }
    std::uint32_t resident() const { return next_ct_; }

    /// Host-side staging of a resident ciphertext (initial data load).
    std::uint32_t load_ciphertext(const bfv::Ciphertext& ct) {
        if (next_ct_ >= layout_.capacity())
            throw CapacityError("bank ciphertext residency exceeded", next_ct_ + 1, layout_.capacity());
        stage_ciphertext(next_ct_, ct);
        return next_ct_++;
    }

    /// Reserve a resident slot without staging data (op destinations).
    std::uint32_t reserve_slot() {
        if (next_ct_ >= layout_.capacity())
            throw CapacityError("bank ciphertext residency exceeded", next_ct_ + 1, layout_.capacity());
        return next_ct_++;
    }

    void stage_ciphertext(std::uint32_t idx, const bfv::Ciphertext& ct) {
        if (ct.c0.k != params_.k || ct.c0.n != params_.n)
            throw std::invalid_argument("stage: ciphertext does not match machine parameters");
        stage_poly(idx, 0, ct.c0);
        stage_poly(idx, 1, ct.c1);
    }

    bfv::Ciphertext read_ciphertext(std::uint32_t idx, unsigned level_hint = 0) const {
        bfv::Ciphertext ct;
        ct.c0 = read_poly(idx, 0);
        ct.c1 = read_poly(idx, 1);
        ct.level_hint = level_hint;
        return ct;
    }

    /// Stage the relinearization key into persistent scratch vectors
    /// (required before Mult ops).
    void stage_rlk(const bfv::KeySet& ks) {
        if (!rlk0_.empty()) throw std::logic_error("rlk already staged");
        relin_w_ = ks.decomp_log2;
        for (const auto& [r0, r1] : ks.rlk) {
            rlk0_.push_back(stage_resident_poly(r0));
            rlk1_.push_back(stage_resident_poly(r1));
        }
    }

    /// Compile and execute one homomorphic op dst = op(a, b) on the bank.
    StepTrace run_op(HomOp op, std::uint32_t a, std::uint32_t b, std::uint32_t dst) {
        Executor ex(bank_, cost_, record_);
        ex.pool = &pool_;
        ProgramBuilder pb(geo_, ex, pool_, params_.k, &alloc_);
        emit_op(pb, op, a, b, dst);
        return std::move(ex.trace);
    }

    /// dst = src * g for a public integer g: one Shift-Add per coefficient
    /// with the constant staged as the controller multiplier, then the
    /// centered reduction. Cheaper than a full HomMult and changes no
    /// decrypted value.
    StepTrace run_scalar_mult(std::uint32_t src, const BigInt& g, std::uint32_t dst) {
        Executor ex(bank_, cost_, record_);
        ex.pool = &pool_;
        ProgramBuilder pb(geo_, ex, pool_, params_.k, &alloc_);
        const BigInt mag = g < 0 ? BigInt(-g) : g;
        const std::uint32_t pool_id = pool_.intern(mod_pow2(g, geo_.word_bits), geo_.words_per_slot());
        const std::uint32_t width = bit_length(mag);
        for (unsigned p = 0; p < 2; ++p) {
            AddrVec vs = layout_.poly_vec(src, p), vd = layout_.poly_vec(dst, p);
            std::vector<ProgramBuilder::LeafJob> jobs;
            jobs.reserve(params_.n);
            for (unsigned z = 0; z < params_.n; ++z) {
                ProgramBuilder::LeafJob j;
                j.a = vs[z];
                j.dst = vd[z];
                j.width = width;
                j.signed_operands = true;
                j.b_is_const = true;
                j.b_pool = pool_id;
                jobs.push_back(j);
            }
            pb.shift_add_products(std::move(jobs));
            pb.vec_mod_reduce(layout_.poly_vec(dst, p), params_.k);
        }
        return std::move(ex.trace);
    }

    /// Compile the same op into an inspectable program without executing.
    StepProgram compile_op(HomOp op, std::uint32_t a, std::uint32_t b, std::uint32_t dst) {
        StepProgram prog;
        prog.pool = pool_;  // shared interned constants stay valid
        ProgramCollector col(prog);
        const std::uint64_t mark = alloc_.mark();
        ProgramBuilder pb(geo_, col, prog.pool, params_.k, &alloc_);
        emit_op(pb, op, a, b, dst);
        alloc_.release(mark);
        return prog;
    }

private:
    void emit_op(ProgramBuilder& pb, HomOp op, std::uint32_t a, std::uint32_t b, std::uint32_t dst) {
        const std::uint64_t mark = alloc_.mark();
        if (op == HomOp::Add || op == HomOp::Sub) {
            for (unsigned p = 0; p < 2; ++p) {
                AddrVec va = layout_.poly_vec(a, p), vb = layout_.poly_vec(b, p),
                        vd = layout_.poly_vec(dst, p);
                if (op == HomOp::Add)
                    compile_poly_add(pb, va, vb, vd);
                else
                    compile_poly_sub(pb, va, vb, vd);
            }
        } else {
            emit_mult(pb, a, b, dst);
        }
        alloc_.release(mark);
    }

    /// HomMult per the scheme pipeline: four tensor products (one batch),
    /// c_y's pair summed, t/q rounded scaling on the raw tensor words,
    /// negacyclic fold, centered reduction, then digit-decomposed
    /// relinearization of c_z compiled from the same primitives.
    void emit_mult(ProgramBuilder& pb, std::uint32_t a, std::uint32_t b, std::uint32_t dst) {
        if (rlk0_.empty()) throw std::logic_error("hom mult: relinearization key not staged");
        if (dst == a || dst == b) throw std::invalid_argument("hom mult: destination must differ from operands");
        const unsigned n = params_.n, k = params_.k;
        const unsigned kp = k - params_.t_log2;
        const unsigned W = geo_.word_bits;
        check_mult_width();

        AddrVec a0 = layout_.poly_vec(a, 0), a1 = layout_.poly_vec(a, 1);
        AddrVec b0 = layout_.poly_vec(b, 0), b1 = layout_.poly_vec(b, 1);
        AddrVec d0 = layout_.poly_vec(dst, 0), d1 = layout_.poly_vec(dst, 1);

        auto& al = pb.scratch();
        AddrVec f00 = al.alloc(2 * n - 1), f01 = al.alloc(2 * n - 1), f10 = al.alloc(2 * n - 1),
                f11 = al.alloc(2 * n - 1);
        pb.vec_zero(f00);
        pb.vec_zero(f01);
        pb.vec_zero(f10);
        pb.vec_zero(f11);
        {
            std::vector<ProgramBuilder::KaraTask> tensor(4);
            tensor[0] = {a0, b0, f00, k, k, true};
            tensor[1] = {a0, b1, f01, k, k, true};
            tensor[2] = {a1, b0, f10, k, k, true};
            tensor[3] = {a1, b1, f11, k, k, true};
            pb.kara_batch(tensor);
        }
        pb.vec_add(f01, f10, f01);  // the c_y pair

        AddrVec cx = al.alloc(n), cy = al.alloc(n), cz = al.alloc(n);
        auto scaled_ring = [&](AddrSpan full, AddrSpan out) {
            pb.vec_scale_round(full, kp, W);
            pb.fold_negacyclic(full, out);
            pb.vec_mod_reduce(out, k);
        };
        scaled_ring(f00, cx);
        scaled_ring(f01, cy);
        scaled_ring(f11, cz);

        const unsigned ell = static_cast<unsigned>(rlk0_.size());
        std::vector<AddrVec> digits;
        for (unsigned j = 0; j < ell; ++j) digits.push_back(al.alloc(n));
        pb.extract_digits(cz, relin_w_, digits);

        AddrVec acc0 = al.alloc(2 * n - 1), acc1 = al.alloc(2 * n - 1);
        pb.vec_zero(acc0);
        pb.vec_zero(acc1);
        for (unsigned j = 0; j < ell; ++j) {
            const std::uint64_t m2 = al.mark();
            AddrVec t0 = al.alloc(2 * n - 1), t1 = al.alloc(2 * n - 1);
            pb.vec_zero(t0);
            pb.vec_zero(t1);
            std::vector<ProgramBuilder::KaraTask> pair(2);
            pair[0] = {digits[j], rlk0_[j], t0, relin_w_, k, true};
            pair[1] = {digits[j], rlk1_[j], t1, relin_w_, k, true};
            pb.kara_batch(pair);
            pb.vec_add(acc0, t0, acc0);
            pb.vec_add(acc1, t1, acc1);
            al.release(m2);
        }
        AddrVec rel0 = al.alloc(n), rel1 = al.alloc(n);
        pb.fold_negacyclic(acc0, rel0);
        pb.fold_negacyclic(acc1, rel1);
        pb.vec_add(cx, rel0, d0);
        pb.vec_mod_reduce(d0, k);
        pb.vec_add(cy, rel1, d1);
        pb.vec_mod_reduce(d1, k);
    }

    /// Raw tensor coefficients reach n * 2^(2k-2) plus recursion growth; the
    /// word width must also keep the t/q pattern scaling exact mod q.
    void check_mult_width() const {
        const unsigned need_mag = 2 * (params_.k + log2_n() + 1) + log2_n() + 2;
        const unsigned need_scale = params_.k + (params_.k - params_.t_log2) + 1;
        const unsigned need = std::max(need_mag, need_scale);
        if (geo_.word_bits < need)
            throw CapacityError("hom mult: word_bits too narrow for exact tensor intermediates", need,
                                geo_.word_bits);
    }
    unsigned log2_n() const {
        unsigned l = 0;
        while ((1u << (l + 1)) <= params_.n) ++l;
        return l;
    }

    void stage_poly(std::uint32_t idx, unsigned p, const RingPoly& poly) {
        for (unsigned z = 0; z < params_.n; ++z)
            bank_.write_slot(layout_.coeff_addr(idx, p, z), mod_pow2(poly.coeffs[z], geo_.word_bits));
    }

    RingPoly read_poly(std::uint32_t idx, unsigned p) const {
        RingPoly poly(params_.k, params_.n);
        for (unsigned z = 0; z < params_.n; ++z)
            poly.coeffs[z] = bank_.read_slot_centered(layout_.coeff_addr(idx, p, z), params_.k);
        return poly;
    }

    AddrVec stage_resident_poly(const RingPoly& poly) {
        AddrVec v = alloc_.alloc(params_.n);
        for (unsigned z = 0; z < params_.n; ++z)
            bank_.write_slot(v[z], mod_pow2(poly.coeffs[z], geo_.word_bits));
        return v;
    }

    ParamSet params_;
    BankGeometry geo_;
    CostModel cost_;
    bool record_;
    CimBank bank_;
    LayoutPlan layout_;
    ScratchAllocator alloc_;
    ConstPool pool_;
    std::uint32_t next_ct_ = 0;
    unsigned relin_w_ = 0;
    std::vector<AddrVec> rlk0_, rlk1_;
};

/// One-shot convenience wrapper: stages both ciphertexts (and the key for
/// Mult), runs the op, and returns the result with its trace.
inline std::pair<bfv::Ciphertext, StepTrace> run_hom_op(HomOp op, const bfv::Ciphertext& c1,
                                                        const bfv::Ciphertext& c2, const bfv::KeySet& keys,
                                                        const BankGeometry& g, const CostModel& cm,
                                                        bool record_steps = false) {
    HomMachine m(keys.params, g, cm, record_steps);
    if (op == HomOp::Mult) m.stage_rlk(keys);
    const std::uint32_t a = m.load_ciphertext(c1);
    const std::uint32_t b = m.load_ciphertext(c2);
    const std::uint32_t d = m.reserve_slot();
    StepTrace tr = m.run_op(op, a, b, d);
    unsigned lvl = std::max(c1.level_hint, c2.level_hint) + (op == HomOp::Mult ? 1 : 0);
    return {m.read_ciphertext(d, lvl), std::move(tr)};
}

}  // namespace pimhe::cim
