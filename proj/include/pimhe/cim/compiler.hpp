#pragma once

#include "pimhe/bigint.hpp"
#include "pimhe/cim/cost.hpp"
#include "pimhe/cim/layout.hpp"
#include "pimhe/cim/step.hpp"

#include <algorithm>
#include <cassert>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pimhe::cim {

using AddrVec = std::vector<Addr>;
using AddrSpan = std::span<const Addr>;
using LaneIdx = std::vector<std::uint32_t>;

/// Bump allocator over the scratch-row slot pool, striped array-major so that
/// consecutive slots land on consecutive arrays (maximizing lockstep width).
/// Regions are freed in LIFO order via marks.
class ScratchAllocator {
public:
    ScratchAllocator(const BankGeometry& g, std::uint32_t first_pool_row) : geo_(g), row0_(first_pool_row) {
        const std::uint32_t rows = g.rows_M > first_pool_row ? g.rows_M - first_pool_row : 0;
        capacity_ = std::uint64_t(g.num_arrays) * g.slots_per_row() * rows;
    }

    std::uint64_t mark() const { return bump_; }
    void release(std::uint64_t m) { bump_ = m; }
    std::uint64_t free_slots() const { return capacity_ - bump_; }
    std::uint64_t capacity() const { return capacity_; }

    AddrVec alloc(std::uint64_t len) {
        if (bump_ + len > capacity_) throw CapacityError("scratch space exhausted", bump_ + len, capacity_);
        AddrVec v(len);
        const std::uint32_t a = geo_.num_arrays, c = geo_.slots_per_row();
        for (std::uint64_t i = 0; i < len; ++i) {
            const std::uint64_t g = bump_ + i;
            v[i].array = static_cast<std::uint32_t>(g % a);
            v[i].slot = static_cast<std::uint16_t>((g / a) % c);
            v[i].row = static_cast<std::uint16_t>(row0_ + g / (std::uint64_t(a) * c));
        }
        bump_ += len;
        return v;
    }

private:
    BankGeometry geo_;
    std::uint32_t row0_;
    std::uint64_t capacity_ = 0;
    std::uint64_t bump_ = 0;
};

/// Compiles polynomial primitives into step streams for one bank geometry.
/// Emission is pure: no machine state is read, and all data-dependent
/// behaviour goes through flag- or register-predicated steps. The same
/// builder drives a materializing collector or a live executor.
class ProgramBuilder {
public:
    /// First scratch row available for the slot pool; rows before it hold the
    /// staged constants, staging/relay rows, and Shift-Add station rows.
    static std::uint32_t first_pool_row(const BankGeometry& g) {
        const std::uint32_t scratch = g.rows_M - g.data_rows_Mprime;
        return scratch >= 6 ? g.data_rows_Mprime + 6 : g.rows_M;
    }

    ProgramBuilder(const BankGeometry& g, StepSink& sink, ConstPool& pool, unsigned modulus_bits,
                   ScratchAllocator* external_alloc = nullptr)
        : geo_(g), sink_(sink), pool_(pool), k_(modulus_bits) {
        g.validate();
        if (g.word_bits < modulus_bits + 1)
            throw std::invalid_argument("compiler: word_bits must exceed the modulus width");
        const std::uint32_t scratch = g.rows_M - g.data_rows_Mprime;
        if (scratch < 2) throw CapacityError("compiler: need at least 2 scratch rows", 2, scratch);
        s_const_ = static_cast<std::uint16_t>(g.data_rows_Mprime);
        s_stage_ = static_cast<std::uint16_t>(g.data_rows_Mprime + 1);
        if (scratch >= 6) {
            s_relay_ = static_cast<std::uint16_t>(g.data_rows_Mprime + 2);
            st_out_ = static_cast<std::uint16_t>(g.data_rows_Mprime + 3);
            st_a_ = static_cast<std::uint16_t>(g.data_rows_Mprime + 4);
            st_b_ = static_cast<std::uint16_t>(g.data_rows_Mprime + 5);
        }
        pool_row0_ = first_pool_row(g);
        if (external_alloc) {
            alloc_ext_ = external_alloc;
        } else {
            alloc_own_.emplace(g, pool_row0_);
            alloc_ext_ = &*alloc_own_;
        }
        gate_.assign(std::size_t(g.num_arrays) * g.slots_per_row(), 0);
        zero_id_ = pool_.intern(BigInt(0), g.words_per_slot());
    }

    ScratchAllocator& scratch() { return *alloc_ext_; }
    std::uint32_t zero_const() const { return zero_id_; }
    unsigned modulus_bits() const { return k_; }

    // ---- vector primitives --------------------------------------------------

    void vec_zero(AddrSpan v) {
        run_by_slotkey(v, [&](const LaneIdx& ord, std::size_t lo, std::size_t hi) {
            begin_wave();
            for (std::size_t i = lo; i < hi; ++i) {
                const Addr& at = v[ord[i]];
                Step s = base(StepKind::StageConst, at.array);
                s.row_d = at.row;
                s.slot = at.slot;
                s.imm = zero_id_;
                put(s);
            }
        });
    }

    void vec_copy(AddrSpan src, AddrSpan dst) {
        assert(src.size() == dst.size());
        run_by_slotkey(src, [&](const LaneIdx& ord, std::size_t lo, std::size_t hi) {
            begin_wave();
            for (std::size_t i = lo; i < hi; ++i) put(move_step(src[ord[i]], dst[ord[i]]));
        });
    }

    /// out[i] = a[i] + b[i] (word-truncated); optional carry-in realizes the
    /// two's-complement subtraction path when b is pre-inverted.
    void vec_add(AddrSpan a, AddrSpan b, AddrSpan out, bool carry_in = false) {
        assert(a.size() == b.size() && a.size() == out.size());
        run_by_slotkey(a, [&](const LaneIdx& ord, std::size_t lo, std::size_t hi) {
            auto staged = [&](std::size_t i) {
                return !aligned(a[ord[i]], b[ord[i]]) || a[ord[i]].row == b[ord[i]].row;
            };
            bool any = false;
            for (std::size_t i = lo; i < hi; ++i) {
                if (!staged(i)) continue;
                if (!any) {
                    begin_wave();
                    any = true;
                }
                const Addr& ai = a[ord[i]];
                put(move_step(b[ord[i]], {ai.array, s_stage_, ai.slot}));
            }
            begin_wave();
            for (std::size_t i = lo; i < hi; ++i) {
                const Addr& ai = a[ord[i]];
                Step s = base(StepKind::WordAdd, ai.array);
                s.row_a = ai.row;
                s.row_b = staged(i) ? s_stage_ : b[ord[i]].row;
                s.slot = ai.slot;
                if (carry_in) s.flags |= step_flags::kCarryIn;
                put(s);
            }
            writeback(a, out, ord, lo, hi);
        });
    }

    /// out[i] = a[i] - b[i] via the two-step procedure: invert the subtrahend
    /// with the sense amplifier, then add with carry-in 1.
    void vec_sub(AddrSpan a, AddrSpan b, AddrSpan out) {
        assert(a.size() == b.size() && a.size() == out.size());
        run_by_array(a, [&](const LaneIdx& ord, std::size_t lo, std::size_t hi) {
            bool any = false;
            for (std::size_t i = lo; i < hi; ++i) {
                if (aligned(a[ord[i]], b[ord[i]])) continue;
                if (!any) {
                    begin_wave();
                    any = true;
                }
                const Addr& ai = a[ord[i]];
                put(move_step(b[ord[i]], {ai.array, s_stage_, ai.slot}));
            }
            begin_wave();
            for (std::size_t i = lo; i < hi; ++i) {  // ~subtrahend
                const Addr& ai = a[ord[i]];
                Step s = base(StepKind::BitNot, ai.array);
                s.row_a = aligned(ai, b[ord[i]]) ? b[ord[i]].row : s_stage_;
                put(s);
            }
            begin_wave();
            for (std::size_t i = lo; i < hi; ++i) {
                const Addr& ai = a[ord[i]];
                Step s = base(StepKind::IpcbCopy, ai.array);
                s.row_d = s_stage_;
                s.slot = ai.slot;
                put(s);
            }
            begin_wave();
            for (std::size_t i = lo; i < hi; ++i) {
                const Addr& ai = a[ord[i]];
                Step s = base(StepKind::WordAdd, ai.array);
                s.row_a = ai.row;
                s.row_b = s_stage_;
                s.slot = ai.slot;
                s.flags |= step_flags::kCarryIn;
                put(s);
            }
            writeback(a, out, ord, lo, hi);
        });
    }

    /// Centered reduction mod 2^k of every lane, in place: truncate to the
    /// canonical k-bit residue, test the (k-1)th bit through the horizontal
    /// OR, and subtract q where the flag is raised.
    void vec_mod_reduce(AddrSpan v, unsigned k) {
        const BigInt lowmask = pow2(k) - 1;
        const BigInt bitmask = pow2(k - 1);
        const BigInt negq = mod_pow2(-pow2(k), geo_.word_bits);
        run_by_array(v, [&](const LaneIdx& ord, std::size_t lo, std::size_t hi) {
            stage_pattern(s_const_, lowmask, v, ord, lo, hi);
            sense_with_const(StepKind::BitAnd, v, ord, lo, hi);
            copy_latch_inplace(v, ord, lo, hi);
            stage_pattern(s_const_, bitmask, v, ord, lo, hi);
            sense_with_const(StepKind::BitAnd, v, ord, lo, hi);
            stage_pattern(s_const_, negq, v, ord, lo, hi);
            flag_conditional_add(v, ord, lo, hi, /*carry_in=*/false);
        });
    }

    /// Rounded scaling by 2^k_prime, in place. `canon_width` is the width of
    /// the canonical bit pattern being divided (the modulus width for the
    /// standalone primitive; the full word for raw tensor coefficients).
    void vec_scale_round(AddrSpan v, unsigned k_prime, unsigned canon_width) {
        if (k_prime == 0) return;
        if (k_prime > canon_width) throw std::invalid_argument("scale: k' out of range");
        const auto rounds = greedy_shift_rounds(k_prime);
        const BigInt bitmask = pow2(k_prime - 1);
        run_by_array(v, [&](const LaneIdx& ord, std::size_t lo, std::size_t hi) {
            if (canon_width < geo_.word_bits) {
                stage_pattern(s_const_, pow2(canon_width) - 1, v, ord, lo, hi);
                sense_with_const(StepKind::BitAnd, v, ord, lo, hi);
                copy_latch_inplace(v, ord, lo, hi);
            }
            // snapshot the dividend; its low bits are the remainder
            stage_pattern(s_const_, BigInt(0), v, ord, lo, hi);
            sense_with_const(StepKind::BitOr, v, ord, lo, hi);
            begin_wave();
            for (std::size_t i = lo; i < hi; ++i) {
                const Addr& at = v[ord[i]];
                Step s = base(StepKind::IpcbCopy, at.array);
                s.row_d = s_stage_;
                s.slot = at.slot;
                put(s);
            }
            for (const auto& m : rounds) {
                begin_wave();
                for (std::size_t i = lo; i < hi; ++i) {
                    const Addr& at = v[ord[i]];
                    Step s = base(StepKind::LogShift, at.array);
                    s.row_a = at.row;
                    s.slot = at.slot;
                    s.imm = m.encode();
                    put(s);
                }
                copy_latch_inplace(v, ord, lo, hi);
            }
            // rounding flag from the snapshot's bit k'-1, then +1 where set
            stage_pattern(s_const_, bitmask, v, ord, lo, hi);
            begin_wave();
            for (std::size_t i = lo; i < hi; ++i) {
                const Addr& at = v[ord[i]];
                Step s = base(StepKind::BitAnd, at.array);
                s.row_a = s_stage_;
                s.row_b = s_const_;
                put(s);
            }
            stage_pattern(s_const_, BigInt(0), v, ord, lo, hi);
            flag_conditional_add(v, ord, lo, hi, /*carry_in=*/true);
        });
    }

    /// out[i] = v[i] & pattern.
    void vec_and_pattern(AddrSpan v, const BigInt& pattern, AddrSpan out) {
        assert(v.size() == out.size());
        run_by_array(v, [&](const LaneIdx& ord, std::size_t lo, std::size_t hi) {
            stage_pattern(s_const_, pattern, v, ord, lo, hi);
            sense_with_const(StepKind::BitAnd, v, ord, lo, hi);
            writeback(v, out, ord, lo, hi);
        });
    }

    /// In-place logical shift of every lane by `amount` (multi-round).
    void vec_shift_inplace(AddrSpan v, unsigned amount, bool left) {
        for (const auto& m : greedy_shift_rounds(amount, left)) {
            run_by_slotkey(v, [&](const LaneIdx& ord, std::size_t lo, std::size_t hi) {
                begin_wave();
                for (std::size_t i = lo; i < hi; ++i) {
                    const Addr& at = v[ord[i]];
                    Step s = base(StepKind::LogShift, at.array);
                    s.row_a = at.row;
                    s.slot = at.slot;
                    s.imm = m.encode();
                    put(s);
                }
                copy_latch_inplace(v, ord, lo, hi);
            });
        }
    }

    // ---- base-case multiplication --------------------------------------------

    struct LeafJob {
        Addr a;                   // multiplicand source
        Addr b;                   // multiplier source (read into the controller)
        Addr dst;                 // product destination
        std::uint32_t width = 0;  // multiplier magnitude bits
        bool signed_operands = false;
        bool b_is_const = false;  // multiplier staged from the const pool instead of moved
        std::uint32_t b_pool = 0;
    };

    /// Bit-serial products dst = a*b mod 2^W. Stations live in the destination
    /// arrays; jobs colliding on an array run in successive batches. Signed
    /// operands are handled by flag-predicated negation of both inputs when
    /// the multiplier is negative, which leaves the product unchanged and
    /// makes the multiplier's magnitude bits sufficient.
    void shift_add_products(std::vector<LeafJob> jobs) {
        require_stations();
        std::stable_sort(jobs.begin(), jobs.end(),
                         [](const LeafJob& x, const LeafJob& y) { return x.dst.array < y.dst.array; });
        std::vector<LeafJob> pending = std::move(jobs);
        while (!pending.empty()) {
            std::vector<LeafJob> deferred;
            std::vector<LeafJob> picked;
            std::uint32_t last_array = UINT32_MAX;
            for (auto& j : pending) {
                if (j.dst.array == last_array) {
                    deferred.push_back(j);
                } else {
                    last_array = j.dst.array;
                    picked.push_back(j);
                }
            }
            begin_wave();
            for (const auto& j : picked) put(move_step(j.a, {j.dst.array, st_a_, j.dst.slot}));
            begin_wave();
            for (const auto& j : picked) {
                if (j.b_is_const) {
                    Step s = base(StepKind::StageConst, j.dst.array);
                    s.row_d = st_b_;
                    s.slot = j.dst.slot;
                    s.imm = j.b_pool;
                    put(s);
                } else {
                    put(move_step(j.b, {j.dst.array, st_b_, j.dst.slot}));
                }
            }

            bool any_signed = false;
            for (const auto& j : picked) any_signed |= j.signed_operands;
            if (any_signed) sign_normalize(picked);

            ShiftAddBatch batch;
            batch.zero_pool_id = zero_id_;
            for (const auto& j : picked) {
                ShiftAddBatch::Job bj;
                bj.array = j.dst.array;
                bj.out_row = st_out_;
                bj.a_row = st_a_;
                bj.b_row = st_b_;
                bj.slot = j.dst.slot;
                bj.dst = j.dst;
                bj.width = j.width;
                batch.jobs.push_back(bj);
            }
            sink_.shift_add_batch(batch);
            pending = std::move(deferred);
        }
    }

    // ---- Karatsuba ------------------------------------------------------------

    struct KaraTask {
        AddrSpan a, b;  // equal length n
        AddrSpan out;   // length 2n-1, zero-initialized
        std::uint32_t width_a = 0, width_b = 0;  // operand magnitude bits
        bool signed_operands = true;
    };

    /// Recursive polynomial Karatsuba over a batch of independent tasks.
    /// Every task splits at n/2; the half-size products of all tasks join the
    /// same lockstep waves. When the scratch pool cannot hold a whole level,
    /// the batch is processed in chunks, serializing the deeper recursion
    /// instead of parallelizing it.
    void kara_batch(const std::vector<KaraTask>& tasks) {
        if (tasks.empty()) return;
        const std::size_t n = tasks[0].a.size();
        for (const auto& t : tasks) {
            assert(t.a.size() == n && t.b.size() == n && t.out.size() == 2 * n - 1);
            (void)t;
        }
        if (n == 1) {
            std::vector<LeafJob> jobs;
            jobs.reserve(tasks.size());
            for (const auto& t : tasks) {
                LeafJob j;
                const bool b_narrow = t.width_b <= t.width_a;
                j.a = b_narrow ? t.a[0] : t.b[0];
                j.b = b_narrow ? t.b[0] : t.a[0];
                j.width = b_narrow ? t.width_b : t.width_a;
                j.dst = t.out[0];
                j.signed_operands = t.signed_operands;
                jobs.push_back(j);
            }
            shift_add_products(std::move(jobs));
            return;
        }
        const std::size_t h = n / 2;
        const std::uint64_t per_task = 2 * h + (n - 1);
        std::size_t pos = 0;
        while (pos < tasks.size()) {
            const std::uint64_t budget = alloc_ext_->free_slots() / 2;  // headroom for deeper levels
            std::size_t chunk = budget > per_task ? static_cast<std::size_t>(budget / per_task) : 1;
            chunk = std::min(chunk, tasks.size() - pos);
            const std::uint64_t mark = alloc_ext_->mark();

            struct NodeScratch {
                AddrVec sum_a, sum_b, r1;
            };
            std::vector<NodeScratch> scratch(chunk);
            for (auto& ns : scratch) {
                ns.sum_a = alloc_ext_->alloc(h);
                ns.sum_b = alloc_ext_->alloc(h);
                ns.r1 = alloc_ext_->alloc(n - 1);
            }
            for (std::size_t t = 0; t < chunk; ++t) {
                const KaraTask& task = tasks[pos + t];
                NodeScratch& ns = scratch[t];
                vec_add(task.a.subspan(0, h), task.a.subspan(h, h), ns.sum_a);
                vec_add(task.b.subspan(0, h), task.b.subspan(h, h), ns.sum_b);
                vec_zero(ns.r1);
            }
            std::vector<KaraTask> children;
            children.reserve(3 * chunk);
            for (std::size_t t = 0; t < chunk; ++t) {
                const KaraTask& task = tasks[pos + t];
                NodeScratch& ns = scratch[t];
                KaraTask high;  // R2
                high.a = task.a.subspan(h, h);
                high.b = task.b.subspan(h, h);
                high.out = task.out.subspan(n, n - 1);
                high.width_a = task.width_a;
                high.width_b = task.width_b;
                high.signed_operands = task.signed_operands;
                KaraTask low = high;  // R3
                low.a = task.a.subspan(0, h);
                low.b = task.b.subspan(0, h);
                low.out = task.out.subspan(0, n - 1);
                KaraTask mid = high;  // R1 on the half sums
                mid.a = ns.sum_a;
                mid.b = ns.sum_b;
                mid.out = ns.r1;
                mid.width_a = task.width_a + 1;
                mid.width_b = task.width_b + 1;
                children.push_back(high);
                children.push_back(low);
                children.push_back(mid);
            }
            kara_batch(children);
            for (std::size_t t = 0; t < chunk; ++t) {
                const KaraTask& task = tasks[pos + t];
                NodeScratch& ns = scratch[t];
                vec_sub(ns.r1, task.out.subspan(0, n - 1), ns.r1);  // R1 - R3
                vec_sub(ns.r1, task.out.subspan(n, n - 1), ns.r1);  // (R1 - R3) - R2
                vec_add(task.out.subspan(h, n - 1), ns.r1, task.out.subspan(h, n - 1));
            }
            alloc_ext_->release(mark);
            pos += chunk;
        }
    }

    /// Ring product of two n-coefficient polynomials: full Karatsuba product,
    /// negacyclic fold, centered reduction. Output lanes must be distinct
    /// from the inputs.
    void poly_mult(AddrSpan a, AddrSpan b, AddrSpan out, unsigned width_a, unsigned width_b) {
        const std::size_t n = a.size();
        const std::uint64_t mark = alloc_ext_->mark();
        AddrVec full = alloc_ext_->alloc(2 * n - 1);
        vec_zero(full);
        KaraTask t;
        t.a = a;
        t.b = b;
        t.out = full;
        t.width_a = width_a;
        t.width_b = width_b;
        kara_batch({t});
        fold_negacyclic(full, out);
        vec_mod_reduce(out, k_);
        alloc_ext_->release(mark);
    }

    /// res[j] = full[j] - full[j+n] (X^n == -1); res length n, full 2n-1.
    void fold_negacyclic(AddrSpan full, AddrSpan res) {
        const std::size_t n = res.size();
        assert(full.size() == 2 * n - 1);
        vec_copy(full.subspan(0, n), res);
        if (n > 1) vec_sub(res.subspan(0, n - 1), full.subspan(n, n - 1), res.subspan(0, n - 1));
    }

    // ---- integer Karatsuba (single coefficient pair) ---------------------------

    /// One coefficient product decomposed at the bit level: split both
    /// operands at half the split width, compute the three half products (the
    /// base case runs the bit-serial Shift-Add), then recombine with left
    /// shifts and adds. `op_bits` is the actual operand width (the sums feed
    /// recursion with one extra bit). Landmarks label the slots that hold the
    /// intermediate products so replays can be checked bit by bit.
    void karatsuba_int(Addr a, Addr b, unsigned split_width, unsigned op_bits, unsigned threshold, Addr out,
                       std::vector<Landmark>* landmarks, const std::string& prefix = "") {
        require_stations();
        if (split_width <= threshold) {
            LeafJob j;
            j.a = a;
            j.b = b;
            j.dst = out;
            j.width = op_bits;
            shift_add_products({j});
            return;
        }
        const unsigned half = split_width / 2;
        const std::uint64_t mark = alloc_ext_->mark();
        AddrVec lo_a = alloc_ext_->alloc(1), hi_a = alloc_ext_->alloc(1);
        AddrVec lo_b = alloc_ext_->alloc(1), hi_b = alloc_ext_->alloc(1);
        AddrVec sum_a = alloc_ext_->alloc(1), sum_b = alloc_ext_->alloc(1);
        AddrVec r1 = alloc_ext_->alloc(1), r2 = alloc_ext_->alloc(1), r3 = alloc_ext_->alloc(1);

        // (a) split; the high halves are aligned down to the low positions
        AddrVec av{a}, bv{b};
        vec_and_pattern(av, pow2(half) - 1, lo_a);
        vec_and_pattern(bv, pow2(half) - 1, lo_b);
        vec_copy(av, hi_a);
        vec_copy(bv, hi_b);
        vec_shift_inplace(hi_a, half, /*left=*/false);
        vec_shift_inplace(hi_b, half, /*left=*/false);
        // (b) Low + High sums
        vec_add(lo_a, hi_a, sum_a);
        vec_add(lo_b, hi_b, sum_b);
        // (c) R1 on the sums, then (d) R2 and R3 in one parallel batch
        const unsigned child_ops = op_bits - (split_width - half) + 1;
        karatsuba_int(sum_a[0], sum_b[0], half, child_ops, threshold, r1[0], landmarks, prefix + "R1.");
        if (landmarks) landmarks->push_back({prefix + "R1", mark_index(), r1[0]});
        if (half <= threshold) {
            LeafJob j2, j3;
            j2.a = hi_a[0];
            j2.b = hi_b[0];
            j2.dst = r2[0];
            j2.width = op_bits - half;
            j3.a = lo_a[0];
            j3.b = lo_b[0];
            j3.dst = r3[0];
            j3.width = half;
            shift_add_products({j2, j3});
        } else {
            karatsuba_int(hi_a[0], hi_b[0], half, op_bits - half, threshold, r2[0], landmarks, prefix + "R2.");
            karatsuba_int(lo_a[0], lo_b[0], half, half, threshold, r3[0], landmarks, prefix + "R3.");
        }
        if (landmarks) {
            landmarks->push_back({prefix + "R2", mark_index(), r2[0]});
            landmarks->push_back({prefix + "R3", mark_index(), r3[0]});
        }
        // (e)/(f) R1 - R3, then - R2
        vec_sub(r1, r3, r1);
        vec_sub(r1, r2, r1);
        if (landmarks) landmarks->push_back({prefix + "R1-R2-R3", mark_index(), r1[0]});
        // (g) shift R1 by nk = half bits, R2 by 2nk
        vec_shift_inplace(r1, half, /*left=*/true);
        vec_shift_inplace(r2, 2 * half, /*left=*/true);
        // (h)/(i) recombine
        vec_add(r2, r1, r2);
        AddrVec ov{out};
        vec_add(r2, r3, ov);
        if (landmarks) landmarks->push_back({prefix + "product", mark_index(), out});
        alloc_ext_->release(mark);
    }

    // ---- digit decomposition ----------------------------------------------------

    /// Base-2^w digits of the canonical k-bit residues of src: digit j holds
    /// bits [w*j, w*(j+1)). Digits are non-negative, at most w bits wide.
    void extract_digits(AddrSpan src, unsigned w, const std::vector<AddrVec>& digits) {
        for (std::size_t j = 0; j < digits.size(); ++j) {
            AddrSpan d = digits[j];
            vec_copy(src, d);
            vec_and_pattern(d, pow2(k_) - 1, d);  // canonical residue
            if (w * j > 0) vec_shift_inplace(d, static_cast<unsigned>(w * j), /*left=*/false);
            vec_and_pattern(d, pow2(w) - 1, d);
        }
    }

private:
    // ---- emission plumbing ---------------------------------------------------

    Step base(StepKind k, std::uint32_t array) {
        Step s;
        s.kind = k;
        s.array = array;
        if (wave_pending_) {
            s.flags |= step_flags::kWaveFirst;
            wave_pending_ = false;
        }
        return s;
    }

    void begin_wave() { wave_pending_ = true; }
    void put(const Step& s) { sink_.emit(s); }
    std::size_t mark_index() const {
        const std::uint64_t n = sink_.steps_received();
        return n == 0 ? 0 : static_cast<std::size_t>(n - 1);
    }

    Step move_step(const Addr& src, const Addr& dst) {
        Step s = base(StepKind::IpmbMove, src.array);
        s.row_a = src.row;
        s.slot = src.slot;
        s.dst_array = dst.array;
        s.row_d = dst.row;
        s.dst_slot = dst.slot;
        return s;
    }

    std::uint64_t slot_key(const Addr& a) const {
        return std::uint64_t(a.array) * geo_.slots_per_row() + a.slot;
    }

    bool aligned(const Addr& x, const Addr& y) const { return x.array == y.array && x.slot == y.slot; }

    void require_stations() const {
        if (st_out_ == UINT16_MAX)
            throw CapacityError("compiler: geometry lacks the scratch rows for coefficient multiplication", 6,
                                geo_.rows_M - geo_.data_rows_Mprime);
    }

    /// Identity lane order; runs split when an (array, slot) key repeats.
    template <class RunFn>
    void run_by_slotkey(AddrSpan v, RunFn run) {
        order_.resize(v.size());
        for (std::uint32_t i = 0; i < v.size(); ++i) order_[i] = i;
        for_runs(v, order_, [&](const Addr& at) { return slot_key(at); }, run);
    }

    /// Slot-major lane order (all slot-0 lanes, then slot-1, ...) so that
    /// array-keyed passes see runs of distinct arrays even for row-major
    /// ciphertext layouts; runs split when an array repeats.
    template <class RunFn>
    void run_by_array(AddrSpan v, RunFn run) {
        const std::uint32_t c = geo_.slots_per_row();
        order_.clear();
        order_.reserve(v.size());
        for (std::uint32_t s = 0; s < c; ++s)
            for (std::uint32_t i = 0; i < v.size(); ++i)
                if (v[i].slot == s) order_.push_back(i);
        for_runs(v, order_, [&](const Addr& at) { return std::uint64_t(at.array); }, run);
    }

    template <class KeyFn, class RunFn>
    void for_runs(AddrSpan v, const LaneIdx& order, KeyFn key, RunFn run) {
        if (order.empty()) return;
        ++gen_;
        std::size_t lo = 0;
        for (std::size_t i = 0; i < order.size(); ++i) {
            const std::uint64_t k = key(v[order[i]]) % gate_.size();
            if (gate_[static_cast<std::size_t>(k)] == gen_) {
                run(order, lo, i);
                lo = i;
                ++gen_;
            }
            gate_[static_cast<std::size_t>(k)] = gen_;
        }
        run(order, lo, order.size());
    }

    /// Stage a word pattern into `row` of every array touched by the run.
    void stage_pattern(std::uint16_t row, const BigInt& pattern, AddrSpan v, const LaneIdx& ord,
                       std::size_t lo, std::size_t hi) {
        const std::uint32_t id = pool_.intern(pattern, geo_.words_per_slot());
        std::uint32_t a_min = UINT32_MAX, a_max = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            a_min = std::min(a_min, v[ord[i]].array);
            a_max = std::max(a_max, v[ord[i]].array);
        }
        if (stage_cache_id_ == id && stage_cache_row_ == row && a_min >= stage_cache_lo_ &&
            a_max < stage_cache_hi_)
            return;
        begin_wave();
        for (std::uint32_t a = a_min; a <= a_max; ++a) {
            Step s = base(StepKind::StageConst, a);
            s.row_d = row;
            s.flags |= step_flags::kWholeRow;
            s.imm = id;
            put(s);
        }
        stage_cache_id_ = id;
        stage_cache_row_ = row;
        stage_cache_lo_ = a_min;
        stage_cache_hi_ = a_max + 1;
    }

    void sense_with_const(StepKind kind, AddrSpan v, const LaneIdx& ord, std::size_t lo, std::size_t hi) {
        begin_wave();
        for (std::size_t i = lo; i < hi; ++i) {
            const Addr& at = v[ord[i]];
            Step s = base(kind, at.array);
            s.row_a = at.row;
            s.row_b = s_const_;
            put(s);
        }
    }

    void copy_latch_inplace(AddrSpan v, const LaneIdx& ord, std::size_t lo, std::size_t hi) {
        begin_wave();
        for (std::size_t i = lo; i < hi; ++i) {
            const Addr& at = v[ord[i]];
            Step s = base(StepKind::IpcbCopy, at.array);
            s.row_d = at.row;
            s.slot = at.slot;
            put(s);
        }
    }

    /// Latch slot -> out lane, with a relay row when the destination column
    /// differs from the latch column.
    void writeback(AddrSpan at, AddrSpan out, const LaneIdx& ord, std::size_t lo, std::size_t hi) {
        bool any_relay = false;
        for (std::size_t i = lo; i < hi; ++i)
            if (!aligned(at[ord[i]], out[ord[i]])) any_relay = true;
        if (any_relay && s_relay_ == UINT16_MAX)
            throw CapacityError("compiler: geometry lacks a relay scratch row for misaligned outputs", 3,
                                geo_.rows_M - geo_.data_rows_Mprime);
        begin_wave();
        for (std::size_t i = lo; i < hi; ++i) {
            const Addr& ai = at[ord[i]];
            Step s = base(StepKind::IpcbCopy, ai.array);
            s.row_d = aligned(ai, out[ord[i]]) ? out[ord[i]].row : s_relay_;
            s.slot = ai.slot;
            put(s);
        }
        if (any_relay) {
            begin_wave();
            for (std::size_t i = lo; i < hi; ++i) {
                const Addr& ai = at[ord[i]];
                if (aligned(ai, out[ord[i]])) continue;
                put(move_step({ai.array, s_relay_, ai.slot}, out[ord[i]]));
            }
        }
    }

    /// Horizontal-OR of the latch slot per lane, a controller branch, then a
    /// flag-predicated add of the staged constant row (with optional carry).
    void flag_conditional_add(AddrSpan v, const LaneIdx& ord, std::size_t lo, std::size_t hi, bool carry_in) {
        begin_wave();
        for (std::size_t i = lo; i < hi; ++i) {
            const Addr& at = v[ord[i]];
            Step s = base(StepKind::HorizontalOr, at.array);
            s.slot = at.slot;
            put(s);
        }
        begin_wave();
        for (std::size_t i = lo; i < hi; ++i) put(base(StepKind::FlagBranch, v[ord[i]].array));
        begin_wave();
        for (std::size_t i = lo; i < hi; ++i) {
            const Addr& at = v[ord[i]];
            Step s = base(StepKind::WordAdd, at.array);
            s.flags |= step_flags::kPredFlag;
            if (carry_in) s.flags |= step_flags::kCarryIn;
            s.row_a = at.row;
            s.row_b = s_const_;
            s.slot = at.slot;
            put(s);
        }
        begin_wave();
        for (std::size_t i = lo; i < hi; ++i) {
            const Addr& at = v[ord[i]];
            Step s = base(StepKind::IpcbCopy, at.array);
            s.flags |= step_flags::kPredFlag;
            s.row_d = at.row;
            s.slot = at.slot;
            put(s);
        }
    }

    /// Negate multiplicand and multiplier (two's complement, flag-predicated)
    /// wherever the multiplier's sign bit is set.
    void sign_normalize(const std::vector<LeafJob>& picked) {
        const BigInt signmask = pow2(geo_.word_bits - 1);
        AddrVec bstat, astat;
        for (const auto& j : picked) {
            bstat.push_back({j.dst.array, st_b_, j.dst.slot});
            astat.push_back({j.dst.array, st_a_, j.dst.slot});
        }
        LaneIdx ord(bstat.size());
        for (std::uint32_t i = 0; i < ord.size(); ++i) ord[i] = i;
        AddrSpan bs = bstat;
        stage_pattern(s_const_, signmask, bs, ord, 0, bs.size());
        sense_with_const(StepKind::BitAnd, bs, ord, 0, bs.size());
        begin_wave();
        for (const auto& a : bstat) {
            Step s = base(StepKind::HorizontalOr, a.array);
            s.slot = a.slot;
            put(s);
        }
        begin_wave();
        for (const auto& a : bstat) put(base(StepKind::FlagBranch, a.array));
        stage_pattern(s_const_, BigInt(0), bs, ord, 0, bs.size());
        negate_where_flagged(bstat);
        negate_where_flagged(astat);
    }

    void negate_where_flagged(const AddrVec& rows) {
        begin_wave();
        for (const auto& a : rows) {  // ~x
            Step s = base(StepKind::BitNot, a.array);
            s.flags |= step_flags::kPredFlag;
            s.row_a = a.row;
            put(s);
        }
        begin_wave();
        for (const auto& a : rows) {
            Step s = base(StepKind::IpcbCopy, a.array);
            s.flags |= step_flags::kPredFlag;
            s.row_d = a.row;
            s.slot = a.slot;
            put(s);
        }
        begin_wave();
        for (const auto& a : rows) {  // +1 (the staged constant row holds zero)
            Step s = base(StepKind::WordAdd, a.array);
            s.flags |= step_flags::kPredFlag | step_flags::kCarryIn;
            s.row_a = a.row;
            s.row_b = s_const_;
            s.slot = a.slot;
            put(s);
        }
        begin_wave();
        for (const auto& a : rows) {
            Step s = base(StepKind::IpcbCopy, a.array);
            s.flags |= step_flags::kPredFlag;
            s.row_d = a.row;
            s.slot = a.slot;
            put(s);
        }
    }

    BankGeometry geo_;
    StepSink& sink_;
    ConstPool& pool_;
    unsigned k_;
    std::uint16_t s_const_ = UINT16_MAX, s_stage_ = UINT16_MAX, s_relay_ = UINT16_MAX;
    std::uint16_t st_out_ = UINT16_MAX, st_a_ = UINT16_MAX, st_b_ = UINT16_MAX;
    std::uint32_t pool_row0_ = 0;
    std::optional<ScratchAllocator> alloc_own_;
    ScratchAllocator* alloc_ext_ = nullptr;
    std::uint32_t zero_id_ = 0;

    bool wave_pending_ = false;
    std::vector<std::uint32_t> gate_;
    std::uint32_t gen_ = 0;
    LaneIdx order_;
    std::uint32_t stage_cache_id_ = UINT32_MAX;
    std::uint16_t stage_cache_row_ = UINT16_MAX;
    std::uint32_t stage_cache_lo_ = 0, stage_cache_hi_ = 0;
};

}  // namespace pimhe::cim
