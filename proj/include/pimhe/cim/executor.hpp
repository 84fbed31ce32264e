#pragma once

#include "pimhe/cim/bank.hpp"
#include "pimhe/cim/cost.hpp"
#include "pimhe/cim/step.hpp"
#include "pimhe/cim/trace.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace pimhe::cim {

/// Executes step streams against one bank with cost accounting. Also serves
/// as the streaming sink for the compiler, so huge programs never need to be
/// materialized. Execution is deterministic; flag- and register-predicated
/// steps resolve against live machine state.
class Executor : public StepSink {
public:
    Executor(CimBank& bank, const CostModel& cm, bool record_steps = true)
        : bank_(bank), cost_(cm) {
        trace.record_steps = record_steps;
        if (bank.geometry().words_per_slot() > kMaxWords)
            throw std::invalid_argument("executor: word_bits too large");
    }

    StepTrace trace;
    const ConstPool* pool = nullptr;

    void run(const StepProgram& p) {
        pool = &p.pool;
        std::size_t next_mark = 0;
        for (const auto& s : p.steps) {
            emit(s);
            while (next_mark < p.landmarks.size() && p.landmarks[next_mark].step_index == index_ - 1) {
                const auto& lm = p.landmarks[next_mark];
                trace.landmark_values.emplace_back(lm.label, bank_.read_slot(lm.at));
                ++next_mark;
            }
        }
    }

    void emit(const Step& s) override {
        try {
            exec_step(s);
        } catch (const std::out_of_range& e) {
            throw std::runtime_error("step " + std::to_string(index_) + " (" + step_kind_name(s.kind) +
                                     "): " + e.what());
        }
        ++index_;
    }

    std::uint64_t steps_received() const override { return index_; }

    /// Fused execution of a Shift-Add batch with accounting identical to the
    /// generic expansion. Falls back to plain steps when recording, so
    /// recorded programs stay fully inspectable.
    void shift_add_batch(const ShiftAddBatch& b) override {
        if (trace.record_steps || b.jobs.empty()) {
            expand_shift_add(*this, b);
            return;
        }
        const unsigned ws = bank_.geometry().words_per_slot();
        std::uint32_t maxw = 0;
        for (const auto& j : b.jobs) maxw = std::max(maxw, j.width);
        add_lanes_.assign(maxw, 0);
        shift_lanes_.assign(maxw, 0);

        for (const auto& j : b.jobs) {
            std::uint64_t* ow = bank_.slot_ptr(j.array, j.out_row, j.slot);
            std::memset(ow, 0, ws * 8);
            std::uint64_t* bw = bank_.slot_ptr(j.array, j.b_row, j.slot);
            std::memcpy(bank_.reg_ptr(j.array), bw, ws * 8);
            std::array<std::uint64_t, kMaxWords> bcopy{};
            std::memcpy(bcopy.data(), bw, ws * 8);
            std::uint64_t* aw = bank_.slot_ptr(j.array, j.a_row, j.slot);
            // out, a' refreshed (via the latch path) on every step of the loop
            for (std::uint32_t i = 0; i < j.width; ++i) {
                ++shift_lanes_[i];
                if ((bcopy[i >> 6] >> (i & 63)) & 1) {
                    ++add_lanes_[i];
                    std::uint64_t carry = 0;
                    for (unsigned w = 0; w < ws; ++w) {
                        unsigned __int128 acc = (unsigned __int128)ow[w] + aw[w] + carry;
                        ow[w] = static_cast<std::uint64_t>(acc);
                        carry = static_cast<std::uint64_t>(acc >> 64);
                    }
                }
                std::uint64_t carry = 0;
                for (unsigned w = 0; w < ws; ++w) {
                    std::uint64_t nc = aw[w] >> 63;
                    aw[w] = (aw[w] << 1) | carry;
                    carry = nc;
                }
            }
            std::uint64_t* dw = bank_.slot_ptr(j.dst.array, j.dst.row, j.dst.slot);
            std::memmove(dw, bank_.slot_ptr(j.array, j.out_row, j.slot), ws * 8);
        }

        const auto lanes = static_cast<std::uint64_t>(b.jobs.size());
        trace.charge_wave(cost_, StepKind::StageConst, lanes);
        trace.charge_wave(cost_, StepKind::Read, lanes);
        for (std::uint32_t i = 0; i < maxw; ++i) {
            if (shift_lanes_[i] == 0) continue;
            // the predicated accumulate wave is scheduled whenever any job is
            // still iterating; only set-bit lanes execute and burn energy
            trace.charge_wave_start(cost_, StepKind::WordAdd);
            trace.charge_step_energy(cost_, StepKind::WordAdd, add_lanes_[i]);
            trace.charge_wave_start(cost_, StepKind::IpcbCopy);
            trace.charge_step_energy(cost_, StepKind::IpcbCopy, add_lanes_[i]);
            trace.charge_wave(cost_, StepKind::LogShift, shift_lanes_[i]);
            trace.charge_wave(cost_, StepKind::IpcbCopy, shift_lanes_[i]);
        }
        trace.charge_wave(cost_, StepKind::IpmbMove, lanes);
        index_ += std::uint64_t(2) * lanes;  // approximate stream position for diagnostics
    }

private:
    static constexpr unsigned kMaxWords = 64;

    bool reg_bit(std::uint32_t array, std::uint32_t bit) {
        const unsigned ws = bank_.geometry().words_per_slot();
        if (bit >= ws * 64) return false;
        return (bank_.reg_ptr(array)[bit >> 6] >> (bit & 63)) & 1;
    }

    void exec_step(const Step& s) {
        using namespace step_flags;
        bool exec = true;
        if (s.flags & kPredFlag) exec = bank_.flag(s.array);
        if ((s.flags & kPredReg) && exec) exec = reg_bit(s.array, s.imm);

        bool flag_after = false;
        std::uint64_t cyc = 0, en = 0;
        if (s.flags & kWaveFirst) {  // the wave slot is scheduled regardless of predication
            trace.charge_wave_start(cost_, s.kind);
            cyc = cost_.for_kind(s.kind).cycles;
        }
        if (exec) {
            flag_after = perform(s);
            trace.charge_step_energy(cost_, s.kind);
            en = cost_.for_kind(s.kind).energy_milli;
        }
        if (trace.record_steps) trace.records.push_back({s, exec, flag_after, cyc, en});
    }

    bool perform(const Step& s) {
        const auto& g = bank_.geometry();
        const unsigned ws = g.words_per_slot();
        const unsigned wr = g.words_per_row();
        switch (s.kind) {
            case StepKind::Read: {
                std::memcpy(bank_.reg_ptr(s.array), bank_.slot_ptr(s.array, s.row_a, s.slot), ws * 8);
                return false;
            }
            case StepKind::BitAnd:
            case StepKind::BitOr:
            case StepKind::BitXor: {
                const std::uint64_t* a = bank_.row_ptr(s.array, s.row_a);
                const std::uint64_t* b = bank_.row_ptr(s.array, s.row_b);
                std::uint64_t* l = bank_.latch_ptr(s.array);
                if (s.kind == StepKind::BitAnd)
                    for (unsigned i = 0; i < wr; ++i) l[i] = a[i] & b[i];
                else if (s.kind == StepKind::BitOr)
                    for (unsigned i = 0; i < wr; ++i) l[i] = a[i] | b[i];
                else
                    for (unsigned i = 0; i < wr; ++i) l[i] = a[i] ^ b[i];
                return false;
            }
            case StepKind::BitNot: {
                const std::uint64_t* a = bank_.row_ptr(s.array, s.row_a);
                std::uint64_t* l = bank_.latch_ptr(s.array);
                for (unsigned i = 0; i < wr; ++i) l[i] = ~a[i];
                return false;
            }
            case StepKind::HorizontalOr: {
                const std::uint64_t* l = bank_.latch_slot_ptr(s.array, s.slot);
                std::uint64_t acc = 0;
                for (unsigned i = 0; i < ws; ++i) acc |= l[i];
                bank_.set_flag(s.array, acc != 0);
                return acc != 0;
            }
            case StepKind::WordAdd: {
                const std::uint64_t* a = bank_.slot_ptr(s.array, s.row_a, s.slot);
                const std::uint64_t* b = bank_.slot_ptr(s.array, s.row_b, s.slot);
                std::uint64_t* l = bank_.latch_slot_ptr(s.array, s.slot);
                std::uint64_t carry = (s.flags & step_flags::kCarryIn) ? 1 : 0;
                for (unsigned i = 0; i < ws; ++i) {
                    unsigned __int128 acc = (unsigned __int128)a[i] + b[i] + carry;
                    l[i] = static_cast<std::uint64_t>(acc);
                    carry = static_cast<std::uint64_t>(acc >> 64);
                }
                return false;  // carry-out beyond word_bits is discarded
            }
            case StepKind::LogShift: {
                const ShiftMask m = ShiftMask::decode(static_cast<std::uint16_t>(s.imm));
                const int net = m.net_shift();
                const std::uint64_t* src = bank_.slot_ptr(s.array, s.row_a, s.slot);
                std::array<std::uint64_t, kMaxWords> tmp{};
                shift_words(src, tmp.data(), ws, net);
                std::memcpy(bank_.latch_slot_ptr(s.array, s.slot), tmp.data(), ws * 8);
                return false;
            }
            case StepKind::IpcbCopy: {
                std::memcpy(bank_.slot_ptr(s.array, s.row_d, s.slot), bank_.latch_slot_ptr(s.array, s.slot),
                            ws * 8);
                return false;
            }
            case StepKind::IpmbMove: {
                std::array<std::uint64_t, kMaxWords> tmp{};
                std::memcpy(tmp.data(), bank_.slot_ptr(s.array, s.row_a, s.slot), ws * 8);
                std::memcpy(bank_.slot_ptr(s.dst_array, s.row_d, s.dst_slot), tmp.data(), ws * 8);
                return false;
            }
            case StepKind::StageConst: {
                if (!pool) throw std::out_of_range("no const pool attached");
                const auto& pat = pool->pattern(s.imm);
                if (pat.size() != ws) throw std::out_of_range("const pattern width mismatch");
                if (s.flags & step_flags::kWholeRow) {
                    std::uint64_t* row = bank_.row_ptr(s.array, s.row_d);
                    for (unsigned sl = 0; sl < g.slots_per_row(); ++sl)
                        std::memcpy(row + std::size_t(sl) * ws, pat.data(), ws * 8);
                } else {
                    std::memcpy(bank_.slot_ptr(s.array, s.row_d, s.slot), pat.data(), ws * 8);
                }
                return false;
            }
            case StepKind::FlagBranch:
                return false;
            default:
                throw std::out_of_range("unknown step kind");
        }
    }

    static void shift_words(const std::uint64_t* src, std::uint64_t* dst, unsigned ws, int net) {
        if (net == 0) {
            std::memcpy(dst, src, ws * 8);
            return;
        }
        const bool left = net > 0;
        const unsigned amt = static_cast<unsigned>(left ? net : -net);
        const unsigned wshift = amt / 64, bshift = amt % 64;
        if (wshift >= ws) {
            std::memset(dst, 0, ws * 8);
            return;
        }
        if (left) {
            for (int i = static_cast<int>(ws) - 1; i >= 0; --i) {
                std::uint64_t v = 0;
                const int lo = i - static_cast<int>(wshift);
                if (lo >= 0) {
                    v = src[lo] << bshift;
                    if (bshift && lo > 0) v |= src[lo - 1] >> (64 - bshift);
                }
                dst[i] = v;
            }
        } else {
            for (unsigned i = 0; i < ws; ++i) {
                std::uint64_t v = 0;
                const unsigned hi = i + wshift;
                if (hi < ws) {
                    v = src[hi] >> bshift;
                    if (bshift && hi + 1 < ws) v |= src[hi + 1] << (64 - bshift);
                }
                dst[i] = v;
            }
        }
    }

    CimBank& bank_;
    const CostModel& cost_;
    std::uint64_t index_ = 0;
    std::vector<std::uint32_t> add_lanes_, shift_lanes_;
};

inline StepTrace execute(const StepProgram& p, CimBank& bank, const CostModel& cm, bool record = true) {
    Executor ex(bank, cm, record);
    ex.run(p);
    return std::move(ex.trace);
}

}  // namespace pimhe::cim
