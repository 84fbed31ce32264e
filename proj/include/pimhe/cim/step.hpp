#pragma once

#include "pimhe/bigint.hpp"
#include "pimhe/cim/bank.hpp"
#include "pimhe/cim/cost.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace pimhe::cim {

/// 5-level logarithmic shifter selection. Levels shift by 64, 32, 16, 4, 1
/// bits; each level is left, right or inactive, and one net shift is applied
/// per charged round.
struct ShiftMask {
    enum Sel : std::uint8_t { None = 0, Left = 1, Right = 2 };
    static constexpr std::array<int, 5> kMagnitudes = {64, 32, 16, 4, 1};
    std::array<Sel, 5> levels{None, None, None, None, None};

    int net_shift() const {  // positive = left
        int s = 0;
        for (int i = 0; i < 5; ++i) {
            if (levels[i] == Left) s += kMagnitudes[i];
            if (levels[i] == Right) s -= kMagnitudes[i];
        }
        return s;
    }

    std::uint16_t encode() const {
        std::uint16_t v = 0;
        for (int i = 0; i < 5; ++i) v |= static_cast<std::uint16_t>(levels[i]) << (2 * i);
        return v;
    }
    static ShiftMask decode(std::uint16_t v) {
        ShiftMask m;
        for (int i = 0; i < 5; ++i) {
            auto sel = (v >> (2 * i)) & 0x3;
            if (sel == 3) throw std::invalid_argument("shift mask: invalid level selection");
            m.levels[i] = static_cast<Sel>(sel);
        }
        return m;
    }

    /// Decode the raw 15-bit transistor mask (3 one-hot bits per level:
    /// none/left/right). Exactly one transistor must be selected per level.
    static ShiftMask from_bits15(std::uint16_t s) {
        ShiftMask m;
        for (int i = 0; i < 5; ++i) {
            unsigned trio = (s >> (3 * i)) & 0x7;
            switch (trio) {
                case 0b001: m.levels[i] = None; break;
                case 0b010: m.levels[i] = Left; break;
                case 0b100: m.levels[i] = Right; break;
                default:
                    throw std::invalid_argument("shift mask: exactly one transistor must be selected per level");
            }
        }
        return m;
    }

    static ShiftMask left_by_one() {
        ShiftMask m;
        m.levels[4] = Left;
        return m;
    }
    static ShiftMask right_levels(std::array<bool, 5> active) {
        ShiftMask m;
        for (int i = 0; i < 5; ++i)
            if (active[i]) m.levels[i] = Right;
        return m;
    }
};

/// Greedy largest-first decomposition of a shift amount into shifter rounds.
/// Each round activates every level whose magnitude still fits the remainder,
/// so 127 decomposes as [117, 5, 5] and 69 fits in a single round.
inline std::vector<ShiftMask> greedy_shift_rounds(unsigned amount, bool left = false) {
    std::vector<ShiftMask> rounds;
    unsigned rem = amount;
    while (rem > 0) {
        ShiftMask m;
        unsigned taken = 0;
        for (int i = 0; i < 5; ++i) {
            const unsigned mag = static_cast<unsigned>(ShiftMask::kMagnitudes[i]);
            if (mag <= rem - taken) {
                m.levels[i] = left ? ShiftMask::Left : ShiftMask::Right;
                taken += mag;
            }
        }
        rounds.push_back(m);
        rem -= taken;
    }
    return rounds;
}

namespace step_flags {
constexpr std::uint8_t kPredFlag = 1u << 0;   // execute iff the array flag is set
constexpr std::uint8_t kPredReg = 1u << 1;    // execute iff controller register bit `imm` is set
constexpr std::uint8_t kCarryIn = 1u << 2;    // WordAdd carry-in
constexpr std::uint8_t kWaveFirst = 1u << 3;  // first step of a lockstep wave
constexpr std::uint8_t kWholeRow = 1u << 4;   // StageConst targets the whole row
}  // namespace step_flags

/// One CiM micro-step. Interpretation of fields depends on kind:
///   Read         (array,row_a,slot) -> controller register
///   BitAnd/Or/Xor rows row_a,row_b -> latch (whole row)
///   BitNot       row_a -> latch (whole row)
///   HorizontalOr latch slot -> array flag
///   WordAdd      row_a+row_b(+carry) at slot -> latch slot
///   LogShift     (row_a,slot) shifted by mask imm -> latch slot
///   IpcbCopy     latch slot -> (row_d, slot)
///   IpmbMove     (row_a,slot) -> (dst_array,row_d,dst_slot)
///   StageConst   const_pool[imm] -> (row_d, slot) or whole row
///   FlagBranch   controller evaluates the array flag (cost only)
/// PredReg steps test bit `imm` of the array's controller register.
struct Step {
    StepKind kind = StepKind::FlagBranch;
    std::uint8_t flags = 0;
    std::uint16_t slot = 0;
    std::uint32_t array = 0;
    std::uint16_t row_a = 0;
    std::uint16_t row_b = 0;
    std::uint16_t row_d = 0;
    std::uint16_t dst_slot = 0;
    std::uint32_t dst_array = 0;
    std::uint32_t imm = 0;
};
static_assert(sizeof(Step) == 24);

/// Word patterns referenced by StageConst steps.
class ConstPool {
public:
    std::uint32_t intern(const BigInt& value, unsigned words) {
        auto key = value.str() + "/" + std::to_string(words);
        auto it = index_.find(key);
        if (it != index_.end()) return it->second;
        std::vector<std::uint64_t> w(words);
        to_words(value, w.data(), words);
        patterns_.push_back(std::move(w));
        std::uint32_t id = static_cast<std::uint32_t>(patterns_.size() - 1);
        index_.emplace(std::move(key), id);
        return id;
    }
    const std::vector<std::uint64_t>& pattern(std::uint32_t id) const {
        if (id >= patterns_.size()) throw std::out_of_range("const pool index");
        return patterns_[id];
    }
    std::size_t size() const { return patterns_.size(); }

private:
    std::vector<std::vector<std::uint64_t>> patterns_;
    std::map<std::string, std::uint32_t> index_;
};

struct Landmark {
    std::string label;
    std::size_t step_index = 0;  // value is valid after this step executes
    Addr at;
};

/// A batch of independent bit-serial multiplications, each confined to one
/// array (out accumulator and multiplicand copy in station rows, multiplier
/// read into the array's controller register). Jobs in a batch occupy
/// distinct arrays and run in lockstep waves.
struct ShiftAddBatch {
    struct Job {
        std::uint32_t array = 0;
        std::uint16_t out_row = 0, a_row = 0, b_row = 0;
        std::uint16_t slot = 0;
        Addr dst;            // final product destination (move target)
        std::uint32_t width = 0;  // multiplier bit iterations
    };
    std::vector<Job> jobs;
    std::uint32_t zero_pool_id = 0;
};

class StepSink;
void expand_shift_add(StepSink& sink, const ShiftAddBatch& batch);

/// Receiver of compiled steps: either a program collector (materialized,
/// inspectable, replayable) or an executor running the stream directly.
class StepSink {
public:
    virtual ~StepSink() = default;
    virtual void emit(const Step& s) = 0;
    /// Fused base-case hook; the default expansion produces the plain steps.
    virtual void shift_add_batch(const ShiftAddBatch& b) { expand_shift_add(*this, b); }
    /// Number of steps received so far (exact for collectors; used to anchor
    /// landmark positions in materialized programs).
    virtual std::uint64_t steps_received() const = 0;
};

struct StepProgram {
    std::vector<Step> steps;
    ConstPool pool;
    std::vector<Landmark> landmarks;
};

class ProgramCollector : public StepSink {
public:
    explicit ProgramCollector(StepProgram& p) : program_(p) {}
    void emit(const Step& s) override { program_.steps.push_back(s); }
    std::uint64_t steps_received() const override { return program_.steps.size(); }

private:
    StepProgram& program_;
};

/// Generic step expansion of a Shift-Add batch, per the bit-serial algorithm:
/// reserve/clear the accumulator, read the multiplier into the controller,
/// then for every bit position conditionally accumulate and always shift the
/// multiplicand left by one. Ends by moving each product to its destination.
inline void expand_shift_add(StepSink& sink, const ShiftAddBatch& batch) {
    using namespace step_flags;
    if (batch.jobs.empty()) return;
    std::uint32_t maxw = 0;
    for (const auto& j : batch.jobs) maxw = std::max(maxw, j.width);

    bool first = true;
    for (const auto& j : batch.jobs) {  // out := 0
        Step s;
        s.kind = StepKind::StageConst;
        s.flags = first ? kWaveFirst : 0;
        s.array = j.array;
        s.row_d = j.out_row;
        s.slot = j.slot;
        s.imm = batch.zero_pool_id;
        sink.emit(s);
        first = false;
    }
    first = true;
    for (const auto& j : batch.jobs) {  // b' := multiplier, into the controller
        Step s;
        s.kind = StepKind::Read;
        s.flags = first ? kWaveFirst : 0;
        s.array = j.array;
        s.row_a = j.b_row;
        s.slot = j.slot;
        sink.emit(s);
        first = false;
    }

    const std::uint16_t left1 = ShiftMask::left_by_one().encode();
    for (std::uint32_t i = 0; i < maxw; ++i) {
        // out := out + a'   (only where multiplier bit i is set)
        first = true;
        for (const auto& j : batch.jobs) {
            if (i >= j.width) continue;
            Step s;
            s.kind = StepKind::WordAdd;
            s.flags = static_cast<std::uint8_t>((first ? kWaveFirst : 0) | kPredReg);
            s.array = j.array;
            s.row_a = j.out_row;
            s.row_b = j.a_row;
            s.slot = j.slot;
            s.imm = i;
            sink.emit(s);
            first = false;
        }
        first = true;
        for (const auto& j : batch.jobs) {
            if (i >= j.width) continue;
            Step s;
            s.kind = StepKind::IpcbCopy;
            s.flags = static_cast<std::uint8_t>((first ? kWaveFirst : 0) | kPredReg);
            s.array = j.array;
            s.row_d = j.out_row;
            s.slot = j.slot;
            s.imm = i;
            sink.emit(s);
            first = false;
        }
        // a' := a' << 1   (every iteration)
        first = true;
        for (const auto& j : batch.jobs) {
            if (i >= j.width) continue;
            Step s;
            s.kind = StepKind::LogShift;
            s.flags = first ? kWaveFirst : 0;
            s.array = j.array;
            s.row_a = j.a_row;
            s.slot = j.slot;
            s.imm = left1;
            sink.emit(s);
            first = false;
        }
        first = true;
        for (const auto& j : batch.jobs) {
            if (i >= j.width) continue;
            Step s;
            s.kind = StepKind::IpcbCopy;
            s.flags = first ? kWaveFirst : 0;
            s.array = j.array;
            s.row_d = j.a_row;
            s.slot = j.slot;
            sink.emit(s);
            first = false;
        }
    }

    first = true;
    for (const auto& j : batch.jobs) {  // product to destination
        Step s;
        s.kind = StepKind::IpmbMove;
        s.flags = first ? kWaveFirst : 0;
        s.array = j.array;
        s.row_a = j.out_row;
        s.slot = j.slot;
        s.dst_array = j.dst.array;
        s.row_d = j.dst.row;
        s.dst_slot = j.dst.slot;
        sink.emit(s);
        first = false;
    }
}

}  // namespace pimhe::cim
