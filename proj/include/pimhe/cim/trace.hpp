#pragma once

#include "pimhe/cim/cost.hpp"
#include "pimhe/cim/step.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace pimhe::cim {

struct StepRecord {
    Step step;
    bool executed = false;
    bool flag_after = false;  // for HorizontalOr steps
    std::uint64_t cycles = 0;
    std::uint64_t energy_milli = 0;
};

/// Executed-step accounting: per-kind step/wave counts and charge totals,
/// with optional full per-step records for replay and inspection.
class StepTrace {
public:
    bool record_steps = true;
    std::vector<StepRecord> records;

    std::array<std::uint64_t, kStepKindCount> steps_by_kind{};
    std::array<std::uint64_t, kStepKindCount> waves_by_kind{};
    std::array<std::uint64_t, kStepKindCount> cycles_by_kind{};
    std::array<std::uint64_t, kStepKindCount> energy_by_kind{};

    std::vector<std::pair<std::string, BigInt>> landmark_values;

    std::uint64_t total_cycles() const {
        std::uint64_t t = 0;
        for (auto c : cycles_by_kind) t += c;
        return t;
    }
    std::uint64_t total_energy_milli() const {
        std::uint64_t t = 0;
        for (auto e : energy_by_kind) t += e;
        return t;
    }
    std::uint64_t total_steps() const {
        std::uint64_t t = 0;
        for (auto s : steps_by_kind) t += s;
        return t;
    }

    /// One scheduled wave slot: cycles charged once for the whole wave,
    /// whether or not every (or any) predicated lane ends up executing.
    void charge_wave_start(const CostModel& cm, StepKind kind) {
        const CostEntry& c = cm.for_kind(kind);
        const auto ki = static_cast<std::size_t>(kind);
        waves_by_kind[ki] += 1;
        cycles_by_kind[ki] += c.cycles;
    }

    /// Per-lane execution charge: step count and energy.
    void charge_step_energy(const CostModel& cm, StepKind kind, std::uint64_t lanes = 1) {
        const CostEntry& c = cm.for_kind(kind);
        const auto ki = static_cast<std::size_t>(kind);
        steps_by_kind[ki] += lanes;
        energy_by_kind[ki] += lanes * c.energy_milli;
    }

    /// Charge one lockstep wave: `lanes` arrays execute the same step kind in
    /// one cycle. Cycles are charged once, energy per lane.
    void charge_wave(const CostModel& cm, StepKind kind, std::uint64_t lanes) {
        if (lanes == 0) return;
        charge_wave_start(cm, kind);
        charge_step_energy(cm, kind, lanes);
    }

    void merge(const StepTrace& o) {
        for (std::size_t i = 0; i < kStepKindCount; ++i) {
            steps_by_kind[i] += o.steps_by_kind[i];
            waves_by_kind[i] += o.waves_by_kind[i];
            cycles_by_kind[i] += o.cycles_by_kind[i];
            energy_by_kind[i] += o.energy_by_kind[i];
        }
    }

    nlohmann::json totals_json() const {
        nlohmann::json per_kind = nlohmann::json::object();
        for (std::size_t i = 0; i < kStepKindCount; ++i) {
            if (steps_by_kind[i] == 0) continue;
            per_kind[step_kind_name(static_cast<StepKind>(i))] = {
                {"steps", steps_by_kind[i]},
                {"waves", waves_by_kind[i]},
                {"cycles", cycles_by_kind[i]},
                {"energy", energy_by_kind[i] / 1000.0}};
        }
        return {{"cycles", total_cycles()},
                {"energy", total_energy_milli() / 1000.0},
                {"steps", total_steps()},
                {"by_kind", per_kind}};
    }

    /// Line-delimited JSON, one record per executed or skipped step.
    void write_jsonl(std::ostream& os, bool runtime_fields = true) const {
        std::size_t idx = 0;
        for (const auto& r : records) {
            nlohmann::json j = step_to_json(r.step);
            j["i"] = idx++;
            if (runtime_fields) {
                j["executed"] = r.executed;
                if (r.step.kind == StepKind::HorizontalOr) j["flag"] = r.flag_after;
                j["cycles"] = r.cycles;
                j["energy"] = r.energy_milli / 1000.0;
            }
            os << j.dump() << "\n";
        }
    }

    static nlohmann::json step_to_json(const Step& s) {
        nlohmann::json j{{"kind", step_kind_name(s.kind)}, {"array", s.array}};
        using namespace step_flags;
        switch (s.kind) {
            case StepKind::Read: j["row"] = s.row_a; j["slot"] = s.slot; break;
            case StepKind::BitAnd:
            case StepKind::BitOr:
            case StepKind::BitXor: j["row_a"] = s.row_a; j["row_b"] = s.row_b; break;
            case StepKind::BitNot: j["row"] = s.row_a; break;
            case StepKind::HorizontalOr: j["slot"] = s.slot; break;
            case StepKind::WordAdd:
                j["row_a"] = s.row_a; j["row_b"] = s.row_b; j["slot"] = s.slot;
                j["carry_in"] = bool(s.flags & kCarryIn);
                break;
            case StepKind::LogShift: j["row"] = s.row_a; j["slot"] = s.slot; j["mask"] = s.imm; break;
            case StepKind::IpcbCopy: j["row_d"] = s.row_d; j["slot"] = s.slot; break;
            case StepKind::IpmbMove:
                j["row"] = s.row_a; j["slot"] = s.slot;
                j["dst_array"] = s.dst_array; j["row_d"] = s.row_d; j["dst_slot"] = s.dst_slot;
                break;
            case StepKind::StageConst: j["row_d"] = s.row_d;
                if (s.flags & kWholeRow) j["whole_row"] = true; else j["slot"] = s.slot;
                j["const"] = s.imm;
                break;
            default: break;
        }
        if (s.flags & kPredFlag) j["if_flag"] = true;
        if (s.flags & kPredReg) { j["if_reg_bit"] = s.imm; }
        if (s.flags & kWaveFirst) j["wave"] = true;
        return j;
    }
};

}  // namespace pimhe::cim
