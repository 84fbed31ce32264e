#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pimhe::cim {

enum class StepKind : std::uint8_t {
    Read = 0,
    BitAnd,
    BitOr,
    BitXor,
    BitNot,
    HorizontalOr,
    WordAdd,
    LogShift,
    IpcbCopy,
    IpmbMove,
    FlagBranch,
    StageConst,  // controller write of a staged constant; costed as a copy
    kCount
};

constexpr std::size_t kStepKindCount = static_cast<std::size_t>(StepKind::kCount);

inline const char* step_kind_name(StepKind k) {
    switch (k) {
        case StepKind::Read: return "read";
        case StepKind::BitAnd: return "and";
        case StepKind::BitOr: return "or";
        case StepKind::BitXor: return "xor";
        case StepKind::BitNot: return "not";
        case StepKind::HorizontalOr: return "horizontal-or";
        case StepKind::WordAdd: return "add";
        case StepKind::LogShift: return "shift-round";
        case StepKind::IpcbCopy: return "ipcb-copy";
        case StepKind::IpmbMove: return "ipmb-move";
        case StepKind::FlagBranch: return "flag-branch";
        case StepKind::StageConst: return "stage-const";
        default: return "?";
    }
}

/// Per-step cycle and energy coefficients. Energy is tracked in integral
/// milli-units so multi-billion-step totals stay exact.
struct CostEntry {
    std::uint64_t cycles = 1;
    std::uint64_t energy_milli = 1000;
};

struct CostModel {
    CostEntry read{1, 1000};
    CostEntry bitwise_logic{1, 1000};
    CostEntry horizontal_or{1, 1000};
    CostEntry add{2, 2000};
    CostEntry shift_round{1, 1000};
    CostEntry ipcb_copy{1, 1000};
    CostEntry ipmb_move{1, 1000};
    CostEntry flag_branch{1, 1000};

    const CostEntry& for_kind(StepKind k) const {
        switch (k) {
            case StepKind::Read: return read;
            case StepKind::BitAnd:
            case StepKind::BitOr:
            case StepKind::BitXor:
            case StepKind::BitNot: return bitwise_logic;
            case StepKind::HorizontalOr: return horizontal_or;
            case StepKind::WordAdd: return add;
            case StepKind::LogShift: return shift_round;
            case StepKind::IpcbCopy: return ipcb_copy;
            case StepKind::IpmbMove: return ipmb_move;
            case StepKind::FlagBranch: return flag_branch;
            case StepKind::StageConst: return ipcb_copy;
            default: throw std::invalid_argument("unknown step kind");
        }
    }

    void validate() const {
        if (add.cycles < read.cycles || add.energy_milli < read.energy_milli)
            throw std::invalid_argument("cost model: add must cost at least a read");
        if (shift_round.cycles < read.cycles || shift_round.energy_milli < read.energy_milli)
            throw std::invalid_argument("cost model: shift must cost at least a read");
    }
};

inline CostEntry cost_entry_from_json(const nlohmann::json& j) {
    CostEntry e;
    e.cycles = j.at("cycles").get<std::uint64_t>();
    double en = j.at("energy").get<double>();
    if (en < 0) throw std::invalid_argument("cost model: negative energy");
    e.energy_milli = static_cast<std::uint64_t>(en * 1000.0 + 0.5);
    return e;
}

inline CostModel cost_model_from_json(const nlohmann::json& j) {
    CostModel m;
    auto get = [&j](const char* key, CostEntry& e) {
        if (j.contains(key)) e = cost_entry_from_json(j.at(key));
    };
    get("read", m.read);
    get("bitwise-logic", m.bitwise_logic);
    get("horizontal-or", m.horizontal_or);
    get("add", m.add);
    get("shift-round", m.shift_round);
    get("ipcb-copy", m.ipcb_copy);
    get("ipmb-move", m.ipmb_move);
    get("controller-flag-branch", m.flag_branch);
    m.validate();
    return m;
}

inline nlohmann::json cost_model_to_json(const CostModel& m) {
    auto entry = [](const CostEntry& e) {
        return nlohmann::json{{"cycles", e.cycles}, {"energy", e.energy_milli / 1000.0}};
    };
    return {{"read", entry(m.read)},
            {"bitwise-logic", entry(m.bitwise_logic)},
            {"horizontal-or", entry(m.horizontal_or)},
            {"add", entry(m.add)},
            {"shift-round", entry(m.shift_round)},
            {"ipcb-copy", entry(m.ipcb_copy)},
            {"ipmb-move", entry(m.ipmb_move)},
            {"controller-flag-branch", entry(m.flag_branch)}};
}

}  // namespace pimhe::cim
