#pragma once

#include "pimhe/cim/cost.hpp"
#include "pimhe/cim/geometry.hpp"
#include "pimhe/params.hpp"
#include "pimhe/tasks.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

namespace pimhe {

/// Runtime configuration: named parameter presets and geometries plus the
/// cost/transfer models. Built-ins are always present; a JSON config file
/// overrides or extends them.
struct Config {
    std::map<std::string, ParamSet> presets = builtin_presets();
    std::map<std::string, cim::BankGeometry> geometries = cim::builtin_geometries();
    cim::CostModel cost;
    tasks::TransferCost transfer;

    ParamSet params(const std::string& name) const {
        auto it = presets.find(name);
        if (it == presets.end()) throw std::invalid_argument("unknown parameter preset: " + name);
        return it->second;
    }
    cim::BankGeometry geometry(const std::string& name) const {
        auto it = geometries.find(name);
        if (it == geometries.end()) throw std::invalid_argument("unknown geometry: " + name);
        return it->second;
    }

    static Config load(const std::string& path) {
        Config c;
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open config file: " + path);
        nlohmann::json j;
        f >> j;
        c.merge(j);
        return c;
    }

    void merge(const nlohmann::json& j) {
        if (j.contains("presets"))
            for (auto& [name, pj] : j.at("presets").items()) presets[name] = params_from_json(pj);
        if (j.contains("geometries"))
            for (auto& [name, gj] : j.at("geometries").items()) geometries[name] = cim::geometry_from_json(gj);
        if (j.contains("cost_model")) cost = cim::cost_model_from_json(j.at("cost_model"));
        if (j.contains("transfer")) transfer = tasks::transfer_from_json(j.at("transfer"));
    }
};

}  // namespace pimhe
