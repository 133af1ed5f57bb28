#pragma once

#include "tokdyn/experiments/config.hpp"
#include "tokdyn/experiments/output.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace tokdyn::experiments {

struct RunContext {
    const RunConfig& cfg;
    Params params;
    RunWriter& writer;
};

struct Scenario {
    std::string name;
    std::string description;
    Json defaults;
    // Returns the scenario part of summary.json.
    std::function<Json(RunContext&)> run;
    // Extra provenance recorded in meta.json.
    std::function<Json(const Params&)> notes;
};

const std::vector<Scenario>& scenarios();
const Scenario* find_scenario(std::string_view name);

}  // namespace tokdyn::experiments
