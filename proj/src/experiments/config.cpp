#include "tokdyn/experiments/config.hpp"

#include "tokdyn/errors.hpp"
#include "tokdyn/experiments/scenarios.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace tokdyn::experiments {

namespace {

[[noreturn]] void config_error(std::string_view key, const std::string& what) {
    throw Error(ErrorCode::ConfigError, "key '" + std::string(key) + "': " + what);
}

bool same_kind(const Json& expected, const Json& given) {
    if (expected.is_null() || given.is_null()) return true;
    if (expected.is_number()) return given.is_number();
    if (expected.is_boolean()) return given.is_boolean();
    if (expected.is_string()) return given.is_string();
    if (expected.is_array()) return given.is_array();
    return false;
}

void check_array(std::string_view key, const Json& expected, const Json& given) {
    if (!given.is_array() || expected.empty()) return;
    const Json& prototype = expected.front();
    for (std::size_t i = 0; i < given.size(); ++i) {
        if (!same_kind(prototype, given[i])) {
            config_error(std::string(key) + "[" + std::to_string(i) + "]",
                         "expected " + std::string(prototype.type_name()));
        }
    }
}

const Json kCommonDefaults = {
    {"scenario", ""},
    {"seed", nullptr},
    {"threads", 1},
    {"output_dir", ""},
};

}  // namespace

const Json& Params::at(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) config_error(key, "missing");
    return *it;
}

double Params::number(std::string_view key) const {
    const Json& v = at(key);
    if (!v.is_number()) config_error(key, "expected number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) config_error(key, "must be finite");
    return x;
}

std::int64_t Params::integer(std::string_view key) const {
    const Json& v = at(key);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9.0e15) return static_cast<std::int64_t>(x);
    }
    config_error(key, "expected integer");
}

std::string Params::text(std::string_view key) const {
    const Json& v = at(key);
    if (!v.is_string()) config_error(key, "expected string");
    return v.get<std::string>();
}

bool Params::flag(std::string_view key) const {
    const Json& v = at(key);
    if (!v.is_boolean()) config_error(key, "expected boolean");
    return v.get<bool>();
}

std::vector<double> Params::numbers(std::string_view key) const {
    const Json& v = at(key);
    if (!v.is_array()) config_error(key, "expected array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) config_error(std::string(key) + "[" + std::to_string(i) + "]", "expected number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

bool Params::is_null(std::string_view key) const { return at(key).is_null(); }

double Params::number_or(std::string_view key, double fallback) const {
    return is_null(key) ? fallback : number(key);
}

std::string RunConfig::run_id() const { return scenario + "-" + std::to_string(seed); }

RunConfig resolve_config(const Json& raw) {
    if (!raw.is_object()) config_error("<root>", "config must be a JSON object");
    const auto scenario_it = raw.find("scenario");
    if (scenario_it == raw.end()) config_error("scenario", "missing");
    if (!scenario_it->is_string()) config_error("scenario", "expected string");
    const std::string name = scenario_it->get<std::string>();
    const Scenario* scenario = find_scenario(name);
    if (scenario == nullptr) config_error("scenario", "unknown scenario '" + name + "'");

    Json resolved = kCommonDefaults;
    for (const auto& [key, value] : scenario->defaults.items()) resolved[key] = value;

    for (const auto& [key, value] : raw.items()) {
        const auto it = resolved.find(key);
        if (it == resolved.end()) config_error(key, "not a parameter of scenario '" + name + "'");
        if (!same_kind(*it, value)) config_error(key, "expected " + std::string(it->type_name()));
        check_array(key, *it, value);
        *it = value;
    }

    RunConfig cfg;
    cfg.scenario = name;
    const Json& seed = resolved["seed"];
    if (seed.is_null()) config_error("seed", "missing (runs are never seeded from the clock)");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
        config_error("seed", "expected non-negative integer");
    }
    cfg.seed = seed.get<std::uint64_t>();
    const Params params(resolved);
    const std::int64_t threads = params.integer("threads");
    if (threads < 1 || threads > 1024) config_error("threads", "must be in [1, 1024]");
    cfg.threads = static_cast<int>(threads);
    cfg.output_dir = params.text("output_dir");
    cfg.resolved = std::move(resolved);
    return cfg;
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::ConfigError, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

RunConfig load_config(const std::filesystem::path& path) { return resolve_config(read_json_file(path)); }

}  // namespace tokdyn::experiments
