#include "tokdyn/experiments/runner.hpp"

#include "tokdyn/experiments/output.hpp"
#include "tokdyn/experiments/scenarios.hpp"
#include "tokdyn/version.hpp"

#include <chrono>
#include <fstream>
#include <iterator>

namespace tokdyn::experiments {

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ZeroVector:
        case ErrorCode::NumericalFailure:
        case ErrorCode::InsufficientTrials: return kExitNumerical;
        case ErrorCode::VersionMismatch:
        case ErrorCode::ReplayMismatch: return kExitReplay;
        default: return kExitConfig;
    }
}

RunOutcome run_config(const RunConfig& cfg, const std::optional<std::filesystem::path>& out) {
    const Scenario* scenario = find_scenario(cfg.scenario);
    require(scenario != nullptr, ErrorCode::ConfigError, "key 'scenario': unknown scenario '" + cfg.scenario + "'");
    std::filesystem::path dir = out ? *out
                                    : (cfg.output_dir.empty() ? std::filesystem::path("runs") / cfg.run_id()
                                                              : std::filesystem::path(cfg.output_dir));
    const Params params = cfg.params();

    Json meta{{"schema", kMetaSchema},
              {"version", kVersion},
              {"run_id", cfg.run_id()},
              {"scenario", cfg.scenario},
              {"seed", cfg.seed},
              {"threads", cfg.threads},
              {"config", cfg.resolved},
              {"notes", scenario->notes ? scenario->notes(params) : Json::object()},
              {"wall_time_seconds", nullptr},
              {"series", Json::array()}};

    RunWriter writer(dir);
    writer.write_meta(meta);
    const auto start = std::chrono::steady_clock::now();
    RunContext ctx{cfg, params, writer};
    Json summary = scenario->run(ctx);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    summary["run_id"] = cfg.run_id();
    summary["seed"] = cfg.seed;
    writer.write_summary(summary);
    meta["wall_time_seconds"] = wall;
    meta["series"] = writer.csv_files();
    writer.write_meta(meta);
    return RunOutcome{dir, summary, writer.csv_files()};
}

bool files_identical(const std::filesystem::path& a, const std::filesystem::path& b) {
    std::ifstream fa(a, std::ios::binary);
    std::ifstream fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return ca == cb;
}

ReplayOutcome replay(const std::filesystem::path& meta_path, const ReplayOptions& options) {
    const Json meta = read_json_file(meta_path);
    auto corrupt = [&](const std::string& what) {
        throw Error(ErrorCode::ConfigError, "'" + meta_path.string() + "': " + what);
    };
    if (!meta.is_object()) corrupt("meta must be a JSON object");
    if (meta.value("schema", "") != kMetaSchema) corrupt("missing or unknown schema");
    if (!meta.contains("config") || !meta["config"].is_object()) corrupt("missing config");
    if (!meta.contains("version") || !meta["version"].is_string()) corrupt("missing version");
    if (!meta.contains("series") || !meta["series"].is_array()) corrupt("missing series list");

    ReplayOutcome outcome;
    const std::string recorded = meta["version"].get<std::string>();
    if (recorded != kVersion) {
        const std::string msg = "recorded version " + recorded + " differs from " + kVersion;
        if (!options.allow_version_mismatch) throw Error(ErrorCode::VersionMismatch, msg);
        outcome.warnings.push_back(msg);
    }

    Json raw = meta["config"];
    raw.erase("output_dir");
    if (options.seed) raw["seed"] = *options.seed;
    if (options.threads) raw["threads"] = *options.threads;
    const RunConfig cfg = resolve_config(raw);

    const std::filesystem::path original = meta_path.parent_path();
    const std::filesystem::path dir = options.out ? *options.out : original / "replay";
    outcome.run = run_config(cfg, dir);
    if (options.seed) return outcome;

    outcome.compared = true;
    for (const auto& name : meta["series"]) {
        if (!name.is_string()) corrupt("series entries must be strings");
        const std::string file = name.get<std::string>();
        if (!files_identical(original / file, dir / file)) outcome.mismatched.push_back(file);
    }
    if (!outcome.mismatched.empty()) {
        std::string list;
        for (const auto& f : outcome.mismatched) list += (list.empty() ? "" : ", ") + f;
        throw Error(ErrorCode::ReplayMismatch, "series differ from the original run: " + list);
    }
    return outcome;
}

}  // namespace tokdyn::experiments
