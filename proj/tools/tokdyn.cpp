#include "tokdyn/errors.hpp"
#include "tokdyn/experiments/config.hpp"
#include "tokdyn/experiments/runner.hpp"
#include "tokdyn/experiments/scenarios.hpp"
#include "tokdyn/version.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace ex = tokdyn::experiments;

namespace {

int report(const tokdyn::Error& e) {
    std::cerr << "tokdyn: " << e.what() << "\n";
    return ex::exit_code_for(e.code());
}

int simulate(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed,
             std::optional<int> threads) {
    ex::Json raw = ex::read_json_file(config_path);
    if (raw.is_object()) {
        if (seed) raw["seed"] = *seed;
        if (threads) raw["threads"] = *threads;
    }
    const ex::RunConfig cfg = ex::resolve_config(raw);
    const auto outcome = ex::run_config(cfg, out.empty() ? std::nullopt : std::optional<std::filesystem::path>(out));
    std::cout << outcome.dir.string() << "\n" << outcome.summary.dump(2) << "\n";
    return ex::kExitOk;
}

int replay(const std::string& meta_path, const ex::ReplayOptions& options) {
    const auto outcome = ex::replay(meta_path, options);
    for (const auto& w : outcome.warnings) std::cerr << "tokdyn: warning: " << w << "\n";
    std::cout << outcome.run.dir.string() << "\n";
    if (outcome.compared) {
        std::cout << "replay identical (" << outcome.run.series.size() << " series)\n";
    } else {
        std::cout << "replay written with overridden seed; not compared\n";
    }
    return ex::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random attention dynamics on the sphere: chain, SDE and reductions"};
    app.set_version_flag("--version", std::string(tokdyn::kVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    auto* sim = app.add_subcommand("simulate", "run a scenario from a JSON config");
    sim->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", out, "output directory");
    sim->add_option("--seed", seed, "override the config seed");
    sim->add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024));

    std::string meta_path;
    std::string replay_out;
    std::optional<std::uint64_t> replay_seed;
    std::optional<int> replay_threads;
    bool allow_version_mismatch = false;
    auto* rep = app.add_subcommand("replay", "re-run a recorded run and compare its series");
    rep->add_option("meta", meta_path, "meta.json of a previous run")->required();
    rep->add_option("--out", replay_out, "output directory (default: <run>/replay)");
    rep->add_option("--seed", replay_seed, "override the seed (skips the comparison)");
    rep->add_option("--threads", replay_threads, "worker threads")->check(CLI::Range(1, 1024));
    rep->add_flag("--allow-version-mismatch", allow_version_mismatch, "warn instead of failing on version mismatch");

    auto* list = app.add_subcommand("list-scenarios", "print the available scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ex::kExitConfig;
    }

    try {
        if (sim->parsed()) return simulate(config_path, out, seed, threads);
        if (rep->parsed()) {
            ex::ReplayOptions options;
            if (!replay_out.empty()) options.out = replay_out;
            options.seed = replay_seed;
            options.threads = replay_threads;
            options.allow_version_mismatch = allow_version_mismatch;
            return replay(meta_path, options);
        }
        if (list->parsed()) {
            for (const auto& s : ex::scenarios()) std::cout << s.name << "\t" << s.description << "\n";
            return ex::kExitOk;
        }
    } catch (const tokdyn::Error& e) {
        return report(e);
    } catch (const std::exception& e) {
        std::cerr << "tokdyn: " << e.what() << "\n";
        return ex::kExitNumerical;
    }
    return ex::kExitOk;
}
