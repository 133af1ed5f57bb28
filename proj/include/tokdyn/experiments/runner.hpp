#pragma once

#include "tokdyn/errors.hpp"
#include "tokdyn/experiments/config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tokdyn::experiments {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitNumerical = 3,
    kExitReplay = 4,
};

int exit_code_for(ErrorCode code);

struct RunOutcome {
    std::filesystem::path dir;
    Json summary;
    std::vector<std::string> series;
};

// Output directory: `out` if given, else the config's output_dir, else runs/<run_id>.
RunOutcome run_config(const RunConfig& cfg, const std::optional<std::filesystem::path>& out = std::nullopt);

struct ReplayOptions {
    std::optional<std::filesystem::path> out;  // default: <meta dir>/replay
    std::optional<std::uint64_t> seed;         // overriding the seed skips the comparison
    std::optional<int> threads;
    bool allow_version_mismatch = false;
};

struct ReplayOutcome {
    RunOutcome run;
    bool compared = false;
    std::vector<std::string> mismatched;
    std::vector<std::string> warnings;
};

// Throws ConfigError on malformed meta, VersionMismatch (unless allowed) and
// ReplayMismatch when a series file differs from the original.
ReplayOutcome replay(const std::filesystem::path& meta_path, const ReplayOptions& options = {});

bool files_identical(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace tokdyn::experiments
