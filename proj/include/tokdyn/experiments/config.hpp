#pragma once

// Flat JSON run configurations.
//
// A config is one JSON object: `scenario`, an explicit `seed`, optional
// `threads` and `output_dir`, plus the scenario's own keys.  Keys are resolved
// against the scenario defaults; unknown keys and type mismatches raise
// ConfigError naming the offending key path.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tokdyn::experiments {

using Json = nlohmann::ordered_json;

class Params {
  public:
    explicit Params(Json resolved) : values_(std::move(resolved)) {}

    [[nodiscard]] double number(std::string_view key) const;
    [[nodiscard]] std::int64_t integer(std::string_view key) const;
    [[nodiscard]] std::string text(std::string_view key) const;
    [[nodiscard]] bool flag(std::string_view key) const;
    [[nodiscard]] std::vector<double> numbers(std::string_view key) const;
    [[nodiscard]] bool is_null(std::string_view key) const;
    // Numeric value or `fallback` when the key is null.
    [[nodiscard]] double number_or(std::string_view key, double fallback) const;

    [[nodiscard]] const Json& json() const { return values_; }

  private:
    [[nodiscard]] const Json& at(std::string_view key) const;
    Json values_;
};

struct RunConfig {
    std::string scenario;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string output_dir;  // empty: runs/<run_id>
    Json resolved;           // every key, defaults filled in

    [[nodiscard]] Params params() const { return Params(resolved); }
    [[nodiscard]] std::string run_id() const;
};

// Throws ConfigError with the key path on any problem.
RunConfig resolve_config(const Json& raw);
RunConfig load_config(const std::filesystem::path& path);
Json read_json_file(const std::filesystem::path& path);

}  // namespace tokdyn::experiments
