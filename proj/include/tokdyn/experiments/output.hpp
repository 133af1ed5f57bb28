#pragma once

// Run directory layout: meta.json, one CSV per series, summary.json.

#include "tokdyn/experiments/config.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tokdyn::experiments {

inline constexpr std::string_view kSeriesSchema = "tokdyn.series/1";
inline constexpr std::string_view kTableSchema = "tokdyn.table/1";
inline constexpr std::string_view kMetaSchema = "tokdyn.meta/1";
inline constexpr std::string_view kSummarySchema = "tokdyn.summary/1";

// Column names a CSV may use.
const std::vector<std::string_view>& field_registry();
bool is_registered_field(std::string_view name);

using Cell = std::variant<std::string, double, std::int64_t>;

// RFC 4180 CSV.  First line `# schema: <schema>`, then the header.
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, std::string_view schema, std::vector<std::string> columns);

    void row(const std::vector<Cell>& cells);
    [[nodiscard]] const std::vector<std::string>& columns() const { return columns_; }

  private:
    std::ofstream out_;
    std::vector<std::string> columns_;
};

std::string format_number(double x);
std::string csv_escape(std::string_view field);

class RunWriter {
  public:
    explicit RunWriter(std::filesystem::path dir);

    void write_meta(const Json& meta);
    // Series files may only be opened once meta.json exists.
    CsvWriter& open_csv(const std::string& name, std::string_view schema, std::vector<std::string> columns);
    void write_summary(Json summary);

    [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }
    [[nodiscard]] std::vector<std::string> csv_files() const;

  private:
    std::filesystem::path dir_;
    bool meta_written_ = false;
    std::vector<std::pair<std::string, std::unique_ptr<CsvWriter>>> csvs_;
};

void write_json_file(const std::filesystem::path& path, const Json& value);

}  // namespace tokdyn::experiments
