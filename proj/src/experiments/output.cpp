#include "tokdyn/experiments/output.hpp"

#include "tokdyn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace tokdyn::experiments {

const std::vector<std::string_view>& field_registry() {
    static const std::vector<std::string_view> kFields = {
        "run_id",       "trial",        "time",        "step",         "m",          "kappa",
        "r12",          "gamma",        "gamma_exact", "u",            "R",          "deviation",
        "participation_ratio",          "m_logistic",  "eta",          "alpha",      "t_L",
        "L",            "label",        "m_mean",      "m_variance",   "m_drift",    "gap",
        "gap_stderr",   "chain_mean",   "chain_stderr", "sde_mean",    "sde_stderr", "censored",
        "f",            "g",            "stderr_f",    "stderr_g",     "b",          "row",
        "col",          "mc",           "mc_stderr",   "closed",       "closed_stderr", "z",
        "d",            "r",            "estimate",    "stderr",       "expansion",  "discrepancy",
        "bound",        "sup_deviation", "within_bound", "absorbed",    "u_final",    "seed",
        "max_offdiag",  "min_offdiag",  "self_gap",    "self_gap_stderr", "sigma_V",
    };
    return kFields;
}

bool is_registered_field(std::string_view name) {
    const auto& fields = field_registry();
    return std::find(fields.begin(), fields.end(), name) != fields.end();
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::string_view schema, std::vector<std::string> columns)
    : out_(path, std::ios::binary), columns_(std::move(columns)) {
    if (!out_) throw Error(ErrorCode::ConfigError, "cannot write '" + path.string() + "'");
    for (const auto& c : columns_) {
        require(is_registered_field(c), ErrorCode::InvalidArgument, "unregistered CSV field '" + c + "'");
    }
    out_ << "# schema: " << schema << "\r\n";
    for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << csv_escape(columns_[i]);
    out_ << "\r\n";
}

void CsvWriter::row(const std::vector<Cell>& cells) {
    require(cells.size() == columns_.size(), ErrorCode::InvalidArgument, "CSV row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        std::visit(
            [this](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, std::string>) {
                    out_ << csv_escape(v);
                } else if constexpr (std::is_same_v<T, double>) {
                    out_ << format_number(v);
                } else {
                    out_ << v;
                }
            },
            cells[i]);
    }
    out_ << "\r\n";
}

void write_json_file(const std::filesystem::path& path, const Json& value) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::ConfigError, "cannot write '" + path.string() + "'");
    out << value.dump(2) << "\n";
}

RunWriter::RunWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::ConfigError, "cannot create '" + dir_.string() + "': " + ec.message());
}

void RunWriter::write_meta(const Json& meta) {
    write_json_file(dir_ / "meta.json", meta);
    meta_written_ = true;
}

CsvWriter& RunWriter::open_csv(const std::string& name, std::string_view schema, std::vector<std::string> columns) {
    require(meta_written_, ErrorCode::InvalidArgument, "meta.json must be written before series files");
    csvs_.emplace_back(name, std::make_unique<CsvWriter>(dir_ / name, schema, std::move(columns)));
    return *csvs_.back().second;
}

void RunWriter::write_summary(Json summary) {
    for (auto& entry : csvs_) entry.second.reset();
    Json out = {{"schema", kSummarySchema}};
    for (auto& [key, value] : summary.items()) out[key] = std::move(value);
    write_json_file(dir_ / "summary.json", out);
}

std::vector<std::string> RunWriter::csv_files() const {
    std::vector<std::string> names;
    for (const auto& entry : csvs_) names.push_back(entry.first);
    return names;
}

}  // namespace tokdyn::experiments
