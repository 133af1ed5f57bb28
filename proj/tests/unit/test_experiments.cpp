#include "helpers.hpp"

#include "tokdyn/experiments/config.hpp"
#include "tokdyn/experiments/output.hpp"
#include "tokdyn/experiments/runner.hpp"
#include "tokdyn/experiments/scenarios.hpp"
#include "tokdyn/version.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace tokdyn;
using namespace tokdyn::experiments;
using tokdyn::testing::error_code_of;
namespace fs = std::filesystem;

namespace {

class ScratchDir {
  public:
    ScratchDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("tokdyn-exp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    [[nodiscard]] const fs::path& path() const { return path_; }

  private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Table {
    std::string schema;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        FAIL("no column " << name);
        return 0;
    }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

Table read_csv(const fs::path& p) {
    const std::string text = slurp(p);
    Table t;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        const std::size_t end = text.find("\r\n", pos);
        REQUIRE(end != std::string::npos);
        const std::string line = text.substr(pos, end - pos);
        pos = end + 2;
        if (line_no == 0) {
            t.schema = line;
        } else if (line_no == 1) {
            t.header = split(line);
        } else {
            t.rows.push_back(split(line));
        }
        ++line_no;
    }
    return t;
}

Json small_chain() {
    return Json{{"scenario", "chain"}, {"seed", 11}, {"n", 4}, {"d", 8}, {"L", 12}, {"trials", 3}, {"stride", 4}};
}

Json small_logistic() {
    return Json{{"scenario", "logistic-sde"}, {"seed", 5}, {"T", 5.0}, {"dt", 1e-3}, {"paths", 200},
                {"record_paths", 2}, {"stride", 500}};
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("resolve_config fills defaults and keeps explicit values") {
    const RunConfig cfg = resolve_config(small_chain());
    CHECK(cfg.scenario == "chain");
    CHECK(cfg.seed == 11u);
    CHECK(cfg.threads == 1);
    CHECK(cfg.run_id() == "chain-11");
    const Params p = cfg.params();
    CHECK(p.integer("n") == 4);
    CHECK(p.number("eta") == doctest::Approx(0.05));
    CHECK(p.text("init") == "uniform");
    CHECK(p.is_null("sigma_V"));
    CHECK(p.number_or("sigma_V", 0.25) == 0.25);
}

TEST_CASE("resolve_config errors name the key") {
    auto message_of = [](const Json& raw) -> std::string {
        try {
            (void)resolve_config(raw);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ConfigError);
            return e.what();
        }
        FAIL("expected ConfigError");
        return {};
    };
    Json raw = small_chain();
    raw["bogus"] = 1;
    CHECK(message_of(raw).find("'bogus'") != std::string::npos);

    raw = small_chain();
    raw["eta"] = "fast";
    CHECK(message_of(raw).find("'eta'") != std::string::npos);

    raw = Json{{"scenario", "weak-error"}, {"seed", 1}, {"etas", {0.2, 0.1, "x"}}};
    CHECK(message_of(raw).find("'etas[2]'") != std::string::npos);

    raw = small_chain();
    raw.erase("seed");
    CHECK(message_of(raw).find("'seed'") != std::string::npos);

    raw = small_chain();
    raw["seed"] = -3;
    CHECK(message_of(raw).find("'seed'") != std::string::npos);

    raw = small_chain();
    raw["threads"] = 0;
    CHECK(message_of(raw).find("'threads'") != std::string::npos);

    CHECK(message_of(Json{{"scenario", "nope"}, {"seed", 1}}).find("'scenario'") != std::string::npos);
    CHECK(message_of(Json::array()).find("<root>") != std::string::npos);
}

TEST_CASE("Params accessors check types") {
    const Params p(Json{{"a", 1.5}, {"b", 3.0}, {"c", "x"}, {"v", {1, 2.5}}, {"f", true}, {"bad", {1, "y"}}});
    CHECK(p.integer("b") == 3);
    CHECK(error_code_of([&] { (void)p.integer("a"); }) == ErrorCode::ConfigError);
    CHECK(error_code_of([&] { (void)p.number("c"); }) == ErrorCode::ConfigError);
    CHECK(error_code_of([&] { (void)p.number("missing"); }) == ErrorCode::ConfigError);
    CHECK(p.numbers("v") == std::vector<double>{1.0, 2.5});
    CHECK(error_code_of([&] { (void)p.numbers("bad"); }) == ErrorCode::ConfigError);
    CHECK(p.flag("f"));
}

TEST_CASE("shipped configs resolve") {
    std::size_t seen = 0;
    for (const auto& entry : fs::directory_iterator(TOKDYN_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        CAPTURE(entry.path().string());
        const RunConfig cfg = load_config(entry.path());
        CHECK(find_scenario(cfg.scenario) != nullptr);
        ++seen;
    }
    CHECK(seen == scenarios().size());
}

TEST_CASE("csv formatting") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("CsvWriter writes schema, header and CRLF rows") {
    ScratchDir dir;
    const fs::path file = dir.path() / "t.csv";
    {
        CsvWriter w(file, kSeriesSchema, {"run_id", "step", "m"});
        w.row({std::string("x,y"), std::int64_t{3}, 0.5});
        CHECK(error_code_of([&] { w.row({std::string("a")}); }) == ErrorCode::InvalidArgument);
    }
    CHECK(slurp(file) == "# schema: tokdyn.series/1\r\nrun_id,step,m\r\n\"x,y\",3,0.5\r\n");
    CHECK(error_code_of([&] { CsvWriter w(dir.path() / "u.csv", kSeriesSchema, {"nonsense"}); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("RunWriter requires meta before series") {
    ScratchDir dir;
    RunWriter w(dir.path() / "run");
    CHECK(error_code_of([&] { (void)w.open_csv("a.csv", kSeriesSchema, {"m"}); }) == ErrorCode::InvalidArgument);
    w.write_meta(Json{{"schema", kMetaSchema}});
    w.open_csv("a.csv", kSeriesSchema, {"m"}).row({1.0});
    w.write_summary(Json{{"x", 1}});
    CHECK(w.csv_files() == std::vector<std::string>{"a.csv"});
    const Json summary = read_json_file(dir.path() / "run" / "summary.json");
    CHECK(summary["schema"] == kSummarySchema);
    CHECK(summary["x"] == 1);
}

TEST_CASE("run_config writes meta, series and summary") {
    ScratchDir dir;
    const RunOutcome out = run_config(resolve_config(small_chain()), dir.path() / "run");
    const Json meta = read_json_file(out.dir / "meta.json");
    CHECK(meta["schema"] == kMetaSchema);
    CHECK(meta["version"] == std::string(kVersion));
    CHECK(meta["run_id"] == "chain-11");
    CHECK(meta["seed"] == 11);
    CHECK(meta["config"]["n"] == 4);
    CHECK(meta["config"]["eta"] == 0.05);
    CHECK(meta["wall_time_seconds"].is_number());
    REQUIRE(meta["series"].is_array());
    CHECK(meta["series"].size() == out.series.size());
    for (const auto& name : out.series) {
        CAPTURE(name);
        const Table t = read_csv(out.dir / name);
        CHECK(t.schema.rfind("# schema: tokdyn.", 0) == 0);
        CHECK(t.header.front() == "run_id");
        for (const auto& col : t.header) CHECK(is_registered_field(col));
        for (const auto& row : t.rows) {
            CHECK(row.size() == t.header.size());
            CHECK(row.front() == "chain-11");
        }
    }
    const Json summary = read_json_file(out.dir / "summary.json");
    CHECK(summary["schema"] == kSummarySchema);
    CHECK(summary["run_id"] == "chain-11");
    CHECK(summary["seed"] == 11);
}

TEST_CASE("output directory falls back to output_dir and then runs/<run_id>") {
    ScratchDir dir;
    Json raw = small_logistic();
    raw["output_dir"] = (dir.path() / "chosen").string();
    CHECK(run_config(resolve_config(raw)).dir == dir.path() / "chosen");
    CHECK(fs::exists(dir.path() / "chosen" / "summary.json"));

    const fs::path cwd = fs::current_path();
    fs::current_path(dir.path());
    const RunOutcome out = run_config(resolve_config(small_logistic()));
    fs::current_path(cwd);
    CHECK(out.dir == fs::path("runs") / "logistic-sde-5");
    CHECK(fs::exists(dir.path() / "runs" / "logistic-sde-5" / "meta.json"));
}

TEST_CASE("runs are deterministic and independent of the thread count") {
    ScratchDir dir;
    Json raw = small_chain();
    const RunOutcome a = run_config(resolve_config(raw), dir.path() / "a");
    raw["threads"] = 3;
    const RunOutcome b = run_config(resolve_config(raw), dir.path() / "b");
    REQUIRE(a.series == b.series);
    for (const auto& name : a.series) CHECK(files_identical(a.dir / name, b.dir / name));

    raw["seed"] = 12;
    const RunOutcome c = run_config(resolve_config(raw), dir.path() / "c");
    CHECK_FALSE(files_identical(a.dir / "chain.csv", c.dir / "chain.csv"));
}

TEST_CASE("replay reproduces the series byte for byte") {
    ScratchDir dir;
    const RunOutcome run = run_config(resolve_config(small_chain()), dir.path() / "run");
    const ReplayOutcome rep = replay(run.dir / "meta.json");
    CHECK(rep.compared);
    CHECK(rep.mismatched.empty());
    CHECK(rep.run.dir == run.dir / "replay");

    ReplayOptions threaded;
    threaded.out = dir.path() / "threaded";
    threaded.threads = 4;
    CHECK(replay(run.dir / "meta.json", threaded).compared);

    ReplayOptions reseeded;
    reseeded.out = dir.path() / "reseeded";
    reseeded.seed = 99;
    const ReplayOutcome other = replay(run.dir / "meta.json", reseeded);
    CHECK_FALSE(other.compared);
    CHECK(other.run.summary["seed"] == 99);
    CHECK_FALSE(files_identical(run.dir / "chain.csv", other.run.dir / "chain.csv"));
}

TEST_CASE("replay detects tampering, corruption and version drift") {
    ScratchDir dir;
    const RunOutcome run = run_config(resolve_config(small_logistic()), dir.path() / "run");
    const fs::path meta = run.dir / "meta.json";

    {
        std::ofstream f(run.dir / "logistic_paths.csv", std::ios::app | std::ios::binary);
        f << "tampered\r\n";
    }
    ReplayOptions options;
    options.out = dir.path() / "r1";
    CHECK(error_code_of([&] { (void)replay(meta, options); }) == ErrorCode::ReplayMismatch);

    Json recorded = read_json_file(meta);
    recorded["version"] = "0.0.0-old";
    write_json_file(dir.path() / "old.json", recorded);
    fs::copy_file(run.dir / "logistic_paths.csv", dir.path() / "logistic_paths.csv");
    options.out = dir.path() / "r2";
    CHECK(error_code_of([&] { (void)replay(dir.path() / "old.json", options); }) == ErrorCode::VersionMismatch);
    options.allow_version_mismatch = true;
    options.seed = 1;
    const ReplayOutcome warned = replay(dir.path() / "old.json", options);
    CHECK(warned.warnings.size() == 1);

    Json broken = read_json_file(meta);
    broken.erase("config");
    write_json_file(dir.path() / "broken.json", broken);
    CHECK(error_code_of([&] { (void)replay(dir.path() / "broken.json"); }) == ErrorCode::ConfigError);
    {
        std::ofstream f(dir.path() / "garbage.json");
        f << "{ not json";
    }
    CHECK(error_code_of([&] { (void)replay(dir.path() / "garbage.json"); }) == ErrorCode::ConfigError);
    CHECK(error_code_of([&] { (void)replay(dir.path() / "absent.json"); }) == ErrorCode::ConfigError);
}

TEST_CASE("scenario argument errors surface as ConfigError") {
    ScratchDir dir;
    Json raw = small_logistic();
    raw["u0"] = 2.0;
    CHECK(error_code_of([&] { (void)run_config(resolve_config(raw), dir.path() / "a"); }) == ErrorCode::ConfigError);
    raw = small_chain();
    raw["init"] = "spiral";
    CHECK(error_code_of([&] { (void)run_config(resolve_config(raw), dir.path() / "b"); }) == ErrorCode::ConfigError);
    raw = small_chain();
    raw["n"] = 1;
    CHECK(error_code_of([&] { (void)run_config(resolve_config(raw), dir.path() / "c"); }) == ErrorCode::ConfigError);
}

TEST_CASE("exit codes") {
    CHECK(exit_code_for(ErrorCode::ConfigError) == 2);
    CHECK(exit_code_for(ErrorCode::InvalidArgument) == 2);
    CHECK(exit_code_for(ErrorCode::ZeroVector) == 3);
    CHECK(exit_code_for(ErrorCode::NumericalFailure) == 3);
    CHECK(exit_code_for(ErrorCode::InsufficientTrials) == 3);
    CHECK(exit_code_for(ErrorCode::VersionMismatch) == 4);
    CHECK(exit_code_for(ErrorCode::ReplayMismatch) == 4);
}

TEST_CASE("simplex-ode at beta = 0 follows the closed form") {
    ScratchDir dir;
    const Json raw{{"scenario", "simplex-ode"}, {"seed", 2}, {"beta", 0.0}, {"T", 2.0}, {"dt", 0.01}};
    const RunOutcome out = run_config(resolve_config(raw), dir.path() / "run");
    CHECK(out.summary["closed_form_max_error"].get<double>() <= 1e-6);
    CHECK(out.summary["strictly_increasing"] == true);
    const Table t = read_csv(out.dir / "gamma.csv");
    CHECK(t.rows.size() == 201);
    const std::size_t g = t.column("gamma");
    const std::size_t e = t.column("gamma_exact");
    for (const auto& row : t.rows) CHECK(std::abs(std::stod(row[g]) - std::stod(row[e])) <= 1e-6);
}

TEST_CASE("logistic-sde absorption from the equator is balanced") {
    ScratchDir dir;
    const Json raw{{"scenario", "logistic-sde"}, {"seed", 8}, {"u0", 0.0}, {"paths", 10000}, {"record_paths", 0}};
    const RunOutcome out = run_config(resolve_config(raw), dir.path() / "run");
    const double plus = out.summary["absorbed_plus"].get<double>();
    CHECK(plus >= 0.48);
    CHECK(plus <= 0.52);
    CHECK(out.summary["predicted_plus"].get<double>() == doctest::Approx(0.5));
    CHECK(out.summary["unabsorbed"].get<double>() == 0.0);
}

TEST_CASE("phase-diagram cells") {
    ScratchDir dir;
    Json raw{{"scenario", "phase-diagram"}, {"seed", 4},   {"n", 4},
             {"d", 8},                      {"L", 20},     {"etas", {0.0005, 0.05}},
             {"alphas", {0.0, 0.5}},        {"seeds", 4}};
    const RunOutcome fwd = run_config(resolve_config(raw), dir.path() / "fwd");
    raw["etas"] = {0.05, 0.0005};
    raw["alphas"] = {0.5, 0.0};
    const RunOutcome rev = run_config(resolve_config(raw), dir.path() / "rev");

    auto cells = [](const fs::path& file) {
        const Table t = read_csv(file);
        std::map<std::pair<std::string, std::string>, std::vector<std::string>> out;
        for (const auto& row : t.rows) out[{row[t.column("eta")], row[t.column("alpha")]}] = row;
        return std::make_pair(t, out);
    };
    const auto [tf, cf] = cells(fwd.dir / "phase.csv");
    const auto [tr, cr] = cells(rev.dir / "phase.csv");
    REQUIRE(cf.size() == 4);
    CHECK(cf == cr);

    const std::size_t label = tf.column("label");
    const std::size_t variance = tf.column("m_variance");
    const std::size_t drift = tf.column("m_drift");
    for (const auto& [key, row] : cf) {
        CAPTURE(key.first);
        CAPTURE(key.second);
        if (std::stod(key.second) == 0.0) CHECK(std::stod(row[variance]) <= 1e-24);
        if (std::stod(key.first) * 20 < 0.05) {
            CHECK(row[label] == "Static");
            CHECK(std::stod(row[drift]) < 0.01);
        }
    }
}

TEST_CASE("kernel-check and delta-check summaries") {
    ScratchDir dir;
    const RunOutcome k = run_config(
        resolve_config(Json{{"scenario", "kernel-check"}, {"seed", 3}, {"d", 8}, {"samples", 4000}}), dir.path() / "k");
    CHECK(std::isfinite(k.summary["max_abs_z"].get<double>()));
    CHECK(read_csv(k.dir / "kernel.csv").rows.size() == 64);

    const RunOutcome dc = run_config(
        resolve_config(Json{{"scenario", "delta-check"}, {"seed", 3}, {"ds", {16, 64}}, {"draws", 20000}}),
        dir.path() / "d");
    REQUIRE(dc.summary["per_d"].size() == 2);
    CHECK(dc.summary["per_d"][0]["d"] == 16);
    CHECK(dc.summary["all_within_bound"].is_boolean());
}

}  // TEST_SUITE
