#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

#include "fact/csv.hpp"
#include "fact/rng.hpp"
#include "fact/sim_bench.hpp"

using namespace fact;
namespace fs = std::filesystem;

namespace {

const std::string kCli = FACT_CLI_PATH;

struct RunResult {
    int exit_code = -1;
    std::string stderr_text;
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path err_file = dir / "stderr.txt";
    const std::string command = kCli + " " + args + " > /dev/null 2> " + err_file.string();
    const int status = std::system(command.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(err_file);
    std::stringstream ss;
    ss << in.rdbuf();
    r.stderr_text = ss.str();
    return r;
}

fs::path make_workdir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fact_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_dataset_csv(const Dataset& d, const fs::path& path) {
    std::vector<std::string> header;
    for (std::size_t c = 0; c < d.n_cols(); ++c) header.push_back(d.name_of(c));
    header.push_back("y");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        std::vector<std::string> row;
        for (std::size_t c = 0; c < d.n_cols(); ++c) {
            row.push_back(format_double(d.features(r, c)));
        }
        row.push_back(format_double(d.response[r]));
        rows.push_back(std::move(row));
    }
    write_csv_file(path.string(), {}, header, rows);
}

}  // namespace

TEST_CASE("test subcommand rejects tiny inputs with exit 2") {
    const fs::path dir = make_workdir("tiny");
    std::ofstream(dir / "tiny.csv") << "a,b,y\n0.1,0.2,1\n0.3,0.4,2\n0.5,0.6,3\n";
    const RunResult r = run_cli("test --csv " + (dir / "tiny.csv").string() +
                                    " --response y --out " + dir.string(),
                                dir);
    CHECK(r.exit_code == 2);
    CHECK(r.stderr_text.find("inference sample too small") != std::string::npos);
}

TEST_CASE("test subcommand exits 3 when every feature degenerates") {
    const fs::path dir = make_workdir("degenerate");
    std::ostringstream csv;
    csv << "a,b,y\n";
    for (int i = 0; i < 20; ++i) csv << 0.05 * i << "," << 1.0 - 0.05 * i << ",7\n";
    std::ofstream(dir / "const.csv") << csv.str();
    const RunResult r = run_cli("--out " + dir.string() + " test --csv " +
                                    (dir / "const.csv").string() + " --response y",
                                dir);
    CHECK(r.exit_code == 3);
}

TEST_CASE("test subcommand names a missing response column") {
    const fs::path dir = make_workdir("missing");
    std::ofstream(dir / "d.csv") << "a,b\n0.1,0.2\n0.3,0.4\n";
    const RunResult r = run_cli("test --csv " + (dir / "d.csv").string() +
                                    " --response target --out " + dir.string(),
                                dir);
    CHECK(r.exit_code == 2);
    CHECK(r.stderr_text.find("target") != std::string::npos);
}

TEST_CASE("test subcommand finds the strong component in a case-I dataset") {
    const fs::path dir = make_workdir("casei");
    SimulationSpec spec;
    spec.n = 300;
    spec.p = 200;
    spec.lambda = 0.3;
    spec.sigma = 5.0;
    spec.seed = 0;
    write_dataset_csv(simulate_dataset(spec, 0), dir / "casei.csv");

    const RunResult r = run_cli("--seed 0 --out " + dir.string() + " test --csv " +
                                    (dir / "casei.csv").string() +
                                    " --response y --features X11",
                                dir);
    REQUIRE(r.exit_code == 0);
    const nlohmann::json doc = nlohmann::json::parse(slurp(dir / "reports.json"));
    REQUIRE(doc["reports"].size() == 1);
    CHECK(doc["reports"][0]["feature"] == "X11");
    CHECK(doc["reports"][0]["p_value"].get<double>() < 0.05);
    CHECK(doc["reports"][0].contains("components"));

    // Identical invocations produce byte-identical outputs.
    const std::string first = slurp(dir / "reports.csv");
    const RunResult again = run_cli("--seed 0 --out " + dir.string() + " test --csv " +
                                        (dir / "casei.csv").string() +
                                        " --response y --features X11",
                                    dir);
    REQUIRE(again.exit_code == 0);
    CHECK(slurp(dir / "reports.csv") == first);
}

TEST_CASE("simulate subcommand writes deterministic tables and validates reps") {
    const fs::path dir = make_workdir("simulate");
    std::ofstream(dir / "config.json") << R"({
      "experiments": [
        {"kind": "size_power", "name": "toy",
         "sim": {"n": 80, "p": 43, "lambda": 0.0, "sigma": 5.0, "reps": 3,
                  "seed": 1, "case_label": "toy"},
         "fact": {"variant": "general", "k_n": 1, "split_mode": "oob",
                   "forest": {"n_trees": 50}},
         "alphas": [0.1, 0.05, 0.025], "features": [0, 10, 20, 30, 1, 11, 21, 31]}
      ]
    })";
    const std::string args = "--config " + (dir / "config.json").string() +
                             " --out " + dir.string() + " simulate";
    const RunResult r = run_cli(args, dir);
    REQUIRE(r.exit_code == 0);
    const std::string table = slurp(dir / "toy.csv");
    CHECK(table.find("# config_hash=") == 0);
    CHECK(table.find("case,alpha,X1,X11,X21,X31,X2,X12,X22,X32") != std::string::npos);
    // 3 alpha rows plus header and comments.
    const RunResult again = run_cli(args, dir);
    REQUIRE(again.exit_code == 0);
    CHECK(slurp(dir / "toy.csv") == table);

    std::ofstream(dir / "bad.json") << R"({
      "experiments": [
        {"kind": "qq", "name": "none",
         "sim": {"n": 60, "p": 43, "reps": 0, "seed": 1},
         "fact": {"forest": {"n_trees": 40}}, "feature": 11}
      ]
    })";
    const RunResult bad = run_cli("--config " + (dir / "bad.json").string() + " --out " +
                                      dir.string() + " simulate",
                                  dir);
    CHECK(bad.exit_code == 2);
}

TEST_CASE("importance subcommand") {
    const fs::path dir = make_workdir("importance");
    // Constant response: MDI must be identically zero.
    std::ostringstream csv;
    csv << "a,b,y\n";
    Rng rng_seeded(1);
    for (int i = 0; i < 40; ++i) {
        csv << 0.01 * i << "," << 0.025 * i << ",2.5\n";
    }
    std::ofstream(dir / "const.csv") << csv.str();
    const RunResult r = run_cli("--out " + dir.string() + " importance --csv " +
                                    (dir / "const.csv").string() +
                                    " --response y --methods MDI",
                                dir);
    REQUIRE(r.exit_code == 0);
    const std::string table = slurp(dir / "importance.csv");
    std::istringstream lines(table);
    std::string line;
    int data_lines = 0;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("feature", 0) == 0) continue;
        CHECK(line.substr(line.size() - 2) == ",0");
        ++data_lines;
    }
    CHECK(data_lines == 2);

    const RunResult bad = run_cli("--out " + dir.string() + " importance --csv " +
                                      (dir / "const.csv").string() +
                                      " --response y --methods BOGUS",
                                  dir);
    CHECK(bad.exit_code == 2);
}

TEST_CASE("rolling subcommand") {
    const fs::path dir = make_workdir("rolling");
    // Synthetic 246-row monthly series with independent noise.
    Rng rng(7);
    std::ostringstream csv;
    csv << "date,f1,f2,f3,y\n";
    for (int i = 0; i < 246; ++i) {
        const int year = 2000 + i / 12, month = 1 + i % 12;
        char date[16];
        std::snprintf(date, sizeof(date), "%04d-%02d", year, month);
        csv << date << "," << rng.uniform01() << "," << rng.uniform01() << ","
            << rng.uniform01() << "," << rng.normal() << "\n";
    }
    std::ofstream(dir / "series.csv") << csv.str();
    std::ofstream(dir / "cfg.json") << R"({
      "variant": "general", "k_n": 1, "split_mode": "oob",
      "forest": {"n_trees": 100}, "seed": 0
    })";

    const RunResult r = run_cli("--config " + (dir / "cfg.json").string() + " --out " +
                                    dir.string() + " rolling --csv " +
                                    (dir / "series.csv").string() +
                                    " --response y --date-column date" +
                                    " --window 60 --step 3 --fdr 0.2",
                                dir);
    REQUIRE(r.exit_code == 0);
    const CsvTable table = read_csv_file((dir / "rolling.csv").string());
    // 63 windows of 3 features each.
    CHECK(table.rows.size() == 63 * 3);
    CHECK(table.header ==
          std::vector<std::string>{"window_end", "feature", "p_value", "fdr_reject"});
    int flagged = 0;
    for (const auto& row : table.rows) {
        if (row[3] == "1") ++flagged;
    }
    CHECK(static_cast<double>(flagged) / table.rows.size() < 0.25);
    // Window labels are month strings; the first covers rows 0..59.
    CHECK(table.rows.front()[0] == "2004-12");

    // Window longer than the series.
    const RunResult too_long = run_cli(
        "--out " + dir.string() + " rolling --csv " + (dir / "series.csv").string() +
            " --response y --date-column date --window 300 --step 3",
        dir);
    CHECK(too_long.exit_code == 2);

    // Non-monotone dates.
    std::ofstream(dir / "bad_dates.csv")
        << "date,f1,y\n2001-01,0.5,1\n2001-03,0.6,2\n2001-02,0.7,3\n";
    const RunResult bad = run_cli(
        "--out " + dir.string() + " rolling --csv " + (dir / "bad_dates.csv").string() +
            " --response y --date-column date --window 20",
        dir);
    CHECK(bad.exit_code == 2);
    CHECK(bad.stderr_text.find("not strictly increasing") != std::string::npos);
}
