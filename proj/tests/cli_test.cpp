// End-to-end tests of the command-line binary: exit codes, artifact schema
// pinning, and byte-level reproducibility of re-runs. The binary path comes
// in through the RECALX_CLI_PATH compile definition.
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Workspace {
    fs::path root;
    Workspace() {
        root = fs::temp_directory_path() /
               ("recalx_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(root);
    }
    ~Workspace() {
        std::error_code ec;
        fs::remove_all(root, ec);
    }
    fs::path dir(const std::string& name) const { return root / name; }

private:
    static int& counter() {
        static int n = 0;
        return n;
    }
};

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run_cli(const Workspace& ws, const std::string& args) {
    const fs::path log = ws.root / "last_run.log";
    const std::string cmd =
        std::string(RECALX_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.output = slurp(log);
    if (status == -1) return r;
    if (WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
    return r;
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

std::set<std::string> key_set(const json& j) {
    std::set<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.insert(k);
    return keys;
}

// One shared pipeline (generate -> train -> calibrate) reused across cases;
// built lazily so a single failure does not cascade into misleading ones.
struct Pipeline {
    Workspace ws;
    fs::path data_csv, model_json, calibrator_json;

    Pipeline() {
        REQUIRE(run_cli(ws, "gen-data --kind planted --w 2,1,0 --n 400 --seed 7 --out " +
                                ws.dir("gen").string())
                    .exit_code == 0);
        data_csv = ws.dir("gen") / "data.csv";
        REQUIRE(fs::exists(data_csv));

        REQUIRE(run_cli(ws, "train --data " + data_csv.string() +
                                " --n-classes 2 --hidden 8 --epochs 10 --seed 7 --out " +
                                ws.dir("train").string())
                    .exit_code == 0);
        model_json = ws.dir("train") / "model.json";
        REQUIRE(fs::exists(model_json));

        REQUIRE(run_cli(ws, "calibrate --data " + data_csv.string() + " --n-classes 2 --model " +
                                model_json.string() +
                                " --method recalx --bins 3 --reps 2 --strategy zero --seed 7 "
                                "--out " +
                                ws.dir("cal").string())
                    .exit_code == 0);
        calibrator_json = ws.dir("cal") / "calibrator.json";
        REQUIRE(fs::exists(calibrator_json));
    }
};

Pipeline& pipeline() {
    static Pipeline p;
    return p;
}

}  // namespace

TEST_CASE("exit code 0 on --help and successful runs") {
    Workspace ws;
    CHECK(run_cli(ws, "--help").exit_code == 0);
    CHECK(run_cli(ws, "gen-data --help").exit_code == 0);
}

TEST_CASE("exit code 1 on usage errors, naming the offending value") {
    Workspace ws;
    CHECK(run_cli(ws, "no-such-command").exit_code == 1);
    CHECK(run_cli(ws, "gen-data --n 10").exit_code == 1);  // missing --out

    const auto bad_kind =
        run_cli(ws, "gen-data --kind fractal --n 10 --out " + ws.dir("x").string());
    CHECK(bad_kind.exit_code == 1);
    CHECK(bad_kind.output.find("fractal") != std::string::npos);

    const auto bad_method =
        run_cli(ws, "explain --data nope.csv --n-classes 2 --model nope.json --method foo --out " +
                        ws.dir("y").string());
    CHECK(bad_method.exit_code == 1);
    CHECK(bad_method.output.find("foo") != std::string::npos);
    CHECK(bad_method.output.find("shapley") != std::string::npos);
}

TEST_CASE("exit code 2 on runtime failures") {
    Workspace ws;
    const auto missing = run_cli(ws, "train --data /nonexistent/void.csv --n-classes 2 --out " +
                                         ws.dir("t").string());
    CHECK(missing.exit_code == 2);
    CHECK(missing.output.find("error") != std::string::npos);
}

TEST_CASE("gen-data writes the dataset, generator spec, and run record") {
    const Pipeline& p = pipeline();
    const fs::path gen = p.ws.dir("gen");
    CHECK(fs::exists(gen / "genspec.json"));
    CHECK(fs::exists(gen / "run.json"));

    const json run = load_json(gen / "run.json");
    CHECK(run.at("version") == "1.0.0");
    CHECK(run.at("command") == "gen-data");
    CHECK(run.at("config").at("seed") == 7);
    CHECK(run.at("config_hash").get<std::string>().substr(0, 2) == "0x");

    // CSV body: provenance comment, header, then n rows.
    std::istringstream csv(slurp(p.data_csv));
    std::string line;
    REQUIRE(std::getline(csv, line));
    CHECK(line.rfind("# recalx version=1 seed=7 config_hash=0x", 0) == 0);
    REQUIRE(std::getline(csv, line));
    CHECK(line == "f0,f1,f2,label");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 400);
}

TEST_CASE("measure emits the pinned profile schema") {
    const Pipeline& p = pipeline();
    const fs::path out = p.ws.dir("measure");
    const auto r = run_cli(
        p.ws, "measure --data " + p.data_csv.string() + " --n-classes 2 --model " +
                  p.model_json.string() + " --calibrator " + p.calibrator_json.string() +
                  " --strategy zero --levels 0,0.5,1 --reps 2 --seed 11 --out " + out.string());
    REQUIRE(r.exit_code == 0);

    // profile.json: exactly these keys, no drift in either direction.
    const json prof = load_json(out / "profile.json");
    const std::set<std::string> expected = {"version",  "strategy",  "levels",
                                            "ce_per_level", "ce_avg", "ce_max",
                                            "estimator", "seed",      "config_hash"};
    CHECK(key_set(prof) == expected);
    CHECK(prof.at("version") == 1);
    CHECK(prof.at("strategy") == "zero-baseline");
    CHECK(prof.at("levels").size() == 3);
    CHECK(prof.at("ce_per_level").size() == 3);
    CHECK(prof.at("estimator").at("kind") == "exact-groupby");
    CHECK(prof.at("seed") == 11);

    // profile.csv: one provenance comment line, pinned header, one row per level.
    std::istringstream csv(slurp(out / "profile.csv"));
    std::string line;
    REQUIRE(std::getline(csv, line));
    CHECK(std::regex_match(
        line, std::regex("# recalx version=1 seed=11 config_hash=0x[0-9a-f]{16}")));
    REQUIRE(std::getline(csv, line));
    CHECK(line == "level,ce");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 3);
}

TEST_CASE("a run re-driven from its run.json reproduces artifact bytes") {
    const Pipeline& p = pipeline();
    const fs::path first = p.ws.dir("m1");
    REQUIRE(run_cli(p.ws, "measure --data " + p.data_csv.string() + " --n-classes 2 --model " +
                              p.model_json.string() +
                              " --strategy zero --levels 0,0.5,1 --reps 2 --seed 13 --out " +
                              first.string())
                .exit_code == 0);

    const fs::path second = p.ws.dir("m2");
    REQUIRE(run_cli(p.ws, "measure --config " + (first / "run.json").string() + " --out " +
                              second.string())
                .exit_code == 0);

    CHECK(slurp(second / "profile.json") == slurp(first / "profile.json"));
    CHECK(slurp(second / "profile.csv") == slurp(first / "profile.csv"));

    // Explicit flags still win over the config file.
    const fs::path third = p.ws.dir("m3");
    REQUIRE(run_cli(p.ws, "measure --config " + (first / "run.json").string() +
                              " --seed 14 --out " + third.string())
                .exit_code == 0);
    const json prof = load_json(third / "profile.json");
    CHECK(prof.at("seed") == 14);
}

TEST_CASE("plain temperature scaling equals a one-bin per-level fit") {
    const Pipeline& p = pipeline();

    const fs::path ts_dir = p.ws.dir("cal_ts");
    REQUIRE(run_cli(p.ws, "calibrate --data " + p.data_csv.string() + " --n-classes 2 --model " +
                              p.model_json.string() +
                              " --method ts --strategy zero --reps 2 --seed 21 --out " +
                              ts_dir.string())
                .exit_code == 0);

    const fs::path one_bin_dir = p.ws.dir("cal_b1");
    REQUIRE(run_cli(p.ws, "calibrate --data " + p.data_csv.string() + " --n-classes 2 --model " +
                              p.model_json.string() +
                              " --method recalx --bins 1 --strategy zero --reps 2 --seed 21 "
                              "--out " +
                              one_bin_dir.string())
                .exit_code == 0);

    const json ts = load_json(ts_dir / "calibrator.json");
    const json b1 = load_json(one_bin_dir / "calibrator.json");
    REQUIRE(ts.at("temperatures").size() == 1);
    REQUIRE(b1.at("temperatures").size() == 1);
    CHECK(ts.at("B") == 1);
    CHECK(b1.at("B") == 1);
    const double t_ts = ts.at("temperatures")[0].get<double>();
    const double t_b1 = b1.at("temperatures")[0].get<double>();
    CHECK(std::abs(t_ts - t_b1) < 1e-3);
}

TEST_CASE("explain writes attributions for the requested rows") {
    const Pipeline& p = pipeline();
    const fs::path out = p.ws.dir("explain");
    REQUIRE(run_cli(p.ws, "explain --data " + p.data_csv.string() + " --n-classes 2 --model " +
                              p.model_json.string() + " --calibrator " +
                              p.calibrator_json.string() +
                              " --method shapley --strategy zero --n 5 --seed 9 --out " +
                              out.string())
                .exit_code == 0);

    const json global = load_json(out / "global.json");
    CHECK(global.at("method") == "shapley");
    CHECK(global.at("n_explained") == 5);
    CHECK(global.at("ranking").size() == 3);

    std::istringstream csv(slurp(out / "attributions.csv"));
    std::string line;
    REQUIRE(std::getline(csv, line));  // provenance comment
    REQUIRE(std::getline(csv, line));
    CHECK(line == "sample_id,target_class,method,feature_0,feature_1,feature_2,base_value");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 5);
}

TEST_CASE("verify-decomposition reports a near-zero residual for the oracle") {
    Workspace ws;
    const fs::path gen = ws.dir("gen");
    REQUIRE(run_cli(ws, "gen-data --kind finite --n 50 --seed 3 --out " + gen.string())
                .exit_code == 0);
    REQUIRE(fs::exists(gen / "joint.json"));

    const fs::path out = ws.dir("vd");
    const auto r = run_cli(ws, "verify-decomposition --joint " + (gen / "joint.json").string() +
                                   " --strategy zero --seed 3 --out " + out.string());
    REQUIRE(r.exit_code == 0);
    const json d = load_json(out / "decomposition.json");
    CHECK(d.at("per_coalition").size() == 8);  // 2^3 masks
    CHECK(d.at("max_abs_residual").get<double>() <= 1e-9);
    for (const auto& row : d.at("per_coalition")) {
        CHECK(row.at("kept").get<std::string>().substr(0, 2) == "0x");
    }
}

TEST_CASE("verify-bound records a paired scale sweep") {
    Workspace ws;
    const fs::path gen = ws.dir("gen");
    REQUIRE(run_cli(ws, "gen-data --kind finite --n 50 --seed 3 --out " + gen.string())
                .exit_code == 0);

    const fs::path out = ws.dir("vb");
    const auto r = run_cli(ws, "verify-bound --joint " + (gen / "joint.json").string() +
                                   " --strategy zero --delta 0.1 --trials 40 --scales 1,4 "
                                   "--seed 5 --out " +
                                   out.string());
    REQUIRE(r.exit_code == 0);
    const json b = load_json(out / "bound.json");
    CHECK(b.at("per_scale").size() == 2);
    CHECK(b.at("mean_lhs").size() == 2);
    CHECK(b.at("mean_lhs_non_decreasing") == true);
    const double violation = b.at("per_scale")[1].at("violation_rate").get<double>();
    CHECK(violation <= 0.1);
}
