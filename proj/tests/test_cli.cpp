#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("sbo_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int sbo(const std::string& args) {
    const std::string cmd = std::string(SBO_BINARY) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

// Drops the last column (seconds) of a trace CSV.
std::string without_seconds(const std::string& csv) {
    return std::regex_replace(csv, std::regex(",[^,\n]*\n"), "\n");
}

std::string without_timing(const std::string& json) {
    return std::regex_replace(json, std::regex("\"seconds\": [^,\n]*"), "\"seconds\": 0");
}

bool clean(const fs::path& dir) {
    return fs::is_empty(dir);
}

const char* kSmallRocket = R"({
  "application": "rocket", "seed": 3, "output": "unused",
  "sliding": {"n_opt": 5, "n_s": 3, "s_max": 1, "inner_max_iter": 8, "threads": 3},
  "rocket": {"n_r": 16, "n_z": 8, "target": {"kind": "two-step", "samples": 20}}
})";

} // namespace

TEST_CASE("malformed config exits 2 and leaves no artifacts") {
    auto dir = scratch("malformed");
    fs::create_directories(dir / "work");
    write(dir / "bad.json", "{\"sliding\": {\"n_opt\": 5,}");
    CHECK(sbo("rocket --config " + (dir / "bad.json").string() + " --out " + (dir / "work" / "out").string()) == 2);
    CHECK(clean(dir / "work"));
    write(dir / "typo.json", "{\"sliding\": {\"nopt\": 5}}");
    CHECK(sbo("rocket --config " + (dir / "typo.json").string() + " --out " + (dir / "work" / "out").string()) == 2);
    CHECK(clean(dir / "work"));
    CHECK(sbo("rocket --mode sometimes --out " + (dir / "work" / "out").string()) == 2);
    CHECK(sbo("launch") == 2);
    CHECK(sbo("") == 2);
    CHECK(clean(dir / "work"));
}

TEST_CASE("missing input files exit 5, physics failures exit 4") {
    auto dir = scratch("errors");
    fs::create_directories(dir / "work");
    const auto out = (dir / "work" / "out").string();
    CHECK(sbo("topopt --mesh /no/nodes.txt,/no/ele.txt --out " + out) == 5);
    CHECK(sbo("rocket --target /no/profile.csv --out " + out) == 5);

    // Four coplanar vertices: a zero-volume tet.
    write(dir / "nodes.txt", "0 0 0 0\n1 1 0 0\n2 0 1 0\n3 1 1 0\n");
    write(dir / "ele.txt", "0 0 1 2 3\n");
    CHECK(sbo("topopt --mesh " + (dir / "nodes.txt").string() + "," + (dir / "ele.txt").string() + " --out " + out) ==
          4);

    // A burn-rate field with a negative rate.
    std::ostringstream field;
    field << "rate\n";
    for (int i = 0; i < 16 * 8; ++i) field << (i == 5 ? -1.0 : 0.01) << "\n";
    write(dir / "field.csv", field.str());
    write(dir / "sim.json", R"({"rocket": {"n_r": 16, "n_z": 8, "field": "field.csv"}})");
    CHECK(sbo("simulate --config " + (dir / "sim.json").string() + " --out " + out) == 4);
    CHECK(clean(dir / "work"));
}

TEST_CASE("same config and seed give identical artifacts; the snapshot replays the run") {
    auto dir = scratch("determinism");
    write(dir / "run.json", kSmallRocket);
    const auto cfg = (dir / "run.json").string();
    REQUIRE(sbo("rocket --config " + cfg + " --out " + (dir / "a").string()) == 0);
    REQUIRE(sbo("rocket --config " + cfg + " --out " + (dir / "b").string()) == 0);
    for (const char* f : {"field.csv", "profile.csv", "target.csv", "constraints.csv", "weights.txt", "field.vtk"}) {
        INFO(f);
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
        CHECK(!slurp(dir / "a" / f).empty());
    }
    CHECK(without_seconds(slurp(dir / "a" / "trace.csv")) == without_seconds(slurp(dir / "b" / "trace.csv")));
    CHECK(without_timing(slurp(dir / "a" / "summary.json")) == without_timing(slurp(dir / "b" / "summary.json")));

    REQUIRE(sbo("rocket --config " + (dir / "a" / "config.json").string() + " --out " + (dir / "c").string()) == 0);
    CHECK(without_timing(slurp(dir / "a" / "summary.json")) == without_timing(slurp(dir / "c" / "summary.json")));
    CHECK(slurp(dir / "a" / "weights.txt") == slurp(dir / "c" / "weights.txt"));

    // A different seed changes the run.
    REQUIRE(sbo("rocket --config " + cfg + " --seed 4 --out " + (dir / "d").string()) == 0);
    CHECK(slurp(dir / "a" / "weights.txt") != slurp(dir / "d" / "weights.txt"));
}

TEST_CASE("compare writes one row per mode with fixed covering the sliding k") {
    auto dir = scratch("compare");
    write(dir / "run.json", kSmallRocket);
    REQUIRE(sbo("compare --config " + (dir / "run.json").string() + " --out " + (dir / "cmp").string()) == 0);
    std::ifstream in(dir / "cmp" / "comparison.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "mode,k,objective,metric,evaluations,seconds,feasible");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        REQUIRE(cells.size() == 7);
        rows.push_back(cells);
    }
    REQUIRE(rows.size() == 3);
    CHECK(rows[0][0] == "sliding");
    CHECK(rows[1][0] == "fixed");
    CHECK(rows[2][0] == "conventional");
    CHECK(rows[0][1] == rows[1][1]);
    CHECK(rows[2][1] == std::to_string(16 * 8));
    for (const char* m : {"sliding", "fixed", "conventional"})
        CHECK(fs::exists(dir / "cmp" / (std::string("trace_") + m + ".csv")));
}

TEST_CASE("basis, simulate and topopt write their artifacts") {
    auto dir = scratch("commands");
    write(dir / "r.json", kSmallRocket);
    REQUIRE(sbo("basis --config " + (dir / "r.json").string() + " --out " + (dir / "basis").string()) == 0);
    for (const char* f : {"eigenvalues.csv", "mode_000.vtk", "mode_003.vtk", "basis.bin", "summary.json", "config.json"})
        CHECK(fs::exists(dir / "basis" / f));
    REQUIRE(sbo("simulate --config " + (dir / "r.json").string() + " --out " + (dir / "sim").string()) == 0);
    CHECK(fs::exists(dir / "sim" / "thrust.csv"));
    CHECK(fs::exists(dir / "sim" / "field.vtk"));

    // Tiny slab with explicit supports and loads files.
    write(dir / "t.json", R"({"sliding": {"n_opt": 4, "n_s": 2, "s_max": 1, "inner_max_iter": 10},
                              "topopt": {"box": {"nx": 4, "ny": 2, "nz": 1, "lx": 2, "ly": 1, "lz": 0.5}}})");
    write(dir / "bc.csv", "node,component,value\n0,x,0\n0,y,0\n0,z,0\n5,x,0\n5,y,0\n5,z,0\n15,x,0\n15,y,0\n15,z,0\n"
                          "10,x,0\n10,y,0\n10,z,0\n20,0,0\n20,1,0\n20,2,0\n25,0,0\n25,1,0\n25,2,0\n");
    write(dir / "loads.csv", "node,fx,fy,fz\n4,0,-10,0\n19,0,-10,0\n");
    REQUIRE(sbo("topopt --config " + (dir / "t.json").string() + " --bc " + (dir / "bc.csv").string() + " --loads " +
                (dir / "loads.csv").string() + " --mode fixed --out " + (dir / "topo").string()) == 0);
    for (const char* f : {"density.vtk", "material.vtk", "elements.csv", "trace.csv", "weights.txt", "summary.json"})
        CHECK(fs::exists(dir / "topo" / f));
    CHECK(slurp(dir / "topo" / "config.json").find("\"mode\": \"fixed\"") != std::string::npos);
    CHECK(slurp(dir / "topo" / "config.json").find("bc.csv") != std::string::npos);
}
