// Subprocess-level checks of the covsteer binary: exit codes, emitted files,
// and the path-CSV row contract. The binary location comes from the
// COVSTEER_BIN environment variable (set by ctest); the cases are skipped
// when it is absent (e.g. running the test binary by hand).

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "covsteer/scenario.hpp"

namespace fs = std::filesystem;

namespace {

const char* binary() { return std::getenv("COVSTEER_BIN"); }

int run(const std::string& args, const fs::path& log) {
    std::string cmd = std::string(binary()) + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++count;
    return count;
}

fs::path sandbox() {
    fs::path dir = fs::temp_directory_path() / "covsteer_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("cli: check exit codes and report wording") {
    if (!binary()) return;
    fs::path dir = sandbox();

    CHECK(run("check example2 --out " + (dir / "ok").string(), dir / "ok.log") == 0);

    // scalar b(t) = t - 0.5: still certified total, but uniform is false
    covsteer::Scenario vanishing = covsteer::example1_scenario();
    nlohmann::json j = vanishing.to_json();
    j["system"]["B"] = {{"form", "polynomial"},
                        {"rows", 1},
                        {"cols", 1},
                        {"coeffs", {{{-0.5, 1.0}}}}};
    std::ofstream(dir / "vanishing.json") << j.dump();
    CHECK(run("check " + (dir / "vanishing.json").string() + " --out " +
                  (dir / "v").string(),
              dir / "v.log") == 0);
    std::string log = slurp(dir / "v.log");
    CHECK(log.find("uniform:         false") != std::string::npos);

    // B = 0: not controllable, nonzero exit
    j["system"]["B"] = {{"form", "constant"}, {"value", {{0.0}}}};
    std::ofstream(dir / "dead.json") << j.dump();
    CHECK(run("check " + (dir / "dead.json").string() + " --out " + (dir / "d").string(),
              dir / "d.log") != 0);

    // malformed scenario: validation exit code 2
    std::ofstream(dir / "broken.json") << "{\"system\": 42}";
    CHECK(run("check " + (dir / "broken.json").string(), dir / "b.log") == 2);
}

TEST_CASE("cli: solve emits gains and an honest non-convergence exit") {
    if (!binary()) return;
    fs::path dir = sandbox();

    CHECK(run("solve example2 --emit-pi --out " + (dir / "s").string(), dir / "s.log") == 0);
    CHECK(fs::exists(dir / "s" / "gains.csv"));
    CHECK(fs::exists(dir / "s" / "pi.csv"));
    CHECK(fs::exists(dir / "s" / "solve.json"));

    // zero Newton budget with homotopy off cannot converge: exit code 3
    nlohmann::json j = covsteer::example2_scenario().to_json();
    j["solver"]["max_iterations"] = 0;
    j["solver"]["homotopy"] = false;
    std::ofstream(dir / "stuck.json") << j.dump();
    CHECK(run("solve " + (dir / "stuck.json").string() + " --out " + (dir / "x").string(),
              dir / "x.log") == 3);
}

TEST_CASE("cli: simulate writes the documented row counts") {
    if (!binary()) return;
    fs::path dir = sandbox();
    int code = run("simulate example1 --paths 10 --dt 1e-3 --seed 3 --out " +
                       (dir / "sim").string(),
                   dir / "sim.log");
    CHECK(code == 0);
    // moments.csv: header + 1001 steps; paths.csv: header + 10 rows per step
    CHECK(count_lines(dir / "sim" / "moments.csv") == 1002);
    CHECK(count_lines(dir / "sim" / "paths.csv") == 1 + 1001 * 10);
    CHECK(fs::exists(dir / "sim" / "summary.json"));
}
