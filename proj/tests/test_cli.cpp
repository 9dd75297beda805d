#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "kin/config.hpp"
#include "kin/ensemble.hpp"

using namespace kin;
namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "kin_cli_test";

int run(const std::string& args, const std::string& log = "log.txt") {
    const std::string cmd = "cd '" + kDir.string() + "' && '" KINETIC_BIN "' " + args + " > " + log + " 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

void write(const std::string& name, const std::string& text) { std::ofstream(kDir / name) << text; }

struct Fixture {
    Fixture() {
        fs::remove_all(kDir);
        fs::create_directories(kDir);
        write("small.ini", "[physical]\nc = 8\nT = 0.125\n[numerics]\nn_x = 3\nn_p = 3\n[output]\ninterval = 4\n");
    }
};
const Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    fixture();
    CHECK(run("--help") == 0);
    CHECK(run("") == 2);
    CHECK(run("vp") == 2);
    CHECK(run("vp run --config missing.ini") == 2);
    write("bad_c.ini", "[physical]\nc = 0.5\n");
    CHECK(run("vp run --config bad_c.ini") == 2);
    CHECK(slurp(kDir / "log.txt").find("c >= 1") != std::string::npos);
    write("bad_key.ini", "[physical]\nspeed = 3\n");
    CHECK(run("vp run --config bad_key.ini") == 2);
}

TEST_CASE("vp run writes snapshots, diagnostics and the effective config") {
    fixture();
    REQUIRE(run("vp run --config small.ini --out vp") == 0);
    for (const char* f : {"vp/effective_config.ini", "vp/diagnostics.csv", "vp/vp_00000.csv", "vp/vp_00008.csv"})
        CHECK(fs::exists(kDir / f));
    auto cfg = parse_config((kDir / "small.ini").string());
    auto echoed = parse_config((kDir / "vp/effective_config.ini").string());
    CHECK(echoed == cfg);
    double t = 0, c = 0;
    auto e = read_snapshot((kDir / "vp/vp_00008.csv").string(), &t, &c);
    CHECK(t == doctest::Approx(0.125));
    CHECK(e.size() > 0);
}

TEST_CASE("seeded runs are bit-identical") {
    fixture();
    REQUIRE(run("lvp run --config small.ini --out a --seed 7") == 0);
    REQUIRE(run("lvp run --config small.ini --out b --seed 7") == 0);
    CHECK(slurp(kDir / "a/lvp_00008.csv") == slurp(kDir / "b/lvp_00008.csv"));
    CHECK(slurp(kDir / "a/effective_config.ini").find("seed = 7") != std::string::npos);
}

TEST_CASE("vn and dvn runs") {
    fixture();
    REQUIRE(run("vn run --config small.ini --out vn") == 0);
    auto diag = slurp(kDir / "vn/diagnostics.csv");
    CHECK(diag.rfind("t,energy,", 0) == 0);
    CHECK(std::count(diag.begin(), diag.end(), '\n') == 4);

    REQUIRE(run("dvn run --config small.ini --out dvn") == 0);
    CHECK(fs::exists(kDir / "dvn/dvn_00008.csv"));
    REQUIRE(run("vp run --config small.ini --out vp0") == 0);
    REQUIRE(run("dvn init --config small.ini --density vp0/vp_00000.csv --out init") == 0);
    CHECK(slurp(kDir / "init/dvn_init.csv").rfind("x,y,z,psi,ex,ey,ez", 0) == 0);

    // a fixed point cut off after two sweeps is a numerical failure
    write("short.ini", "[physical]\nc = 8\nT = 0.125\n[numerics]\nn_x = 3\nn_p = 3\nfp_max_iter = 2\n");
    CHECK(run("dvn run --config short.ini --out short") == 3);
}

TEST_CASE("darwin fields at a single probe") {
    fixture();
    write("probe.txt", "# one point\n0.25, -0.1, 0.3\n");
    REQUIRE(run("darwin fields --config small.ini --probes probe.txt --t 0 --out dar") == 0);
    auto text = slurp(kDir / "dar/darwin_fields.csv");
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    write("bad_probe.txt", "0.25 x\n");
    CHECK(run("darwin fields --config small.ini --probes bad_probe.txt --t 0 --out dar") == 2);
}

TEST_CASE("kernel self-test and its mutation mode") {
    fixture();
    CHECK(run("kernels selftest --cases 5 --seed 3") == 0);
    CHECK(slurp(kDir / "log.txt").find("FAIL") == std::string::npos);
    CHECK(run("kernels selftest --cases 5 --perturb 1.001") == 3);
}

TEST_CASE("study with failing runs reports incomplete") {
    fixture();
    write("fail.ini",
          "[physical]\nT = 0.0625\n[numerics]\nn_x = 3\nn_p = 3\nfp_max_iter = 1\n[study]\nf_probes = 10\n");
    CHECK(run("study run --config fail.ini --out study") == 4);
    CHECK(fs::exists(kDir / "study/report.md"));
    CHECK(slurp(kDir / "study/report.md").find("INCOMPLETE") != std::string::npos);
}
