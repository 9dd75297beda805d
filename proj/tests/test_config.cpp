#include "doctest.h"
#include "kin/config.hpp"
#include "kin/errors.hpp"

using namespace kin;

TEST_CASE("minimal config gets defaults") {
    auto c = parse_config_text("[physical]\nc = 16\n");
    CHECK(c.c == 16);
    CHECK(c.T == 0.5);
    CHECK(c.dt == 1.0 / 64);
    CHECK(c.eps() == 0.125);
    auto top = parse_config_text("c = 4\n");
    CHECK(top.c == 4);
    auto e = echo_config(c);
    CHECK(e.find("[numerics]") != std::string::npos);
    CHECK(e.find("c = 16") != std::string::npos);
}

TEST_CASE("constraint and key errors carry line numbers") {
    try {
        parse_config_text("# comment\n[physical]\nc = 0.5\n", "f.ini");
        FAIL("expected error");
    } catch (const Error& e) {
        std::string m = e.what();
        CHECK(m.find("f.ini:3") != std::string::npos);
        CHECK(m.find("c >= 1") != std::string::npos);
        CHECK(e.exit_code() == 2);
    }
    CHECK_THROWS_AS(parse_config_text("[physical]\nspeed = 3\n"), Error);
    CHECK_THROWS_AS(parse_config_text("[physical]\ndt = -1\n"), Error);
    CHECK_THROWS_AS(parse_config_text("[physical]\ndt = abc\n"), Error);
    CHECK_THROWS_AS(parse_config_text("[nope]\n"), Error);
    CHECK_THROWS_AS(parse_config_text("[numerics]\nn_x = 2.5\n"), Error);
    CHECK_THROWS_AS(parse_config_text("[study]\nc_ladder = 4, 0.5\n"), Error);
}

TEST_CASE("echo round trip") {
    auto a = parse_config_text(
        "seed = 9\n[physical]\nc = 4\ndt = 1/128\n[numerics]\nstreaming = half\nsoftening = cutoff\n"
        "[study]\nc_ladder = 4, 8, 16, 32\nrefine = false\n[output]\nprobes = p.csv\n");
    CHECK(a.dt == 1.0 / 128);
    auto b = parse_config_text(echo_config(a));
    CHECK(a == b);
    CHECK(parse_config_text(echo_config(b)) == b);
}
