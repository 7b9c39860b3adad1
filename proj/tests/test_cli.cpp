#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <fstream>
#include <sstream>
#include <string>

#include "calmprobe/builtins.hpp"
#include "calmprobe/report.hpp"

using namespace calmprobe;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args, const std::string& tag) {
    const std::string out_file = "cli_out_" + tag + ".txt";
    const std::string cmd =
        std::string("\"") + CALM_PROBE_BIN + "\" " + args + " > " + out_file + " 2> /dev/null";
    const int status = std::system(cmd.c_str());
    RunResult res;
    res.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    res.output = buf.str();
    return res;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

} // namespace

TEST_CASE("falsify exit codes follow the verdict") {
    SECTION("counterexamples are falsified") {
        const RunResult r = run_cli("falsify --builtin example-4-2 --samples 300", "f42");
        CHECK(r.exit_code == 2);
        CHECK(contains(r.output, "calmness = Falsified"));
    }
    SECTION("the calm center is not falsified") {
        const RunResult r = run_cli("falsify --builtin example-4-3-center --samples 300", "f43");
        CHECK(r.exit_code == 0);
        CHECK(contains(r.output, "calmness = NotFalsified"));
    }
    SECTION("a bad candidate is rejected with exit 3") {
        std::string text = builtin_model_text("example-4-2");
        const std::string marker = "[candidate] x = (0), y = (0)";
        REQUIRE(text.find(marker) != std::string::npos);
        text.replace(text.find(marker), marker.size(), "[candidate] x = (0), y = (0.5)");
        std::ofstream("cli_bad_center.model") << text;
        const RunResult r = run_cli("falsify --model cli_bad_center.model", "frej");
        CHECK(r.exit_code == 3);
        CHECK(contains(r.output, "CenterRejected"));
    }
}

TEST_CASE("usage errors exit with code 1") {
    CHECK(run_cli("falsify --builtin no-such-model", "u1").exit_code == 1);
    CHECK(run_cli("falsify", "u2").exit_code == 1);
    CHECK(run_cli("falsify --model does_not_exist.model", "u3").exit_code == 1);
    CHECK(run_cli("phi-sweep --builtin example-4-2 --box 1:2:3", "u4").exit_code == 1);
    CHECK(run_cli("falsify --builtin example-4-2 --tol bogus=1", "u5").exit_code == 1);
}

TEST_CASE("phi sweep tabulates the closed-form value function") {
    const RunResult r =
        run_cli("phi-sweep --builtin example-4-2 --box -2:2 --points 9", "sweep");
    REQUIRE(r.exit_code == 0);
    CHECK(contains(r.output, "\"(-2)\",finite,-4"));
    CHECK(contains(r.output, "\"(-1.5)\",finite,-2.25"));
    CHECK(contains(r.output, "\"(0)\",finite,"));
    CHECK(contains(r.output, "\"(2)\",finite,-4"));
}

TEST_CASE("reports are byte-identical for a fixed seed") {
    const RunResult a = run_cli(
        "falsify --builtin example-4-2 --seed 7 --samples 200 --out cli_rep_a.txt", "da");
    const RunResult b = run_cli(
        "falsify --builtin example-4-2 --seed 7 --samples 200 --out cli_rep_b.txt", "db");
    REQUIRE(a.exit_code == 2);
    REQUIRE(b.exit_code == 2);
    CHECK(a.output == b.output);
    CHECK(read_text_file("cli_rep_a.txt") == read_text_file("cli_rep_b.txt"));
    CHECK(a.output == read_text_file("cli_rep_a.txt"));

    const RunResult c =
        run_cli("certify --builtin fully-linear-random --seed 5 --samples 120", "dc");
    const RunResult d =
        run_cli("certify --builtin fully-linear-random --seed 5 --samples 120", "dd");
    REQUIRE(c.exit_code == 0);
    CHECK(c.output == d.output);
}

TEST_CASE("certify reports the expected verdict lines") {
    const RunResult r =
        run_cli("certify --builtin example-4-3-center --samples 200", "cert43");
    REQUIRE(r.exit_code == 0);
    CHECK(contains(r.output, "verdict = ConstantRankHolds"));
    CHECK(contains(r.output, "verdict = Consistent"));
    CHECK(contains(r.output, "[section uwsm-notice]")); // c depends on x here

    const RunResult q = run_cli("certify --builtin example-4-4 --samples 200", "cert44");
    REQUIRE(q.exit_code == 0);
    CHECK(contains(q.output, "verdict = Violated"));
    CHECK(contains(q.output, "violated_subset = {1}"));
    CHECK(contains(q.output, "verdict = Consistent"));

    const RunResult f =
        run_cli("certify --builtin fully-linear-random --seed 5 --samples 120", "certlin");
    REQUIRE(f.exit_code == 0);
    CHECK(contains(f.output, "[section uwsm]"));
    CHECK(contains(f.output, "modulus_M = "));
}

TEST_CASE("report subcommand re-renders stored reports") {
    const RunResult made = run_cli(
        "falsify --builtin example-4-5 --samples 150 --out cli_rep_store.txt", "mk");
    REQUIRE(made.exit_code == 2);
    const RunResult rendered = run_cli("report --in cli_rep_store.txt", "rr");
    CHECK(rendered.exit_code == 0);
    CHECK(rendered.output == read_text_file("cli_rep_store.txt"));

    std::ofstream("cli_rep_corrupt.txt") << "this is not a report\ngarbage\n";
    CHECK(run_cli("report --in cli_rep_corrupt.txt", "rc").exit_code == 1);
    CHECK(run_cli("report --in cli_missing.txt", "rm").exit_code == 1);
}

TEST_CASE("environment seed is honored and overridden by --seed") {
    const std::string base = std::string("\"") + CALM_PROBE_BIN +
                             "\" certify --builtin fully-linear-random --samples 60";
    REQUIRE(std::system(("CALM_PROBE_SEED=5 " + base + " > cli_env_a.txt 2>/dev/null").c_str()) == 0);
    REQUIRE(std::system(("CALM_PROBE_SEED=9 " + base + " > cli_env_b.txt 2>/dev/null").c_str()) == 0);
    REQUIRE(std::system(
                ("CALM_PROBE_SEED=9 " + base + " --seed 5 > cli_env_c.txt 2>/dev/null").c_str()) ==
            0);
    const std::string a = read_text_file("cli_env_a.txt");
    const std::string b = read_text_file("cli_env_b.txt");
    const std::string c = read_text_file("cli_env_c.txt");
    CHECK(a != b);  // different seeds pick different random instances
    CHECK(a == c);  // explicit --seed wins over the environment
}
