// End-to-end checks of the command-line tool: subcommands, formats, exit codes.
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "test_util.hpp"

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string tmp = std::string(CPES_BUILD_DIR) + "/cli_out.tmp";
    const std::string cmd = std::string(CPES_CLI_PATH) + " " + args + " > " + tmp + " 2>&1";
    const int rc = std::system(cmd.c_str());
    std::ifstream f(tmp);
    std::stringstream ss;
    ss << f.rdbuf();
    std::remove(tmp.c_str());
    return {WEXITSTATUS(rc), ss.str()};
}

std::string case_arg() { return "--case " + testutil::data_path("case24_ieee_rts.m"); }
std::string weights_arg() { return "--weights " + testutil::data_path("weights_rts24.json"); }
std::string scenario_arg() { return "--scenario " + testutil::data_path("scenario_rts24.json"); }

}  // namespace

TEST_CASE("powerflow subcommand emits a full state table", "[cli]") {
    auto res = run_cli("powerflow " + case_arg());
    REQUIRE(res.exit_code == 0);
    auto j = nlohmann::json::parse(res.out);
    CHECK(j["buses"].size() == 24);
    CHECK(j["converged"].get<bool>());
}

TEST_CASE("missing case file exits with the input-error code", "[cli]") {
    auto res = run_cli("powerflow --case /nonexistent/case.m");
    CHECK(res.exit_code == 2);
}

TEST_CASE("csv format is honored", "[cli]") {
    auto res = run_cli("powerflow " + case_arg() + " --format csv");
    REQUIRE(res.exit_code == 0);
    CHECK(res.out.rfind("bus,vm_pu", 0) == 0);
}

TEST_CASE("score subcommand flags the expected buses", "[cli]") {
    auto res = run_cli("score " + case_arg() + " " + weights_arg() + " " + scenario_arg());
    REQUIRE(res.exit_code == 0);
    auto j = nlohmann::json::parse(res.out);
    std::vector<int> flagged;
    for (const auto& row : j["buses"])
        if (row["flagged"].get<bool>()) flagged.push_back(row["bus"].get<int>());
    CHECK(flagged == std::vector<int>{15, 16, 24});
}

TEST_CASE("score without a weights file is an input error", "[cli]") {
    auto res = run_cli("score " + case_arg() + " " + scenario_arg());
    CHECK(res.exit_code == 2);
}

TEST_CASE("deterministic reports", "[cli]") {
    const std::string args = "score " + case_arg() + " " + weights_arg() + " " +
                             scenario_arg() + " --format csv";
    auto a = run_cli(args);
    auto b = run_cli(args);
    REQUIRE(a.exit_code == 0);
    CHECK(a.out == b.out);
}

TEST_CASE("opf traditional and cyber modes", "[cli][slow]") {
    auto t = run_cli("opf " + case_arg() + " --mode traditional");
    REQUIRE(t.exit_code == 0);
    auto jt = nlohmann::json::parse(t.out);
    CHECK(jt["total_cost"].get<double>() == Catch::Approx(49903.5432).epsilon(0.005));

    auto c = run_cli("opf " + case_arg() + " --mode cyber " + weights_arg() + " " +
                     scenario_arg());
    REQUIRE(c.exit_code == 0);
    auto jc = nlohmann::json::parse(c.out);
    CHECK(jc["cyber"]["total_cost"].get<double>() ==
          Catch::Approx(53621.1357).epsilon(0.005));

    auto miss = run_cli("opf " + case_arg() + " --mode cyber");
    CHECK(miss.exit_code == 2);
}

TEST_CASE("cyber mode with an unreachable threshold matches traditional",
          "[cli][slow]") {
    auto res = run_cli("opf " + case_arg() + " --mode cyber " + weights_arg() + " " +
                       scenario_arg() + " --rho 1.0");
    REQUIRE(res.exit_code == 0);
    auto j = nlohmann::json::parse(res.out);
    CHECK(j["cyber"]["total_cost"].get<double>() ==
          Catch::Approx(j["traditional"]["total_cost"].get<double>()).margin(1.0));
}

TEST_CASE("compare emits line deltas", "[cli][slow]") {
    auto res = run_cli("compare " + case_arg() + " " + weights_arg() + " " + scenario_arg());
    REQUIRE(res.exit_code == 0);
    auto j = nlohmann::json::parse(res.out);
    REQUIRE(j.contains("lines"));
    bool found = false;
    for (const auto& row : j["lines"]) {
        if (row["from"] == 14 && row["to"] == 16) {
            found = true;
            CHECK(row["delta_pp"].get<double>() < -5.0);
        }
    }
    CHECK(found);
}

TEST_CASE("validate lints the configuration", "[cli]") {
    auto ok = run_cli("validate " + case_arg() + " " + weights_arg() + " " + scenario_arg());
    CHECK(ok.exit_code == 0);
    CHECK(ok.out.find("ok") != std::string::npos);

    // scenario referencing a bus outside the case is rejected
    const std::string bad = std::string(CPES_BUILD_DIR) + "/bad_scn.json";
    {
        std::ofstream f(bad);
        f << R"({"rho": 0.2, "zeta": {"99": 1}})";
    }
    auto res = run_cli("validate " + case_arg() + " --scenario " + bad);
    CHECK(res.exit_code == 2);
    std::remove(bad.c_str());
}
