#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sst/protocol.hpp"
#include "sst/serialize.hpp"

using namespace sst;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(SST_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path fixture_dir() {
    auto dir = fs::temp_directory_path() / "sst_cli_fixtures";
    fs::create_directories(dir);
    return dir;
}

std::string write_fixture(const std::string& name, const json& j) {
    const auto path = fixture_dir() / name;
    std::ofstream out(path);
    out << j.dump(2);
    return path.string();
}

std::string worked_initial() {
    return write_fixture("rho.json",
                         {{"schema", "sst-state/1"},
                          {"exact", true},
                          {"levels", json::array({{{"weight", "1/3"}, {"prob", "2/3"}},
                                                  {{"weight", "1/3"}, {"prob", "1/3"}},
                                                  {{"weight", "1/3"}, {"prob", "0"}}})}});
}

std::string worked_final() {
    return write_fixture("sigma.json",
                         {{"schema", "sst-state/1"},
                          {"exact", true},
                          {"levels", json::array({{{"weight", "1/6"}, {"prob", "1/2"}},
                                                  {{"weight", "1/3"}, {"prob", "1/2"}},
                                                  {{"weight", "0"}, {"prob", "0"}}})}});
}

}  // namespace

TEST_CASE("work command on the worked pair") {
    auto r = run_cli("work " + worked_initial() + " " + worked_final() + " --eps 1/2");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["m"] == "4/3");
    CHECK(j["work_expr"] == "kT*ln(4/3)");
    CHECK(j["work_nats"].get<double>() == doctest::Approx(std::log(4.0 / 3)));
}

TEST_CASE("work command on identical files") {
    auto r = run_cli("work " + worked_initial() + " " + worked_initial() + " --eps 0");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["m"] == "1");
    CHECK(j["work_nats"].get<double>() == 0.0);
}

TEST_CASE("work command curve output") {
    const auto csv = (fixture_dir() / "curve.csv").string();
    auto r = run_cli("work " + worked_initial() + " " + worked_final() +
                     " --eps 1/2 --curve 4 --csv " + csv);
    REQUIRE(r.exit_code == 0);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "series,x,y");
    int lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines >= 4 + 3 + 2);  // grid points plus both curves
}

TEST_CASE("entropy command") {
    auto r = run_cli("entropy " + worked_initial() + " --eps 1/2");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["h_max_eps_bits"].get<double>() == doctest::Approx(-2.0));
    CHECK(j["d_eps"] == "1/4");
}

TEST_CASE("protocol command exact run") {
    const auto strat = (fixture_dir() / "strategy.json").string();
    auto r = run_cli("protocol " + worked_initial() + " " + worked_final() +
                     " --eps 1/2 --exact --emit-strategy " + strat);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["m"] == "4/3");
    CHECK(j["p_success"] == "1/2");
    CHECK(j["success_work_exact"] == true);
    CHECK(j["final_matches_target"] == true);

    // the emitted strategy feeds simulate and audit
    auto padded = write_fixture("rho_padded.json", [&] {
        auto rho = state_from_json<Rat>(load_json_file(worked_initial()));
        auto sig = state_from_json<Rat>(load_json_file(worked_final()));
        return state_to_json(extraction_protocol(rho, sig, Rat(1, 2)).rho_padded);
    }());

    auto audit = run_cli("audit " + padded + " " + strat);
    REQUIRE(audit.exit_code == 0);
    const json a = json::parse(audit.out);
    CHECK(a["min_slack"] == "0");
    CHECK(a["holds"] == true);

    auto sim = run_cli("simulate " + padded + " " + strat + " --runs 2000 --seed 9");
    REQUIRE(sim.exit_code == 0);
    const json s = json::parse(sim.out);
    CHECK(std::abs(s["success_rate"].get<double>() - 0.5) < 0.05);

    auto sim2 = run_cli("simulate " + padded + " " + strat + " --runs 2000 --seed 9");
    CHECK(sim2.out == sim.out);  // byte-identical under a fixed seed
}

TEST_CASE("laws command") {
    auto before = write_fixture("deg_before.json",
                                {{"exact", true},
                                 {"levels", json::array({{{"weight", "1"}, {"prob", "1/2"}},
                                                         {{"weight", "1"}, {"prob", "1/2"}},
                                                         {{"weight", "1"}, {"prob", "0"}}})}});
    auto after = write_fixture("deg_after.json",
                               {{"exact", true},
                                {"levels", json::array({{{"weight", "1"}, {"prob", "2/3"}},
                                                        {{"weight", "1"}, {"prob", "1/6"}},
                                                        {{"weight", "1"}, {"prob", "1/6"}}})}});
    auto r = run_cli("laws " + before + " " + after);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["entropy_condition_holds"] == true);
    CHECK(j["majorization_condition_holds"] == false);
    CHECK(j["w0_m"] == "3/4");
}

TEST_CASE("exit codes") {
    auto bad = write_fixture("bad.json", {{"levels", json::array({{{"prob", "1"}}})}});
    CHECK(run_cli("entropy " + bad).exit_code == 2);

    auto missing = run_cli("entropy /nonexistent/state.json");
    CHECK(missing.exit_code == 2);

    auto r = run_cli("work " + worked_initial() + " " + worked_final() + " --eps 3/2");
    CHECK(r.exit_code == 3);

    CHECK(run_cli("nonsense").exit_code == 2);
}
