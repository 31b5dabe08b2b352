#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "sst/protocol.hpp"
#include "sst/serialize.hpp"

using namespace sst;
using namespace sst::testing;

TEST_CASE("state files round-trip bit-identically") {
    Gen gen(881);
    for (int i = 0; i < 25; ++i) {
        auto st = gen.state(5);
        const json j = state_to_json(st);
        auto back = state_from_json<Rat>(j);
        CHECK(back.weights() == st.weights());
        CHECK(back.probs() == st.probs());
        CHECK(state_to_json(back) == j);
    }
}

TEST_CASE("state file parsing") {
    json j = {{"schema", "sst-state/1"},
              {"exact", true},
              {"levels", json::array({{{"weight", "1/3"}, {"prob", "2/3"}},
                                      {{"weight", "1/3"}, {"prob", "1/3"}},
                                      {{"weight", "1/3"}, {"prob", "0"}}})}};
    auto st = state_from_json<Rat>(j);
    CHECK(st.z() == Rat(1));
    CHECK(st.levels()[0].prob == Rat(2, 3));

    // floats are rejected by the exact reader but fine for the float one
    json bad = j;
    bad["levels"][0]["prob"] = 0.25;
    bad["levels"][1]["prob"] = 0.75;
    bad["levels"][2]["prob"] = 0;
    CHECK_THROWS_AS(state_from_json<Rat>(bad), validation_error);
    bad["exact"] = false;
    CHECK_NOTHROW(state_from_json<double>(bad));

    json energies = {{"schema", "sst-state/1"},
                     {"kT", 2.0},
                     {"levels", json::array({{{"energy", 0.0}, {"prob", 0.5}},
                                             {{"energy", 1.0}, {"prob", 0.5}}})}};
    auto est = state_from_json<double>(energies);
    CHECK(est.levels()[1].weight == doctest::Approx(std::exp(-0.5)));
    energies.erase("kT");
    CHECK_THROWS_AS(state_from_json<double>(energies), validation_error);

    CHECK_THROWS_AS(state_from_json<Rat>(json::object()), validation_error);
    json mixed = j;
    mixed["levels"][0] = {{"energy", 1.0}, {"prob", "1"}};
    CHECK_THROWS_AS(state_from_json<Rat>(mixed), validation_error);
}

TEST_CASE("strategy files round-trip") {
    auto build = extraction_protocol(appendix_rho(), appendix_sigma(), Rat(1, 2));
    const json j = strategy_to_json(build.strategy);
    auto back = strategy_from_json<Rat>(j);
    REQUIRE(back.actions.size() == build.strategy.actions.size());
    CHECK(back.target_logwork == build.strategy.target_logwork);
    CHECK(strategy_to_json(back) == j);

    // the round-tripped strategy behaves identically
    auto out = enumerate_paths(build.rho_padded, back);
    auto stats = success_stats(out, back.target_logwork);
    CHECK(stats.p_success == Rat(1, 2));
}

TEST_CASE("strategy parsing errors") {
    CHECK_THROWS_AS(strategy_from_json<Rat>(json::object()), validation_error);
    json unknown = {{"actions", json::array({{{"type", "warp"}}})}};
    CHECK_THROWS_AS(strategy_from_json<Rat>(unknown), validation_error);
}

TEST_CASE("raise sentinel spelling") {
    json j = {{"actions", json::array({{{"type", "extract"}, {"levels", {0}}, {"w", "inf"}}})}};
    auto s = strategy_from_json<Rat>(j);
    REQUIRE(s.actions.size() == 1);
    CHECK(std::get<Extract<Rat>>(s.actions[0]).to_infinity);
    CHECK(strategy_to_json(s)["actions"][0]["w"] == "inf");
}
