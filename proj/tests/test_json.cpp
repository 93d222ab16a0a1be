// Strict run-configuration parsing: schema violations name the offending
// field, grids accept both explicit lists and min/max/count ranges, and the
// manifest reflects the fully resolved configuration.

#include <doctest.h>

#include <json.hpp>
#include <string>

#include "wqed/json_io.hpp"

using namespace wqed;
using nlohmann::json;

namespace {

std::string thrown_message(const std::string& text) {
    try {
        jio::parse_run_config(text);
    } catch (const config_error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("command names round trip") {
    using exp::Command;
    for (Command c : {Command::GroundState, Command::Commutator, Command::Scatter,
                      Command::FluorescenceScan, Command::ClusterCheck, Command::SMatrix,
                      Command::DecayFit}) {
        CHECK(exp::command_from_name(exp::command_name(c)) == c);
    }
    CHECK_THROWS_AS(exp::command_from_name("groundstat"), config_error);
}

TEST_CASE("minimal configurations parse with defaults resolved") {
    const auto gs = jio::parse_run_config(
        R"({"command":"groundstate","groundstate":{"lattice":{"L":9,"n_max":2}}})");
    CHECK(gs.command == exp::Command::GroundState);
    REQUIRE(gs.groundstate.has_value());
    CHECK(gs.groundstate->lattice.L == 9);
    CHECK(gs.groundstate->lattice.J == doctest::Approx(1.0 / pi));  // default
    CHECK(gs.seed == 1);
    CHECK(gs.threads == 1);
    CHECK_NOTHROW(gs.validate());

    const auto sc = jio::parse_run_config(R"({
        "command": "scatter", "seed": 9, "threads": 2,
        "scatter": {
            "lattice": {"L": 101, "n_max": 2, "g": 0.3, "rwa": true},
            "packets": [{"k_bar": 1.5707963, "sigma": 0.2, "x_bar": -30}],
            "plan": {"t_final": 40.0, "dt_report": 10.0}
        }})");
    CHECK(sc.seed == 9);
    CHECK(sc.threads == 2);
    REQUIRE(sc.scatter.has_value());
    CHECK(sc.scatter->cfg.packets.size() == 1);
    CHECK(sc.scatter->cfg.plan.t_final == doctest::Approx(40.0));

    const auto smx_cfg = jio::parse_run_config(R"({
        "command": "smatrix",
        "smatrix": {
            "scatterer": {"M": 1, "M_prime": 1, "E": [0.0], "E_tilde": [1.0],
                          "g": [[[0.3, 0.0]]]},
            "k_grid": {"min": 0.5, "max": 1.5, "count": 11}
        }})");
    REQUIRE(smx_cfg.smatrix.has_value());
    CHECK(smx_cfg.smatrix->k_grid.size() == 11);
    CHECK(smx_cfg.smatrix->scatterer.channels() == 1);
}

TEST_CASE("grids: list form and range form agree") {
    const std::string head =
        R"({"command":"commutator","commutator":{"envelope1":{"k_bar":1.0},"envelope2":{"k_bar":1.0},"separations":)";
    const std::string tail = "}}";
    const auto a = jio::parse_run_config(head + "[2.0, 4.0, 6.0]" + tail);
    const auto b = jio::parse_run_config(head + R"({"min":2.0,"max":6.0,"count":3})" + tail);
    REQUIRE(a.commutator.has_value());
    REQUIRE(b.commutator.has_value());
    REQUIRE(a.commutator->separations.size() == 3);
    REQUIRE(b.commutator->separations.size() == 3);
    for (int i = 0; i < 3; ++i)
        CHECK(a.commutator->separations[i] ==
              doctest::Approx(b.commutator->separations[i]));
}

TEST_CASE("schema violations name the offending field") {
    // unknown nested field, full dotted path
    const auto msg1 = thrown_message(
        R"({"command":"groundstate","groundstate":{"lattice":{"LL":5}}})");
    CHECK(msg1.find("lattice.LL") != std::string::npos);

    // wrong type at the top level
    const auto msg2 = thrown_message(R"({"command":"groundstate","seed":"soon",
        "groundstate":{"lattice":{}}})");
    CHECK(msg2.find("seed") != std::string::npos);

    // payload key not matching the command
    const auto msg3 = thrown_message(
        R"({"command":"groundstate","scatter":{"lattice":{}},
            "groundstate":{"lattice":{}}})");
    CHECK(msg3.find("scatter") != std::string::npos);

    // malformed document
    CHECK_THROWS_AS(jio::parse_run_config("{"), config_error);

    // bad enumeration value
    const auto msg4 = thrown_message(
        R"({"command":"commutator","commutator":{
            "envelope1":{"kind":"boxcar"},"envelope2":{},"separations":[1.0]}})");
    CHECK(msg4.find("kind") != std::string::npos);

    // too many packets
    CHECK_THROWS_AS(jio::parse_run_config(R"({
        "command":"scatter","scatter":{"lattice":{},
        "packets":[{"x_bar":-30},{"x_bar":-40},{"x_bar":-50}],
        "plan":{"t_final":1.0}}})"),
                    config_error);

    // nonpositive worker count
    CHECK_THROWS_AS(jio::parse_run_config(R"({"command":"groundstate","threads":0,
        "groundstate":{"lattice":{}}})"),
                    config_error);
}

TEST_CASE("scatterer coupling must be levels x channels of [re, im] pairs") {
    CHECK_THROWS_AS(jio::parse_run_config(R"({
        "command":"smatrix","smatrix":{
            "scatterer":{"M":2,"M_prime":1,"E":[0.0,0.2],"E_tilde":[1.0],
                         "g":[[[0.3,0.0]]]},
            "k_grid":[1.0]}})"),
                    config_error);
}

TEST_CASE("manifest carries the version and the resolved configuration") {
    const auto cfg = jio::parse_run_config(R"({
        "command":"decay-fit","decay-fit":{
            "scatterer":{"M":1,"M_prime":1,"E":[0.0],"E_tilde":[0.0],
                         "g":[[[0.1085,0.0]]]},
            "envelope1":{"kind":"lorentzian","k_bar":0.06,"sigma":0.01},
            "envelope2":{"kind":"lorentzian","k_bar":-0.06,"sigma":0.01},
            "separations":{"min":2.0,"max":201.0,"count":200},
            "kernel_c":[{"pole":[0.0,-0.11],"strength":[0.02,0.0]}]}})");
    const auto m = json::parse(jio::manifest_json(cfg));
    CHECK(m.at("version").get<std::string>() == std::string(exp::version()));
    CHECK(m.at("command").get<std::string>() == "decay-fit");
    CHECK(m.at("seed").get<std::uint64_t>() == 1);
    CHECK(m.at("threads").get<int>() == 1);
    REQUIRE(m.contains("decay-fit"));
    const auto& job = m.at("decay-fit");
    CHECK(job.at("envelope1").at("kind").get<std::string>() == "lorentzian");
    CHECK(job.at("separations").size() == 200);
    CHECK(job.at("kernel_c").size() == 1);
    // scan defaults are spelled out
    CHECK(job.at("scan").at("grid_n").get<int>() == 48);
}

TEST_CASE("loading a missing file is an I/O failure") {
    CHECK_THROWS_AS(jio::load_run_config("/nonexistent/dir/cfg.json"), io_error);
}
