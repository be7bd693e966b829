#include "etcons/errors.hpp"
#include "etcons/scenario.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace etcons;

namespace {

const std::filesystem::path scenario_dir = ETCONS_SCENARIO_DIR;

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

const char* minimal = R"({
  "mode": "homogeneous",
  "system": {"A": [[0, 1], [-1, 0]], "B": [[0], [1]]},
  "protocol": {"c": 5, "delta": 0.5, "mu": 0.5, "nu": 0.5},
  "network": {
    "nodes": 3,
    "graphs": [{"edges": [[1, 2]]}, {"edges": [[2, 3]]}],
    "schedule": {"dwell": 0.5, "intervals": [[1, 2]]}
  },
  "simulation": {"horizon": 3, "step": 0.001, "record_stride": 10}
})";

std::string expect_parse_error(const std::string& text) {
    try {
        (void)parse_scenario(text);
    } catch (const ParseError& e) {
        return e.where();
    }
    FAIL("no parse error raised");
    return {};
}

const CheckResult* find_check(const ValidationReport& r, const std::string& prefix) {
    for (const auto& c : r.checks) {
        if (c.name.rfind(prefix, 0) == 0) {
            return &c;
        }
    }
    return nullptr;
}

} // namespace

TEST_CASE("minimal scenario parses") {
    const Scenario sc = parse_scenario(minimal);
    CHECK(sc.mode == Mode::Homogeneous);
    CHECK(sc.nodes == 3);
    CHECK(sc.graphs.size() == 2);
    CHECK(sc.graphs[1].followers.adjacent(1, 2));
    REQUIRE(sc.pattern.size() == 1);
    CHECK(sc.pattern[0][1].graph == 1);
    CHECK(sc.pattern[0][1].duration == 0.5);
    CHECK(sc.sim.record_stride == 10);
    CHECK_FALSE(sc.G.has_value());
    CHECK(validate_scenario(sc).ok());
}

TEST_CASE("parse errors carry a location") {
    CHECK(expect_parse_error("{\n  \"mode\": \"homogeneous\",\n  oops\n}") == "line 3, column 3");

    std::string bad_field = minimal;
    bad_field.replace(bad_field.find("\"delta\""), 7, "\"detla\"");
    CHECK(expect_parse_error(bad_field) == "/protocol/detla");

    std::string ragged = minimal;
    ragged.replace(ragged.find("[-1, 0]"), 7, "[-1]");
    CHECK(expect_parse_error(ragged) == "/system/A/1");

    std::string bad_node = minimal;
    bad_node.replace(bad_node.find("[2, 3]"), 6, "[2, 9]");
    CHECK(expect_parse_error(bad_node) == "/network/graphs/1/edges/0/1");

    std::string bad_graph = minimal;
    bad_graph.replace(bad_graph.find("\"intervals\": [[1, 2]]"), 21, "\"intervals\": [[1, 4]]");
    CHECK(expect_parse_error(bad_graph) == "/network/schedule/intervals/0/1");

    std::string no_mode = minimal;
    no_mode.replace(no_mode.find("\"homogeneous\""), 13, "\"mixed\"");
    CHECK(expect_parse_error(no_mode) == "/mode");

    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ParseError);
}

TEST_CASE("subinterval objects and explicit durations") {
    std::string text = minimal;
    text.replace(text.find("\"intervals\": [[1, 2]]"), 21,
                 R"("intervals": [[{"graph": 1, "duration": 0.75}, {"graph": 2}]])");
    const Scenario sc = parse_scenario(text);
    CHECK(sc.pattern[0][0].duration == 0.75);
    CHECK(sc.pattern[0][1].duration == 0.5);
}

TEST_CASE("validation names the failing assumption") {
    const Scenario sc = load_scenario(scenario_dir / "../tests/data/unstable_A.json");
    const auto report = validate_scenario(sc);
    CHECK_FALSE(report.ok());
    const auto* a1 = find_check(report, "Assumption 1: A neutrally stable");
    REQUIRE(a1 != nullptr);
    CHECK_FALSE(a1->passed);
    CHECK(a1->detail.find("eigenvalue 1") != std::string::npos);
    CHECK(report.to_text().find("INVALID") != std::string::npos);
}

TEST_CASE("validation reports a disconnected schedule per interval") {
    std::string text = minimal;
    text.replace(text.find("{\"edges\": [[2, 3]]}"), 19, "{\"edges\": []}");
    const auto report = validate_scenario(parse_scenario(text));
    const auto* a2 = find_check(report, "Assumption 2");
    REQUIRE(a2 != nullptr);
    CHECK_FALSE(a2->passed);
    CHECK(a2->detail.find("interval 1: fails") != std::string::npos);
}

TEST_CASE("example fixtures validate") {
    for (const char* name : {"example1.json", "example2.json"}) {
        const auto report = validate_scenario(load_scenario(scenario_dir / name));
        INFO(report.to_text());
        CHECK(report.ok());
    }
    const auto report = validate_scenario(load_scenario(scenario_dir / "example2.json"));
    const auto* a5 = find_check(report, "Assumption 5: transmission-zero rank, follower 4");
    REQUIRE(a5 != nullptr);
    CHECK(a5->passed);
    CHECK(a5->detail.find("0 + 1i") != std::string::npos);
}

TEST_CASE("example 2 gains") {
    const Scenario sc = load_scenario(scenario_dir / "example2.json");
    const auto gains = design_heterogeneous_gains(sc);
    for (int i = 1; i <= 4; ++i) {
        const double k = i;
        const Mat pi = (Mat(2, 2) << 1 / k, 1 / k, -1, 2 / k).finished();
        CHECK((gains.regulator.Pi[static_cast<std::size_t>(i - 1)] - pi).lpNorm<Eigen::Infinity>() <
              1e-9);
    }
    CHECK(gains.regulator.unique);

    Scenario bad = sc;
    bad.followers[0].K1 = (Mat(1, 2) << 1, 1).finished();
    CHECK_THROWS_AS(design_heterogeneous_gains(bad), ValidationError);

    Scenario synthesized = sc;
    for (auto& f : synthesized.followers) {
        f.K1.reset();
    }
    const auto g2 = design_heterogeneous_gains(synthesized);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& f = synthesized.followers[i].system;
        CHECK(feedback_margin(f.A, f.B, g2.K1[i]) >= 0.5 - 1e-9);
    }
}

TEST_CASE("homogeneous gain is designed when not given") {
    const Scenario sc = parse_scenario(minimal);
    const auto g = design_homogeneous_gains(sc);
    CHECK(g.designed);
    CHECK((g.G - (Mat(1, 2) << 0, -1).finished()).norm() < 1e-9);
}

TEST_CASE("output files") {
    const Scenario sc = parse_scenario(minimal);
    const RunResult result = run_scenario(sc);
    const std::string states = states_csv(result.trace);
    std::istringstream lines(states);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "t,agent_1_x1,agent_1_x2,agent_2_x1,agent_2_x2,agent_3_x1,agent_3_x2");
    std::size_t rows = 0;
    for (std::string line; std::getline(lines, line);) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 6);
    }
    CHECK(rows == 1 + 3000 / 10);

    const std::string events = events_csv(result.trace);
    CHECK(events.rfind("agent,time,reason\n", 0) == 0);

    const auto metrics = metrics_json(result);
    CHECK(metrics["event_count"].size() == 3);
    CHECK(metrics["min_interevent_gap"].size() == 3);
    CHECK(metrics.contains("bound_check"));
    CHECK(metrics["consensus_error_norm"].size() == rows);

    const auto gains = gains_json(result);
    CHECK(gains["G_source"] == "designed");

    const auto dir = std::filesystem::temp_directory_path() / "etcons_scenario_test";
    std::filesystem::remove_all(dir);
    write_outputs(result, dir);
    for (const char* f : {"states.csv", "events.csv", "metrics.json", "gains.json"}) {
        CHECK(std::filesystem::exists(dir / f));
    }
    CHECK(read_file(dir / "events.csv") == events);
    std::filesystem::remove_all(dir);

    CHECK_THROWS_AS(write_outputs(result, "/proc/etcons_cannot_write_here"), Error);
}

TEST_CASE("example 1 run writes positive gaps for every agent") {
    const Scenario sc = load_scenario(scenario_dir / "example1.json");
    const RunResult result = run_scenario(sc);
    const auto metrics = metrics_json(result);
    REQUIRE(metrics["min_interevent_gap"].size() == 6);
    for (const auto& g : metrics["min_interevent_gap"]) {
        REQUIRE(g.is_number());
        CHECK(g.get<double>() > 0.0);
    }
    CHECK(metrics["bound_check"]["violations"] == 0);
}

TEST_CASE("same seed reproduces outputs byte for byte") {
    Scenario sc = load_scenario(scenario_dir / "example2.json");
    sc.sim.horizon = 5.0;
    const RunResult a = run_scenario(sc);
    const RunResult b = run_scenario(sc);
    CHECK(events_csv(a.trace) == events_csv(b.trace));
    CHECK(states_csv(a.trace) == states_csv(b.trace));
    CHECK(metrics_json(a).dump() == metrics_json(b).dump());
}
