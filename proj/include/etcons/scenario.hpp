#pragma once

/**
 * @file scenario.hpp
 * @brief Scenario files: parsing, assumption checks, runs and output files.
 *
 * A scenario is one JSON document. Matrices are row-major nested lists,
 * agents and graphs are numbered from 1 and the leader is node 0. See
 * README.md for the full grammar.
 */

#include "etcons/engine.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace etcons {

enum class Mode { Homogeneous, Heterogeneous };

struct FollowerSpec {
    RegulatorAgent system;
    std::optional<Mat> K1;
};

struct Scenario {
    Mode mode = Mode::Homogeneous;

    // Homogeneous system and protocol.
    Mat A;
    Mat B;
    std::optional<Mat> G;
    double delta = 0.5;

    // Heterogeneous system and protocol.
    Mat S;
    Vec w0;
    std::vector<FollowerSpec> followers;
    std::optional<Mat> output_map;
    double feedback_margin = 0.5;
    DegreeMode degree_mode = DegreeMode::Literal;

    // Shared protocol parameters.
    double c = 1.0;
    double mu = 0.5;
    double nu = 0.5;

    // Network.
    std::size_t nodes = 0;
    std::vector<LeaderGraph> graphs;
    std::vector<std::vector<SwitchStep>> pattern;
    double dwell = 0.0;
    std::optional<double> period_bound;
    std::size_t repeat = 0;

    SimulationConfig sim;

    SwitchingSchedule schedule() const;
};

/// @throws ParseError with a line:column or JSON-pointer location.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

struct CheckResult {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool ok() const;
    std::string to_text() const;
};

/// Machine checks of every standing assumption plus config sanity.
ValidationReport validate_scenario(const Scenario& sc);

struct HomogeneousGains {
    Mat G;
    NeutralDecomposition decomposition;
    bool designed = true;
};

struct HeterogeneousGains {
    RegulatorSolution regulator;
    std::vector<Mat> K1;
    std::vector<Mat> K2;
};

struct RunResult {
    SimulationTrace trace;
    std::optional<HomogeneousGains> homogeneous;
    std::optional<HeterogeneousGains> heterogeneous;
    std::optional<ZenoReport> zeno;
};

HomogeneousGains design_homogeneous_gains(const Scenario& sc);
HeterogeneousGains design_heterogeneous_gains(const Scenario& sc);
HomoParams homogeneous_params(const Scenario& sc, const Mat& gain);

/// Design gains and simulate. @throws ValidationError, DivergenceError.
RunResult run_scenario(const Scenario& sc);

/// Header "t,agent_1_x1,...", one row per recorded time.
std::string states_csv(const SimulationTrace& trace);
/// Header "agent,time,reason", agents numbered from 1.
std::string events_csv(const SimulationTrace& trace);
nlohmann::json metrics_json(const RunResult& result);
nlohmann::json gains_json(const RunResult& result);

/// Write states.csv, events.csv, metrics.json and gains.json into `dir`.
void write_outputs(const RunResult& result, const std::filesystem::path& dir);

} // namespace etcons
