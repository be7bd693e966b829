// etcons: validate and run event-triggered consensus scenarios.
//
// Exit codes: 0 success, 1 validation failure, 2 parse error,
// 3 divergence, 4 output or other runtime error.

#include "etcons/errors.hpp"
#include "etcons/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

enum Exit { Ok = 0, Invalid = 1, BadInput = 2, Diverged = 3, Failed = 4 };

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> step;
    std::optional<double> horizon;
    std::optional<std::string> degree_mode;
};

etcons::Scenario load(const std::string& path, const Overrides& o) {
    etcons::Scenario sc = etcons::load_scenario(path);
    if (o.seed) {
        sc.sim.seed = *o.seed;
    }
    if (o.step) {
        sc.sim.step = *o.step;
    }
    if (o.horizon) {
        sc.sim.horizon = *o.horizon;
    }
    if (o.degree_mode) {
        sc.degree_mode = etcons::parse_degree_mode(*o.degree_mode);
    }
    return sc;
}

int validate(const std::string& path, const Overrides& o) {
    const etcons::Scenario sc = load(path, o);
    const etcons::ValidationReport report = etcons::validate_scenario(sc);
    std::cout << report.to_text();
    return report.ok() ? Ok : Invalid;
}

int run(const std::string& path, const std::string& out, bool validate_only,
        const Overrides& o) {
    const etcons::Scenario sc = load(path, o);
    const etcons::ValidationReport report = etcons::validate_scenario(sc);
    if (validate_only || !report.ok()) {
        std::cout << report.to_text();
        return report.ok() ? Ok : Invalid;
    }
    const etcons::RunResult result = etcons::run_scenario(sc);
    etcons::write_outputs(result, out);

    const auto& m = result.trace.metrics;
    std::size_t events = 0;
    for (std::size_t n : m.event_count) {
        events += n;
    }
    std::cout << "steps " << result.trace.steps << ", events " << events
              << ", final consensus error " << m.consensus_error_norm.back();
    if (!m.observer_error.empty()) {
        std::cout << ", final observer error " << m.observer_error.back();
    }
    if (result.zeno) {
        std::cout << ", inter-event bound violations " << result.zeno->violations << "/"
                  << result.zeno->asserted;
    }
    std::cout << "\nwrote " << out << "\n";
    return Ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-triggered consensus simulator"};
    app.require_subcommand(1);

    Overrides o;
    auto add_overrides = [&o](CLI::App* cmd) {
        cmd->add_option("--seed", o.seed, "Override the random seed");
        cmd->add_option("--step", o.step, "Override the integration step h")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--horizon", o.horizon, "Override the simulated horizon")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--degree-mode", o.degree_mode, "Observer trigger degree convention")
            ->check(CLI::IsMember({"literal", "inclusive"}));
    };

    std::string scenario;
    std::string out;
    bool validate_only = false;

    CLI::App* run_cmd = app.add_subcommand("run", "Validate, simulate and write outputs");
    run_cmd->add_option("scenario", scenario, "Scenario JSON file")->required();
    run_cmd->add_option("--out", out, "Output directory");
    run_cmd->add_flag("--validate-only", validate_only, "Only print the validation report");
    add_overrides(run_cmd);

    CLI::App* val_cmd = app.add_subcommand("validate", "Check a scenario's assumptions");
    val_cmd->add_option("scenario", scenario, "Scenario JSON file")->required();
    add_overrides(val_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*val_cmd) {
            return validate(scenario, o);
        }
        if (out.empty() && !validate_only) {
            std::cerr << "run: --out is required unless --validate-only is given\n";
            return BadInput;
        }
        return run(scenario, out, validate_only, o);
    } catch (const etcons::ParseError& e) {
        std::cerr << "parse error at " << e.what() << "\n";
        return BadInput;
    } catch (const etcons::DivergenceError& e) {
        std::cerr << "diverged at t = " << e.time() << ": " << e.what() << "\n";
        return Diverged;
    } catch (const etcons::ValidationError& e) {
        std::cerr << "invalid scenario: " << e.what() << "\n";
        return Invalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return Failed;
    }
}
