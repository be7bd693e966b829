#include "etcons/engine.hpp"
#include "etcons/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace etcons;

namespace {

const Mat oscillator = (Mat(2, 2) << 0, 1, -1, 0).finished();
const Mat input = (Mat(2, 1) << 0, 1).finished();

SwitchingSchedule example1_schedule() {
    const std::vector<UGraph> lib{UGraph(6, {{0, 1}, {2, 3}}), UGraph(6),
                                  UGraph(6, {{1, 2}, {4, 5}}), UGraph(6, {{3, 4}, {0, 5}})};
    return SwitchingSchedule::undirected(lib, {{{0, 0.5}, {1, 0.5}, {2, 0.5}, {3, 0.5}}}, 0.5,
                                         2.0);
}

HomoParams example1_params() { return {5.0, 0.5, 0.5, 0.5, (Mat(1, 2) << 0, -1).finished()}; }

SimulationConfig config(double horizon, double step = 1e-3, std::uint64_t seed = 1) {
    SimulationConfig c;
    c.horizon = horizon;
    c.step = step;
    c.seed = seed;
    return c;
}

UGraph ring3() { return UGraph(3, {{0, 1}, {1, 2}, {0, 2}}); }

HeteroAgent scalar_follower() {
    HeteroAgent a;
    a.A = Mat::Constant(1, 1, -1.0);
    a.B = Mat::Ones(1, 1);
    a.C = Mat::Ones(1, 1);
    a.E = Mat::Zero(1, 1);
    a.F = Mat::Zero(1, 1);
    a.K1 = Mat::Constant(1, 1, -1.0);
    a.K2 = Mat::Zero(1, 1);
    return a;
}

} // namespace

TEST_CASE("single integrators keep their average") {
    const HomoParams p(1.0, 0.5, 0.5, 1.0, Mat::Constant(1, 1, -1.0));
    auto cfg = config(20.0);
    cfg.initial.states = {Vec::Constant(1, 0.9), Vec::Constant(1, -0.4), Vec::Constant(1, 0.1)};
    const auto trace = run_homogeneous({Mat::Zero(1, 1), Mat::Ones(1, 1)}, p,
                                       SwitchingSchedule::fixed(ring3()), cfg);
    const double mean0 = 0.2;
    double drift = 0.0;
    for (const auto& row : trace.states) {
        drift = std::max(drift, std::abs((row[0](0) + row[1](0) + row[2](0)) / 3.0 - mean0));
    }
    CHECK(drift < 1e-9);
    for (const auto& x : trace.final_states) {
        CHECK(std::abs(x(0) - mean0) < 1e-3);
    }
}

TEST_CASE("estimates follow the broadcast states exactly") {
    auto cfg = config(6.0);
    const auto trace = run_homogeneous({oscillator, input}, example1_params(),
                                       example1_schedule(), cfg);
    REQUIRE(trace.times.size() == trace.steps + 1);
    std::vector<std::size_t> last(6, 0);
    std::vector<std::vector<std::size_t>> fired_at(trace.steps + 1);
    for (const auto& e : trace.events) {
        fired_at[e.step].push_back(e.agent);
    }
    double worst = 0.0;
    for (std::size_t k = 0; k <= trace.steps; ++k) {
        for (std::size_t i = 0; i < 6; ++i) {
            const Vec expected = matrix_exponential(oscillator, trace.times[k] - trace.times[last[i]]) *
                                 trace.states[last[i]][i];
            worst = std::max(worst, (trace.estimates[k][i] - expected).norm());
        }
        for (auto i : fired_at[k]) {
            last[i] = k;
        }
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("example run converges with positive gaps and sparse events") {
    const auto trace = run_homogeneous({oscillator, input}, example1_params(),
                                       example1_schedule(), config(30.0));
    CHECK(trace.metrics.consensus_error_norm.back() < 1e-2);
    for (double gap : trace.metrics.min_interevent_gap) {
        CHECK(gap > 0.0);
    }
    for (auto count : trace.metrics.event_count) {
        CHECK(static_cast<double>(count) < 0.1 * static_cast<double>(trace.steps));
    }
    const auto report = zeno_report(trace, example1_params(), oscillator);
    CHECK(report.asserted > 0);
    CHECK(report.violations == 0);

    const auto audit = audit_homogeneous_triggers(trace, example1_schedule(), example1_params());
    CHECK(audit.function_events > 0);
    CHECK(audit.event_violations == 0);
    CHECK(audit.quiet_violations == 0);
}

TEST_CASE("topology changes fire at switch instants") {
    const auto trace = run_homogeneous({oscillator, input}, example1_params(),
                                       example1_schedule(), config(4.0));
    for (const auto& e : trace.events) {
        if (e.reason == EventReason::Topology) {
            const double phase = std::fmod(e.time + 1e-9, 0.5);
            CHECK(phase < 1e-6);
        }
    }
    // G1 -> G2 at t = 0.5 removes every edge, so all four linked agents fire.
    std::size_t at_half = 0;
    for (const auto& e : trace.events) {
        at_half += e.step == 500 && e.reason == EventReason::Topology ? 1 : 0;
    }
    CHECK(at_half == 4);
}

TEST_CASE("topology-only option skips the triggering function") {
    auto cfg = config(4.0);
    cfg.topology_only = true;
    const auto trace =
        run_homogeneous({oscillator, input}, example1_params(), example1_schedule(), cfg);
    for (const auto& e : trace.events) {
        CHECK(e.reason == EventReason::Topology);
    }
    const auto report = zeno_report(trace, example1_params(), oscillator);
    CHECK(report.asserted == 0);
}

TEST_CASE("identical runs are bit-identical") {
    const auto a = run_homogeneous({oscillator, input}, example1_params(), example1_schedule(),
                                   config(10.0, 1e-3, 7));
    const auto b = run_homogeneous({oscillator, input}, example1_params(), example1_schedule(),
                                   config(10.0, 1e-3, 7));
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t k = 0; k < a.events.size(); ++k) {
        CHECK(a.events[k].step == b.events[k].step);
        CHECK(a.events[k].agent == b.events[k].agent);
    }
    for (std::size_t i = 0; i < a.final_states.size(); ++i) {
        CHECK(a.final_states[i] == b.final_states[i]);
    }
    const auto c = run_homogeneous({oscillator, input}, example1_params(), example1_schedule(),
                                   config(10.0, 1e-3, 8));
    CHECK(c.states.front()[0] != a.states.front()[0]);
}

TEST_CASE("record stride thins the trace") {
    auto cfg = config(4.2);
    cfg.record_stride = 7;
    const auto trace =
        run_homogeneous({oscillator, input}, example1_params(), example1_schedule(), cfg);
    CHECK(trace.times.size() == 1 + 4200 / 7);
    CHECK(trace.times[1] == doctest::Approx(0.007));
}

TEST_CASE("zero-order hold error is first order in the step") {
    // Broadcasting at every grid point fixes the event pattern, so only the
    // held control differs between step sizes.
    const UGraph path(3, {{0, 1}, {1, 2}});
    auto final_error = [&](double h) {
        auto cfg = config(8.0, h);
        cfg.broadcast_every_step = true;
        cfg.initial.states = {(Vec(2) << 1, 0).finished(), (Vec(2) << -0.5, 0.4).finished(),
                              (Vec(2) << 0.2, -0.8).finished()};
        return run_homogeneous({oscillator, input}, example1_params(),
                               SwitchingSchedule::fixed(path), cfg)
            .metrics.consensus_error_norm.back();
    };
    const double e1 = final_error(1e-3);
    const double e2 = final_error(5e-4);
    const double e3 = final_error(2.5e-4);
    const double ratio = std::abs(e1 - e2) / std::abs(e2 - e3);
    MESSAGE("successive differences " << std::abs(e1 - e2) << ", " << std::abs(e2 - e3));
    CHECK(ratio > 0.5);
    CHECK(ratio < 8.0);
}

TEST_CASE("invalid runs are rejected") {
    SUBCASE("single agent") {
        CHECK_THROWS_AS(run_homogeneous({oscillator, input}, example1_params(),
                                        SwitchingSchedule::fixed(UGraph(1)), config(5.0)),
                        ValidationError);
    }
    SUBCASE("step too coarse for the dwell time") {
        CHECK_THROWS_AS(run_homogeneous({oscillator, input}, example1_params(),
                                        example1_schedule(), config(30.0, 0.1)),
                        ValidationError);
    }
    SUBCASE("horizon shorter than two intervals") {
        CHECK_THROWS_AS(run_homogeneous({oscillator, input}, example1_params(),
                                        example1_schedule(), config(3.0)),
                        ValidationError);
    }
    SUBCASE("unstable system matrix") {
        const Mat unstable = (Mat(2, 2) << 1, 0, 0, -1).finished();
        CHECK_THROWS_AS(run_homogeneous({unstable, input}, example1_params(),
                                        example1_schedule(), config(30.0)),
                        ValidationError);
    }
    SUBCASE("wrong initial state count") {
        auto cfg = config(30.0);
        cfg.initial.states = {Vec::Zero(2)};
        CHECK_THROWS_AS(run_homogeneous({oscillator, input}, example1_params(),
                                        example1_schedule(), cfg),
                        ValidationError);
    }
}

TEST_CASE("zeno report without function events is empty") {
    SimulationTrace trace;
    trace.step = 1e-3;
    trace.windows.push_back({0, 0.0, 0.5, EventReason::Initial, EventReason::Topology, 1.0, 1});
    trace.windows.push_back({0, 0.5, 1.0, EventReason::Topology, EventReason::Topology, 1.0, 1});
    const auto report = zeno_report(trace, example1_params(), oscillator);
    CHECK(report.asserted == 0);
    CHECK(std::string(report.rows[0].case_label) == "iv");
    CHECK(std::string(report.rows[1].case_label) == "iii");
}

TEST_CASE("scalar observer with a broadcast at every step follows the exponential") {
    const double c = 2.0;
    const double w0 = 1.0;
    const double w_init = -0.6;
    const LeaderGraph g(UGraph(1), {1});
    auto cfg = config(5.0);
    cfg.broadcast_every_step = true;
    cfg.initial.states = {Vec::Zero(1)};
    cfg.initial.observers = {Vec::Constant(1, w_init)};
    const auto trace =
        run_heterogeneous({scalar_follower()}, Exosystem(Mat::Zero(1, 1), Vec::Constant(1, w0)),
                          {c, 0.5, 0.5, DegreeMode::Literal}, SwitchingSchedule::fixed(g), cfg);
    double worst = 0.0;
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        const double exact = w0 + (w_init - w0) * std::exp(-c * trace.times[k]);
        worst = std::max(worst, std::abs(trace.observers[k][0](0) - exact));
    }
    CHECK(worst < 2e-3);
    CHECK(trace.events.size() == trace.steps);
}

TEST_CASE("scalar observer is piecewise linear between events") {
    const double c = 2.0;
    const double w0 = 1.0;
    const double w_init = -0.6;
    const LeaderGraph g(UGraph(1), {1});
    auto cfg = config(20.0);
    cfg.initial.states = {Vec::Zero(1)};
    cfg.initial.observers = {Vec::Constant(1, w_init)};
    const auto trace =
        run_heterogeneous({scalar_follower()}, Exosystem(Mat::Zero(1, 1), Vec::Constant(1, w0)),
                          {c, 0.5, 0.5, DegreeMode::Inclusive}, SwitchingSchedule::fixed(g), cfg);
    REQUIRE(trace.events.size() > 3);
    std::vector<bool> fired(trace.steps + 1, false);
    for (const auto& e : trace.events) {
        fired[e.step] = true;
    }
    // S = 0 holds the estimate, so each inter-event segment has constant slope.
    double w = w_init;
    double held = w_init;
    double worst = 0.0;
    for (std::size_t k = 0; k <= trace.steps; ++k) {
        worst = std::max(worst, std::abs(trace.observers[k][0](0) - w));
        if (fired[k]) {
            held = w;
        }
        w -= c * cfg.step * (held - w0);
    }
    CHECK(worst < 1e-12);
    CHECK(std::abs(trace.final_observers[0](0) - w0) < 1e-2);
}

TEST_CASE("zero exogenous signal drives everything to the origin") {
    std::vector<HeteroAgent> agents;
    for (int i = 1; i <= 3; ++i) {
        HeteroAgent a;
        a.A = (Mat(2, 2) << -1, 1, 0, -i).finished();
        a.B = (Mat(2, 1) << 0, i).finished();
        a.C = (Mat(1, 2) << i, 0).finished();
        a.E = Mat::Identity(2, 2);
        a.F = (Mat(1, 2) << 1, 0).finished();
        a.K1 = (Mat(1, 2) << -1, -1).finished();
        a.K2 = Mat::Zero(1, 2);
        agents.push_back(a);
    }
    const LeaderGraph g(UGraph(3, {{0, 1}, {1, 2}}), {1, 0, 0});
    const auto trace = run_heterogeneous(agents, Exosystem(oscillator, Vec::Zero(2)),
                                         {2.0, 0.5, 0.5, DegreeMode::Inclusive},
                                         SwitchingSchedule::fixed(g), config(30.0));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(trace.final_observers[i].norm() < 1e-3);
        CHECK(trace.final_states[i].norm() < 1e-3);
    }
}
