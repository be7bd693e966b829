#pragma once

/**
 * @file engine.hpp
 * @brief Fixed-step, event-driven closed-loop simulation.
 *
 * Per grid point t_k = k h the loop does, in order:
 *   1. pick the active graph (right-continuous switching),
 *   2. evaluate every agent's trigger against estimates frozen at t_k
 *      (topology change first, then the triggering function) and reset the
 *      agents that fire,
 *   3. compute controls from the post-broadcast estimates (held over the step),
 *   4. advance physical states one RK4 step,
 *   5. advance estimates (and the exosystem) exactly with a cached e^{A h}.
 *
 * Events therefore always sit on the grid, and an agent fires at most once
 * per grid point.
 */

#include "etcons/graph.hpp"
#include "etcons/heterogeneous.hpp"
#include "etcons/homogeneous.hpp"
#include "etcons/linalg.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace etcons {

struct InitialConditions {
    /// Explicit x_i; sampled from the box when empty.
    std::vector<Vec> states;
    /// Explicit observer states w_i (heterogeneous only); sampled when empty.
    std::vector<Vec> observers;
    double box_low = -1.0;
    double box_high = 1.0;
};

struct SimulationConfig {
    double horizon = 30.0;
    double step = 1e-3;
    std::uint64_t seed = 1;
    InitialConditions initial;
    std::size_t record_stride = 1;
    /// Skip the triggering function and fire on topology changes only.
    bool topology_only = false;
    /// Broadcast at every grid point (periodic-sampling baseline).
    bool broadcast_every_step = false;
};

/// Why an agent broadcast. `Initial` marks the implicit broadcast at t = 0.
enum class EventReason { Initial, Function, Topology, Periodic };

const char* to_string(EventReason r);

struct Event {
    AgentIndex agent = 0;
    double time = 0.0;
    std::size_t step = 0;
    EventReason reason = EventReason::Function;
};

/// Inter-event window of one agent, [start, end).
struct EventWindow {
    AgentIndex agent = 0;
    double start = 0.0;
    double end = 0.0;
    EventReason start_reason = EventReason::Initial;
    EventReason end_reason = EventReason::Function;
    /// max over the window of sum_j a_ij ||B G|| ||x~_i - x~_j|| (homogeneous only).
    double sigma = 0.0;
    /// Degree of the agent when the window closed.
    std::size_t degree = 0;
};

struct BoundCheckRow {
    EventWindow window;
    double gap = 0.0;
    std::optional<double> bound;
    /// Only windows closed by the triggering function are asserted.
    bool asserted = false;
    bool passed = true;
    /// "i".."iv" by (start, end) reason: function/function, topology/function,
    /// topology/topology, function/topology.
    const char* case_label = "i";
};

struct ZenoReport {
    std::vector<BoundCheckRow> rows;
    std::size_t asserted = 0;
    std::size_t violations = 0;
};

struct MetricsSummary {
    /// ||xi(t)|| (homogeneous) or max_ij ||y_i - y_j|| (heterogeneous) at record times.
    std::vector<double> consensus_error_norm;
    /// ||z(t)|| = sqrt(sum_i ||w_i - w0||^2); empty for homogeneous runs.
    std::vector<double> observer_error;
    std::vector<std::size_t> event_count;
    /// Smallest gap between consecutive broadcasts (t = 0 included);
    /// +infinity for an agent that never fired.
    std::vector<double> min_interevent_gap;
    std::vector<BoundCheckRow> bound_check;
    /// Events / (agents * integration steps).
    double communication_ratio = 0.0;
};

struct SimulationTrace {
    double step = 0.0;
    std::size_t steps = 0;
    std::vector<double> times;
    std::vector<std::size_t> record_steps;
    /// [record][agent] physical state.
    std::vector<std::vector<Vec>> states;
    /// [record][agent] estimate before that instant's broadcasts
    /// (x~ for homogeneous, w~ for heterogeneous runs).
    std::vector<std::vector<Vec>> estimates;
    /// [record][agent] observer state w_i (heterogeneous only).
    std::vector<std::vector<Vec>> observers;
    /// [record] exosystem signal w0 (heterogeneous only).
    std::vector<Vec> leader;
    std::vector<Event> events;
    std::vector<EventWindow> windows;
    std::vector<Vec> final_states;
    std::vector<Vec> final_observers;
    Vec final_leader;
    MetricsSummary metrics;
};

struct HomogeneousSystem {
    Mat A;
    Mat B;
};

/**
 * @brief Event-triggered state consensus over a switching schedule.
 * @throws ValidationError on an invalid schedule, system or config.
 * @throws DivergenceError if any state becomes non-finite.
 */
SimulationTrace run_homogeneous(const HomogeneousSystem& system, const HomoParams& params,
                                const SwitchingSchedule& schedule,
                                const SimulationConfig& config);

struct ObserverTrigger {
    double c = 2.0;
    double mu = 0.5;
    double nu = 0.5;
    DegreeMode degree_mode = DegreeMode::Literal;
};

/**
 * @brief Event-triggered observer plus local tracking control.
 *
 * `agents` carry their gains; their `x` fields are ignored in favour of the
 * config's initial conditions.
 */
SimulationTrace run_heterogeneous(const std::vector<HeteroAgent>& agents, const Exosystem& exo,
                                  const ObserverTrigger& trigger,
                                  const SwitchingSchedule& schedule,
                                  const SimulationConfig& config);

/// Compare each function-closed window's length against zeno_lower_bound.
ZenoReport zeno_report(const SimulationTrace& trace, const HomoParams& params, const Mat& a,
                       BoundForm form = BoundForm::Consistent);

struct TriggerAudit {
    std::size_t function_events = 0;
    std::size_t quiet_points = 0;
    std::size_t event_violations = 0;
    std::size_t quiet_violations = 0;
    double min_event_value = std::numeric_limits<double>::infinity();
    double max_quiet_value = -std::numeric_limits<double>::infinity();
};

/**
 * @brief Recompute f_i from the recorded trace.
 *
 * At each recorded grid point: function events need f_i >= -1e-12, agents
 * that stayed silent need f_i < 0. Topology events are skipped. Full
 * coverage needs record_stride == 1.
 */
TriggerAudit audit_homogeneous_triggers(const SimulationTrace& trace,
                                        const SwitchingSchedule& schedule,
                                        const HomoParams& params);

/// Shared validation of step size and horizon against the schedule.
void validate_config(const SimulationConfig& config, const SwitchingSchedule& schedule);

} // namespace etcons
