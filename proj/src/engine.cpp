#include "etcons/engine.hpp"

#include "etcons/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace etcons {

const char* to_string(EventReason r) {
    switch (r) {
    case EventReason::Initial:
        return "initial";
    case EventReason::Function:
        return "function";
    case EventReason::Topology:
        return "topology";
    case EventReason::Periodic:
        return "periodic";
    }
    return "function";
}

void validate_config(const SimulationConfig& config, const SwitchingSchedule& schedule) {
    if (!(config.step > 0.0) || !std::isfinite(config.step)) {
        throw ValidationError("step h must be positive");
    }
    if (!(config.horizon > 0.0) || !std::isfinite(config.horizon)) {
        throw ValidationError("horizon must be positive");
    }
    if (config.step > schedule.dwell() / 10.0 * (1.0 + 1e-9)) {
        std::ostringstream os;
        os << "step h = " << config.step << " does not resolve the dwell time "
           << schedule.dwell() << " (need h <= dwell / 10)";
        throw ValidationError(os.str());
    }
    if (auto count = schedule.interval_count(); count && *count < 2) {
        throw ValidationError("schedule must contain at least two intervals");
    }
    if (schedule.interval(1).end > config.horizon * (1.0 + 1e-12)) {
        throw ValidationError("horizon must cover at least two schedule intervals");
    }
    if (config.record_stride == 0) {
        throw ValidationError("record stride must be at least 1");
    }
    if (!(config.initial.box_low < config.initial.box_high)) {
        throw ValidationError("initial-condition box must have low < high");
    }
}

namespace {

std::size_t step_count(const SimulationConfig& config) {
    return static_cast<std::size_t>(std::floor(config.horizon / config.step + 1e-9));
}

std::vector<Vec> initial_vectors(const std::vector<Vec>& given, const std::vector<Eigen::Index>& dims,
                                 const InitialConditions& ic, std::mt19937_64& rng,
                                 const char* what) {
    std::vector<Vec> out;
    if (!given.empty()) {
        if (given.size() != dims.size()) {
            throw ValidationError(std::string("expected ") + std::to_string(dims.size()) + " " +
                                  what + " initial vectors, got " +
                                  std::to_string(given.size()));
        }
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (given[i].size() != dims[i] || !given[i].allFinite()) {
                throw ValidationError(std::string(what) + " initial vector " +
                                      std::to_string(i + 1) + " has the wrong length");
            }
        }
        return given;
    }
    std::uniform_real_distribution<double> dist(ic.box_low, ic.box_high);
    for (auto n : dims) {
        Vec v(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            v(k) = dist(rng);
        }
        out.push_back(std::move(v));
    }
    return out;
}

void require_finite(const Vec& v, double t, const char* what) {
    if (!v.allFinite()) {
        std::ostringstream os;
        os << what << " became non-finite at t = " << t;
        throw DivergenceError(os.str(), t);
    }
}

std::vector<std::uint8_t> leader_row(const LeaderGraph& g, AgentIndex i) {
    auto row = g.followers.row(i);
    row.push_back(g.leader_links[i]);
    return row;
}

EventReason to_event_reason(TriggerReason r) {
    return r == TriggerReason::Topology ? EventReason::Topology : EventReason::Function;
}

// Bookkeeping shared by both loops: event log, open windows, gaps.
class EventBook {
  public:
    explicit EventBook(std::size_t agents) : open_(agents) {
        for (std::size_t i = 0; i < agents; ++i) {
            open_[i].agent = i;
        }
    }

    void sample_sigma(AgentIndex i, double sigma) {
        open_[i].sigma = std::max(open_[i].sigma, sigma);
    }

    void fire(AgentIndex i, double t, std::size_t step, EventReason reason, std::size_t degree) {
        events_.push_back({i, t, step, reason});
        EventWindow w = open_[i];
        w.end = t;
        w.end_reason = reason;
        w.degree = degree;
        windows_.push_back(w);
        open_[i] = EventWindow{};
        open_[i].agent = i;
        open_[i].start = t;
        open_[i].start_reason = reason;
    }

    std::vector<Event> take_events() { return std::move(events_); }
    std::vector<EventWindow> take_windows() { return std::move(windows_); }

  private:
    std::vector<EventWindow> open_;
    std::vector<Event> events_;
    std::vector<EventWindow> windows_;
};

void finish_metrics(SimulationTrace& trace, std::size_t agents) {
    auto& m = trace.metrics;
    m.event_count.assign(agents, 0);
    m.min_interevent_gap.assign(agents, std::numeric_limits<double>::infinity());
    for (const auto& e : trace.events) {
        ++m.event_count[e.agent];
    }
    for (const auto& w : trace.windows) {
        m.min_interevent_gap[w.agent] = std::min(m.min_interevent_gap[w.agent], w.end - w.start);
    }
    const double denom = static_cast<double>(agents) * static_cast<double>(trace.steps);
    m.communication_ratio = denom > 0 ? static_cast<double>(trace.events.size()) / denom : 0.0;
}

} // namespace

SimulationTrace run_homogeneous(const HomogeneousSystem& system, const HomoParams& params,
                                const SwitchingSchedule& schedule,
                                const SimulationConfig& config) {
    const Mat& a = system.A;
    const Mat& b = system.B;
    if (a.rows() != a.cols() || b.rows() != a.rows()) {
        throw ValidationError("system needs square A and B with matching rows");
    }
    if (params.G().rows() != b.cols() || params.G().cols() != a.rows()) {
        throw ValidationError("gain G must be p x n for B n x p");
    }
    if (schedule.leader_mode()) {
        throw ValidationError("homogeneous runs need an undirected schedule");
    }
    if (const auto report = schedule.joint_connectivity(); !report.connected) {
        throw ValidationError("schedule is not jointly connected (interval " +
                              std::to_string(report.first_failing.value_or(0)) + ")");
    }
    validate_config(config, schedule);
    try {
        (void)neutral_stable_decompose(a);
    } catch (const NotNeutrallyStableError& e) {
        throw ValidationError(std::string("A is not neutrally stable: ") + e.what());
    }

    const std::size_t n_agents = schedule.agent_count();
    const Eigen::Index n = a.rows();
    const double h = config.step;
    const std::size_t steps = step_count(config);
    const Mat exp_ah = matrix_exponential(a, h);
    const double bg_norm = spectral_norm(b * params.G());

    std::mt19937_64 rng(config.seed);
    std::vector<Vec> x = initial_vectors(config.initial.states,
                                         std::vector<Eigen::Index>(n_agents, n), config.initial,
                                         rng, "state");

    std::vector<AgentEventState> agent(n_agents);
    {
        const UGraph& g0 = schedule.graph_at(0.0).followers;
        for (std::size_t i = 0; i < n_agents; ++i) {
            agent[i].reset(x[i], 0.0, g0.row(i));
        }
    }

    SimulationTrace trace;
    trace.step = h;
    trace.steps = steps;
    EventBook book(n_agents);

    std::vector<Vec> estimates(n_agents);
    std::vector<Vec> u(n_agents);
    std::vector<TriggerReason> fired(n_agents);

    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * h;
        const UGraph& g = schedule.graph_at(t).followers;
        for (std::size_t i = 0; i < n_agents; ++i) {
            estimates[i] = agent[i].estimate;
        }

        if (k % config.record_stride == 0) {
            trace.times.push_back(t);
            trace.record_steps.push_back(k);
            trace.states.push_back(x);
            trace.estimates.push_back(estimates);
            Vec stacked(static_cast<Eigen::Index>(n_agents) * n);
            for (std::size_t i = 0; i < n_agents; ++i) {
                stacked.segment(static_cast<Eigen::Index>(i) * n, n) = x[i];
            }
            trace.metrics.consensus_error_norm.push_back(
                consensus_error(stacked, n_agents).norm());
        }

        // Triggers read the estimates frozen at t.
        for (std::size_t i = 0; i < n_agents; ++i) {
            const auto row = g.row(i);
            if (k > 0 && config.broadcast_every_step) {
                fired[i] = row != agent[i].adjacency_row ? TriggerReason::Topology
                                                         : TriggerReason::Function;
                continue;
            }
            double f = -1.0;
            if (!config.topology_only) {
                f = triggering_value(i, estimates[i] - x[i], estimates, g, params, t);
            }
            fired[i] = k > 0 ? should_trigger(f, row, agent[i]) : TriggerReason::None;
        }
        for (std::size_t i = 0; i < n_agents; ++i) {
            if (fired[i] == TriggerReason::None) {
                continue;
            }
            EventReason reason = to_event_reason(fired[i]);
            if (config.broadcast_every_step && reason == EventReason::Function) {
                reason = EventReason::Periodic;
            }
            book.fire(i, t, k, reason, degree(g, i));
            agent[i].reset(x[i], t, g.row(i));
        }
        if (k == steps) {
            break;
        }

        for (std::size_t i = 0; i < n_agents; ++i) {
            estimates[i] = agent[i].estimate;
        }
        for (std::size_t i = 0; i < n_agents; ++i) {
            u[i] = control_input(i, estimates, g, params);
            double sigma = 0.0;
            for (std::size_t j = 0; j < n_agents; ++j) {
                if (g.adjacent(i, j)) {
                    sigma += bg_norm * (estimates[i] - estimates[j]).norm();
                }
            }
            book.sample_sigma(i, sigma);
        }

        for (std::size_t i = 0; i < n_agents; ++i) {
            const Vec bu = b * u[i];
            const Vec k1 = a * x[i] + bu;
            const Vec k2 = a * (x[i] + 0.5 * h * k1) + bu;
            const Vec k3 = a * (x[i] + 0.5 * h * k2) + bu;
            const Vec k4 = a * (x[i] + h * k3) + bu;
            x[i] += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            require_finite(x[i], t + h, "agent state");
            agent[i].estimate = exp_ah * agent[i].estimate;
        }
    }

    trace.events = book.take_events();
    trace.windows = book.take_windows();
    trace.final_states = x;
    finish_metrics(trace, n_agents);
    trace.metrics.bound_check = zeno_report(trace, params, a).rows;
    return trace;
}

SimulationTrace run_heterogeneous(const std::vector<HeteroAgent>& agents, const Exosystem& exo,
                                  const ObserverTrigger& trigger,
                                  const SwitchingSchedule& schedule,
                                  const SimulationConfig& config) {
    if (!schedule.leader_mode()) {
        throw ValidationError("heterogeneous runs need a leader-follower schedule");
    }
    if (agents.size() != schedule.agent_count()) {
        throw ValidationError("schedule has " + std::to_string(schedule.agent_count()) +
                              " followers but " + std::to_string(agents.size()) +
                              " agents were given");
    }
    if (const auto report = schedule.joint_connectivity(); !report.connected) {
        throw ValidationError("leader does not reach every follower in interval " +
                              std::to_string(report.first_failing.value_or(0)));
    }
    if (!(trigger.c > 0.0) || !(trigger.mu > 0.0) || !(trigger.nu > 0.0)) {
        throw ValidationError("observer parameters c, mu, nu must be positive");
    }
    validate_config(config, schedule);

    const Mat& s = exo.S;
    const Eigen::Index q = s.rows();
    const std::size_t n_agents = agents.size();
    std::vector<Eigen::Index> dims;
    for (std::size_t i = 0; i < n_agents; ++i) {
        const auto& ag = agents[i];
        const Eigen::Index ni = ag.A.rows();
        const Eigen::Index mi = ag.B.cols();
        if (ag.A.cols() != ni || ag.B.rows() != ni || ag.E.rows() != ni || ag.E.cols() != q ||
            ag.K1.rows() != mi || ag.K1.cols() != ni || ag.K2.rows() != mi ||
            ag.K2.cols() != q || ag.C.cols() != ni || ag.F.cols() != q) {
            throw ValidationError("agent " + std::to_string(i + 1) +
                                  " matrices or gains have inconsistent shapes");
        }
        dims.push_back(ni);
    }

    const double h = config.step;
    const std::size_t steps = step_count(config);
    const Mat exp_sh = matrix_exponential(s, h);
    const Mat exp_sh2 = matrix_exponential(s, 0.5 * h);

    std::mt19937_64 rng(config.seed);
    std::vector<Vec> x = initial_vectors(config.initial.states, dims, config.initial, rng, "state");
    std::vector<Vec> w = initial_vectors(config.initial.observers,
                                         std::vector<Eigen::Index>(n_agents, q), config.initial,
                                         rng, "observer");
    Vec w0 = exo.w0_init;

    std::vector<AgentEventState> observer(n_agents);
    {
        const LeaderGraph& g0 = schedule.graph_at(0.0);
        for (std::size_t i = 0; i < n_agents; ++i) {
            observer[i].reset(w[i], 0.0, leader_row(g0, i));
        }
    }

    SimulationTrace trace;
    trace.step = h;
    trace.steps = steps;
    EventBook book(n_agents);

    std::vector<Vec> estimates(n_agents);
    std::vector<TriggerReason> fired(n_agents);

    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * h;
        const LeaderGraph& g = schedule.graph_at(t);
        for (std::size_t i = 0; i < n_agents; ++i) {
            estimates[i] = observer[i].estimate;
        }

        if (k % config.record_stride == 0) {
            trace.times.push_back(t);
            trace.record_steps.push_back(k);
            trace.states.push_back(x);
            trace.observers.push_back(w);
            trace.estimates.push_back(estimates);
            trace.leader.push_back(w0);
            double z_sq = 0.0;
            double worst = 0.0;
            std::vector<Vec> y(n_agents);
            for (std::size_t i = 0; i < n_agents; ++i) {
                z_sq += (w[i] - w0).squaredNorm();
                y[i] = agents[i].C * x[i] + agents[i].F * w0;
            }
            for (std::size_t i = 0; i < n_agents; ++i) {
                for (std::size_t j = i + 1; j < n_agents; ++j) {
                    worst = std::max(worst, (y[i] - y[j]).norm());
                }
            }
            trace.metrics.observer_error.push_back(std::sqrt(z_sq));
            trace.metrics.consensus_error_norm.push_back(worst);
        }

        const Mat exp_minus_st =
            config.topology_only || config.broadcast_every_step ? Mat() : matrix_exponential(s, -t);
        for (std::size_t i = 0; i < n_agents; ++i) {
            const auto row = leader_row(g, i);
            if (k > 0 && config.broadcast_every_step) {
                fired[i] = row != observer[i].adjacency_row ? TriggerReason::Topology
                                                            : TriggerReason::Function;
                continue;
            }
            double f = -1.0;
            if (!config.topology_only) {
                f = observer_trigger_value_cached(i, estimates[i] - w[i], estimates, w0, g,
                                                  exp_minus_st, t, trigger.mu, trigger.nu,
                                                  trigger.degree_mode);
            }
            fired[i] = k > 0 ? should_trigger(f, row, observer[i]) : TriggerReason::None;
        }
        for (std::size_t i = 0; i < n_agents; ++i) {
            if (fired[i] == TriggerReason::None) {
                continue;
            }
            EventReason reason = to_event_reason(fired[i]);
            if (config.broadcast_every_step && reason == EventReason::Function) {
                reason = EventReason::Periodic;
            }
            book.fire(i, t, k, reason, degree(g.followers, i) + g.leader_links[i]);
            observer[i].reset(w[i], t, leader_row(g, i));
        }
        if (k == steps) {
            break;
        }

        for (std::size_t i = 0; i < n_agents; ++i) {
            estimates[i] = observer[i].estimate;
        }
        const Vec w0_mid = exp_sh2 * w0;
        const Vec w0_end = exp_sh * w0;
        for (std::size_t i = 0; i < n_agents; ++i) {
            const auto& ag = agents[i];
            // Held over the step: the network term and the local control.
            const Vec coupling = observer_rate(i, Vec::Zero(q), estimates, w0, g, s, trigger.c);
            const Vec bu = ag.B * (ag.K1 * x[i] + ag.K2 * w[i]);
            auto fx = [&](const Vec& xs, const Vec& w0s) -> Vec {
                return ag.A * xs + bu + ag.E * w0s;
            };
            auto fw = [&](const Vec& ws) -> Vec { return s * ws + coupling; };

            const Vec kx1 = fx(x[i], w0);
            const Vec kw1 = fw(w[i]);
            const Vec kx2 = fx(x[i] + 0.5 * h * kx1, w0_mid);
            const Vec kw2 = fw(w[i] + 0.5 * h * kw1);
            const Vec kx3 = fx(x[i] + 0.5 * h * kx2, w0_mid);
            const Vec kw3 = fw(w[i] + 0.5 * h * kw2);
            const Vec kx4 = fx(x[i] + h * kx3, w0_end);
            const Vec kw4 = fw(w[i] + h * kw3);
            x[i] += (h / 6.0) * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4);
            w[i] += (h / 6.0) * (kw1 + 2.0 * kw2 + 2.0 * kw3 + kw4);
            require_finite(x[i], t + h, "agent state");
            require_finite(w[i], t + h, "observer state");
            observer[i].estimate = exp_sh * observer[i].estimate;
        }
        w0 = w0_end;
    }

    trace.events = book.take_events();
    trace.windows = book.take_windows();
    trace.final_states = x;
    trace.final_observers = w;
    trace.final_leader = w0;
    finish_metrics(trace, n_agents);
    return trace;
}

ZenoReport zeno_report(const SimulationTrace& trace, const HomoParams& params, const Mat& a,
                       BoundForm form) {
    ZenoReport report;
    const double a_norm = spectral_norm(a);
    for (const auto& w : trace.windows) {
        BoundCheckRow row;
        row.window = w;
        row.gap = w.end - w.start;
        const bool starts_on_topology = w.start_reason == EventReason::Topology;
        const bool ends_on_function = w.end_reason == EventReason::Function;
        if (ends_on_function) {
            row.case_label = starts_on_topology ? "ii" : "i";
        } else {
            row.case_label = starts_on_topology ? "iii" : "iv";
        }
        if (ends_on_function && w.degree > 0 && w.sigma > 0.0) {
            row.bound = zeno_lower_bound(w.sigma, w.degree, a_norm, params, w.start, form);
            if (row.bound) {
                row.asserted = true;
                row.passed = row.gap >= *row.bound - trace.step - 1e-12;
                ++report.asserted;
                if (!row.passed) {
                    ++report.violations;
                }
            }
        }
        report.rows.push_back(row);
    }
    return report;
}

TriggerAudit audit_homogeneous_triggers(const SimulationTrace& trace,
                                        const SwitchingSchedule& schedule,
                                        const HomoParams& params) {
    TriggerAudit audit;
    std::map<std::pair<std::size_t, AgentIndex>, EventReason> fired;
    for (const auto& e : trace.events) {
        fired[{e.step, e.agent}] = e.reason;
    }
    for (std::size_t r = 0; r < trace.times.size(); ++r) {
        const std::size_t k = trace.record_steps[r];
        if (k == 0) {
            continue;
        }
        const double t = trace.times[r];
        const UGraph& g = schedule.graph_at(t).followers;
        const auto& x = trace.states[r];
        const auto& est = trace.estimates[r];
        for (AgentIndex i = 0; i < x.size(); ++i) {
            const double f = triggering_value(i, est[i] - x[i], est, g, params, t);
            const auto it = fired.find({k, i});
            if (it == fired.end()) {
                ++audit.quiet_points;
                audit.max_quiet_value = std::max(audit.max_quiet_value, f);
                if (!(f < 0.0)) {
                    ++audit.quiet_violations;
                }
            } else if (it->second == EventReason::Function) {
                ++audit.function_events;
                audit.min_event_value = std::min(audit.min_event_value, f);
                if (!(f >= -1e-12)) {
                    ++audit.event_violations;
                }
            }
        }
    }
    return audit;
}

} // namespace etcons
