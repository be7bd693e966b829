#pragma once

/**
 * @file graph.hpp
 * @brief Undirected switching topologies with dwell-time structure.
 *
 * Agents are indexed from 0 internally. A LeaderGraph adds the links from
 * an exosystem leader (node "0" in scenario files) to the followers.
 */

#include "etcons/linalg.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace etcons {

using AgentIndex = std::size_t;
using Edge = std::pair<AgentIndex, AgentIndex>;

/// Undirected 0/1 graph with zero diagonal.
class UGraph {
  public:
    UGraph() = default;
    explicit UGraph(std::size_t n);
    UGraph(std::size_t n, const std::vector<Edge>& edges);

    std::size_t size() const noexcept { return n_; }
    bool adjacent(AgentIndex i, AgentIndex j) const;
    void connect(AgentIndex i, AgentIndex j);
    std::vector<Edge> edges() const;
    /// Row i of the adjacency matrix.
    std::vector<std::uint8_t> row(AgentIndex i) const;

    friend bool operator==(const UGraph&, const UGraph&) = default;

  private:
    std::size_t n_ = 0;
    std::vector<std::uint8_t> adj_;
};

struct LeaderGraph {
    UGraph followers;
    /// a_i0 for each follower.
    std::vector<std::uint8_t> leader_links;

    LeaderGraph() = default;
    explicit LeaderGraph(UGraph g);
    LeaderGraph(UGraph g, std::vector<std::uint8_t> links);

    std::size_t size() const noexcept { return followers.size(); }
    bool linked_to_leader(AgentIndex i) const { return leader_links.at(i) != 0; }

    friend bool operator==(const LeaderGraph&, const LeaderGraph&) = default;
};

Mat laplacian(const UGraph& g);
std::size_t degree(const UGraph& g, AgentIndex i);
/// Follower Laplacian plus diag(a_10, ..., a_N0).
Mat hmatrix(const LeaderGraph& g);

/// Breadth-first connectivity of the undirected graph.
bool is_connected(const UGraph& g);
/// Second-smallest Laplacian eigenvalue (0 for n < 2).
double algebraic_connectivity(const UGraph& g);
/// Every follower reachable from the leader.
bool leader_reaches_all(const LeaderGraph& g);

UGraph graph_union(const UGraph& a, const UGraph& b);
LeaderGraph graph_union(const LeaderGraph& a, const LeaderGraph& b);

struct Subinterval {
    double start = 0.0;
    double end = 0.0;
    std::size_t graph = 0;
};

struct Interval {
    double start = 0.0;
    double end = 0.0;
    std::vector<Subinterval> parts;
};

/// One entry of a schedule pattern: which graph, and for how long.
struct SwitchStep {
    std::size_t graph = 0;
    double duration = 0.0;
};

struct ConnectivityReport {
    bool connected = true;
    std::optional<std::size_t> first_failing;
    std::vector<bool> per_interval;
};

/**
 * @brief Piecewise-constant, right-continuous switching signal.
 *
 * Built from a pattern of intervals, each a list of (graph, duration)
 * subintervals. The pattern repeats `repeat` times, or forever when
 * repeat == 0; after a finite schedule ends the last graph stays active.
 */
class SwitchingSchedule {
  public:
    SwitchingSchedule(std::vector<LeaderGraph> library,
                      std::vector<std::vector<SwitchStep>> pattern, double dwell,
                      std::optional<double> period_bound, std::size_t repeat, bool leader_mode);

    static SwitchingSchedule undirected(std::vector<UGraph> library,
                                        std::vector<std::vector<SwitchStep>> pattern,
                                        double dwell, std::optional<double> period_bound = {},
                                        std::size_t repeat = 0);
    static SwitchingSchedule leader_follower(std::vector<LeaderGraph> library,
                                             std::vector<std::vector<SwitchStep>> pattern,
                                             double dwell,
                                             std::optional<double> period_bound = {},
                                             std::size_t repeat = 0);
    /// A single graph held forever, one interval of length `dwell` per period.
    static SwitchingSchedule fixed(const UGraph& g, double dwell = 1.0);
    static SwitchingSchedule fixed(const LeaderGraph& g, double dwell = 1.0);

    bool leader_mode() const noexcept { return leader_mode_; }
    std::size_t agent_count() const noexcept { return library_.front().size(); }
    double dwell() const noexcept { return dwell_; }
    double period_bound() const noexcept { return period_bound_; }
    const std::vector<LeaderGraph>& library() const noexcept { return library_; }
    /// Number of intervals, or nullopt when the pattern repeats forever.
    std::optional<std::size_t> interval_count() const;
    std::size_t pattern_size() const noexcept { return pattern_.size(); }

    Interval interval(std::size_t k) const;
    /// Library index of the graph active at t. Times within `eps` below a
    /// boundary count as on it.
    std::size_t graph_index_at(double t, double eps = 1e-9) const;
    const LeaderGraph& graph_at(double t, double eps = 1e-9) const;
    /// Union over the subintervals of interval k (leader links united too).
    LeaderGraph union_graph(std::size_t k) const;
    ConnectivityReport joint_connectivity() const;

  private:
    std::vector<LeaderGraph> library_;
    std::vector<Interval> pattern_;
    double pattern_length_ = 0.0;
    double dwell_ = 0.0;
    double period_bound_ = 0.0;
    std::size_t repeat_ = 0;
    bool leader_mode_ = false;
};

/// Every interval's union graph is connected (or leader-rooted in leader mode).
bool is_jointly_connected(const SwitchingSchedule& s);

} // namespace etcons
