#include "etcons/graph.hpp"

#include "etcons/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace etcons {

UGraph::UGraph(std::size_t n) : n_(n), adj_(n * n, 0) {}

UGraph::UGraph(std::size_t n, const std::vector<Edge>& edges) : UGraph(n) {
    for (const auto& [i, j] : edges) {
        connect(i, j);
    }
}

bool UGraph::adjacent(AgentIndex i, AgentIndex j) const {
    if (i >= n_ || j >= n_) {
        throw std::out_of_range("agent index out of range");
    }
    return adj_[i * n_ + j] != 0;
}

void UGraph::connect(AgentIndex i, AgentIndex j) {
    if (i >= n_ || j >= n_) {
        throw ValidationError("edge (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                              ") references a node outside 1.." + std::to_string(n_));
    }
    if (i == j) {
        throw ValidationError("self-loop on node " + std::to_string(i + 1));
    }
    adj_[i * n_ + j] = 1;
    adj_[j * n_ + i] = 1;
}

std::vector<Edge> UGraph::edges() const {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i + 1; j < n_; ++j) {
            if (adj_[i * n_ + j]) {
                out.emplace_back(i, j);
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> UGraph::row(AgentIndex i) const {
    if (i >= n_) {
        throw std::out_of_range("agent index out of range");
    }
    return {adj_.begin() + static_cast<std::ptrdiff_t>(i * n_),
            adj_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_)};
}

LeaderGraph::LeaderGraph(UGraph g) : followers(std::move(g)), leader_links(followers.size(), 0) {}

LeaderGraph::LeaderGraph(UGraph g, std::vector<std::uint8_t> links)
    : followers(std::move(g)), leader_links(std::move(links)) {
    if (leader_links.size() != followers.size()) {
        throw ValidationError("leader link vector has " + std::to_string(leader_links.size()) +
                              " entries for " + std::to_string(followers.size()) + " followers");
    }
    for (auto& a : leader_links) {
        a = a != 0 ? 1 : 0;
    }
}

Mat laplacian(const UGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.size());
    Mat l = Mat::Zero(n, n);
    for (const auto& [i, j] : g.edges()) {
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        l(a, b) = -1.0;
        l(b, a) = -1.0;
        l(a, a) += 1.0;
        l(b, b) += 1.0;
    }
    return l;
}

std::size_t degree(const UGraph& g, AgentIndex i) {
    const auto r = g.row(i);
    return static_cast<std::size_t>(std::count(r.begin(), r.end(), std::uint8_t{1}));
}

Mat hmatrix(const LeaderGraph& g) {
    Mat h = laplacian(g.followers);
    for (std::size_t i = 0; i < g.size(); ++i) {
        h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += g.leader_links[i];
    }
    return h;
}

namespace {

std::vector<bool> reachable(const UGraph& g, const std::vector<AgentIndex>& roots) {
    std::vector<bool> seen(g.size(), false);
    std::deque<AgentIndex> frontier;
    for (auto r : roots) {
        if (!seen[r]) {
            seen[r] = true;
            frontier.push_back(r);
        }
    }
    while (!frontier.empty()) {
        const AgentIndex i = frontier.front();
        frontier.pop_front();
        for (AgentIndex j = 0; j < g.size(); ++j) {
            if (!seen[j] && g.adjacent(i, j)) {
                seen[j] = true;
                frontier.push_back(j);
            }
        }
    }
    return seen;
}

bool all_of(const std::vector<bool>& v) {
    return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
}

} // namespace

bool is_connected(const UGraph& g) {
    if (g.size() == 0) {
        return true;
    }
    return all_of(reachable(g, {0}));
}

double algebraic_connectivity(const UGraph& g) {
    if (g.size() < 2) {
        return 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(laplacian(g), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(1);
}

bool leader_reaches_all(const LeaderGraph& g) {
    std::vector<AgentIndex> roots;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.leader_links[i]) {
            roots.push_back(i);
        }
    }
    return all_of(reachable(g.followers, roots));
}

UGraph graph_union(const UGraph& a, const UGraph& b) {
    if (a.size() != b.size()) {
        throw DimensionError("cannot unite graphs of different sizes");
    }
    UGraph out = a;
    for (const auto& [i, j] : b.edges()) {
        out.connect(i, j);
    }
    return out;
}

LeaderGraph graph_union(const LeaderGraph& a, const LeaderGraph& b) {
    LeaderGraph out(graph_union(a.followers, b.followers), a.leader_links);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.leader_links[i] = (a.leader_links[i] || b.leader_links[i]) ? 1 : 0;
    }
    return out;
}

SwitchingSchedule::SwitchingSchedule(std::vector<LeaderGraph> library,
                                     std::vector<std::vector<SwitchStep>> pattern, double dwell,
                                     std::optional<double> period_bound, std::size_t repeat,
                                     bool leader_mode)
    : library_(std::move(library)), dwell_(dwell), repeat_(repeat), leader_mode_(leader_mode) {
    if (library_.empty()) {
        throw ValidationError("schedule needs at least one graph");
    }
    const std::size_t n = library_.front().size();
    for (std::size_t g = 0; g < library_.size(); ++g) {
        if (library_[g].size() != n) {
            throw ValidationError("graph " + std::to_string(g) + " has " +
                                  std::to_string(library_[g].size()) + " nodes, expected " +
                                  std::to_string(n));
        }
        if (!leader_mode_ && std::any_of(library_[g].leader_links.begin(),
                                         library_[g].leader_links.end(),
                                         [](std::uint8_t a) { return a != 0; })) {
            throw ValidationError("graph " + std::to_string(g) +
                                  " has leader links in an undirected schedule");
        }
    }
    if (!(dwell_ > 0.0) || !std::isfinite(dwell_)) {
        throw ValidationError("dwell time must be positive");
    }
    if (pattern.empty()) {
        throw ValidationError("schedule pattern is empty");
    }
    const double slack = 1e-9 * dwell_;
    double t = 0.0;
    double longest = 0.0;
    for (std::size_t k = 0; k < pattern.size(); ++k) {
        if (pattern[k].empty()) {
            throw ValidationError("interval " + std::to_string(k) + " has no subintervals");
        }
        Interval iv;
        iv.start = t;
        for (const auto& step : pattern[k]) {
            if (step.graph >= library_.size()) {
                throw ValidationError("interval " + std::to_string(k) + " references graph " +
                                      std::to_string(step.graph) + " (library has " +
                                      std::to_string(library_.size()) + ")");
            }
            if (!(step.duration >= dwell_ - slack)) {
                throw ValidationError("interval " + std::to_string(k) +
                                      ": subinterval shorter than the dwell time");
            }
            iv.parts.push_back({t, t + step.duration, step.graph});
            t += step.duration;
        }
        iv.end = t;
        longest = std::max(longest, iv.end - iv.start);
        pattern_.push_back(std::move(iv));
    }
    pattern_length_ = t;
    period_bound_ = period_bound.value_or(longest);
    if (longest > period_bound_ + slack) {
        throw ValidationError("an interval is longer than the period bound T");
    }
}

SwitchingSchedule SwitchingSchedule::undirected(std::vector<UGraph> library,
                                                std::vector<std::vector<SwitchStep>> pattern,
                                                double dwell, std::optional<double> period_bound,
                                                std::size_t repeat) {
    std::vector<LeaderGraph> lib;
    lib.reserve(library.size());
    for (auto& g : library) {
        lib.emplace_back(std::move(g));
    }
    return {std::move(lib), std::move(pattern), dwell, period_bound, repeat, false};
}

SwitchingSchedule SwitchingSchedule::leader_follower(
    std::vector<LeaderGraph> library, std::vector<std::vector<SwitchStep>> pattern, double dwell,
    std::optional<double> period_bound, std::size_t repeat) {
    return {std::move(library), std::move(pattern), dwell, period_bound, repeat, true};
}

SwitchingSchedule SwitchingSchedule::fixed(const UGraph& g, double dwell) {
    return undirected({g}, {{{0, dwell}}}, dwell);
}

SwitchingSchedule SwitchingSchedule::fixed(const LeaderGraph& g, double dwell) {
    return leader_follower({g}, {{{0, dwell}}}, dwell);
}

std::optional<std::size_t> SwitchingSchedule::interval_count() const {
    if (repeat_ == 0) {
        return std::nullopt;
    }
    return repeat_ * pattern_.size();
}

Interval SwitchingSchedule::interval(std::size_t k) const {
    if (auto count = interval_count(); count && k >= *count) {
        throw std::out_of_range("interval index " + std::to_string(k) + " out of range");
    }
    const std::size_t cycle = k / pattern_.size();
    const double shift = static_cast<double>(cycle) * pattern_length_;
    Interval iv = pattern_[k % pattern_.size()];
    iv.start += shift;
    iv.end += shift;
    for (auto& p : iv.parts) {
        p.start += shift;
        p.end += shift;
    }
    return iv;
}

std::size_t SwitchingSchedule::graph_index_at(double t, double eps) const {
    if (t < 0.0) {
        throw TimeOrderError("schedule queried at negative time");
    }
    if (repeat_ > 0 && t >= static_cast<double>(repeat_) * pattern_length_ - eps) {
        return pattern_.back().parts.back().graph;
    }
    const double cycles = std::floor((t + eps) / pattern_length_);
    const double local = t - cycles * pattern_length_;
    for (const auto& iv : pattern_) {
        for (const auto& p : iv.parts) {
            if (local < p.end - eps) {
                return p.graph;
            }
        }
    }
    return pattern_.back().parts.back().graph;
}

const LeaderGraph& SwitchingSchedule::graph_at(double t, double eps) const {
    return library_[graph_index_at(t, eps)];
}

LeaderGraph SwitchingSchedule::union_graph(std::size_t k) const {
    const Interval iv = interval(k);
    LeaderGraph out = library_[iv.parts.front().graph];
    for (const auto& p : iv.parts) {
        out = graph_union(out, library_[p.graph]);
    }
    return out;
}

ConnectivityReport SwitchingSchedule::joint_connectivity() const {
    ConnectivityReport report;
    if (!leader_mode_ && agent_count() < 2) {
        // Consensus among fewer than two agents is vacuous; treat as invalid.
        report.connected = false;
        report.first_failing = 0;
        report.per_interval.assign(pattern_.size(), false);
        return report;
    }
    // The pattern repeats, so checking one period covers every interval.
    for (std::size_t k = 0; k < pattern_.size(); ++k) {
        const LeaderGraph u = union_graph(k);
        const bool ok = leader_mode_ ? leader_reaches_all(u) : is_connected(u.followers);
        report.per_interval.push_back(ok);
        if (!ok && report.connected) {
            report.connected = false;
            report.first_failing = k;
        }
    }
    return report;
}

bool is_jointly_connected(const SwitchingSchedule& s) { return s.joint_connectivity().connected; }

} // namespace etcons
