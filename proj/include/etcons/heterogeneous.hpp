#pragma once

/**
 * @file heterogeneous.hpp
 * @brief Event-triggered output consensus of heterogeneous followers.
 *
 * A distributed observer reconstructs the exosystem signal w0 from
 * event-sampled neighbour estimates; each follower then applies the
 * local tracking law u_i = K1 x_i + K2 w_i.
 *
 * The observer coupling enters with a minus sign,
 *   dw_i/dt = S w_i - c sum_j a_ij (w~_i - w~_j),
 * which is what makes the observer error z_i = w_i - w0 decay.
 */

#include "etcons/graph.hpp"
#include "etcons/linalg.hpp"

#include <complex>
#include <span>
#include <string>

namespace etcons {

struct Exosystem {
    Mat S;
    Vec w0_init;
    Vec w0;

    Exosystem() = default;
    /// @throws ValidationError if S has an eigenvalue with Re > 1e-8 (1 + ||S||).
    Exosystem(Mat s, Vec w0_initial);

    /// e^{S t} w0_init
    Vec at(double t) const;
};

struct HeteroAgent {
    Mat A;
    Mat B;
    Mat C;
    Mat E;
    Mat F;
    Mat K1;
    Mat K2;
    Vec x;

    RegulatorAgent regulator_data() const { return {A, B, C, E, F}; }
};

/// Which degree multiplies ||eps_i||^2 in the observer trigger.
enum class DegreeMode {
    /// Follower-subgraph degree only.
    Literal,
    /// Follower degree plus the leader link a_i0.
    Inclusive,
};

const char* to_string(DegreeMode m);
DegreeMode parse_degree_mode(const std::string& s);

/// S w_i - c sum_{j=0}^N a_ij (w~_i - w~_j), with w~_0 = w0.
Vec observer_rate(AgentIndex i, const Vec& w_i, std::span<const Vec> estimates,
                  const Vec& leader, const LeaderGraph& g, const Mat& s, double c);

/// d_i ||e^{-S t} e_i||^2 - 1/4 sum_{j=0}^N a_ij ||w~_i - w~_j||^2 - mu e^{-nu t}.
double observer_trigger_value(AgentIndex i, const Vec& e_i, std::span<const Vec> estimates,
                              const Vec& leader, const LeaderGraph& g, const Mat& s, double t,
                              double mu, double nu, DegreeMode mode);

/// Same as observer_trigger_value with e^{-S t} supplied by the caller.
double observer_trigger_value_cached(AgentIndex i, const Vec& e_i,
                                     std::span<const Vec> estimates, const Vec& leader,
                                     const LeaderGraph& g, const Mat& exp_minus_st, double t,
                                     double mu, double nu, DegreeMode mode);

/// u_i = K1 x_i + K2 w_i
Vec control_input(const HeteroAgent& agent, const Vec& w_i);

/// K2 = U_i - K1 Pi_i
Mat compute_K2(const Mat& k1, const RegulatorSolution& reg, AgentIndex i);

/// y_i = C_i x_i + F_i w0
Vec output(const HeteroAgent& agent, const Vec& w0);

/// Assumption-5 style rank test: rank [[A - lambda I, B], [C, 0]] == n + p.
bool transmission_rank_ok(const RegulatorAgent& agent, std::complex<double> lambda);

} // namespace etcons
