#include "etcons/heterogeneous.hpp"

#include "etcons/errors.hpp"

#include <cmath>

namespace etcons {

Exosystem::Exosystem(Mat s, Vec w0_initial)
    : S(std::move(s)), w0_init(std::move(w0_initial)), w0(w0_init) {
    if (S.rows() != S.cols()) {
        throw DimensionError("exosystem matrix S must be square");
    }
    if (w0_init.size() != S.rows()) {
        throw DimensionError("exosystem initial value length does not match S");
    }
    if (S.rows() > 0 && spectral_abscissa(S) > 1e-8 * (1.0 + spectral_norm(S))) {
        throw ValidationError("exosystem matrix S has an eigenvalue with positive real part");
    }
}

Vec Exosystem::at(double t) const { return matrix_exponential(S, t) * w0_init; }

const char* to_string(DegreeMode m) {
    return m == DegreeMode::Literal ? "literal" : "inclusive";
}

DegreeMode parse_degree_mode(const std::string& s) {
    if (s == "literal") {
        return DegreeMode::Literal;
    }
    if (s == "inclusive") {
        return DegreeMode::Inclusive;
    }
    throw ValidationError("degree mode must be 'literal' or 'inclusive', got '" + s + "'");
}

namespace {

void check_observer_args(AgentIndex i, std::span<const Vec> estimates, const Vec& leader,
                         const LeaderGraph& g) {
    if (estimates.size() != g.size()) {
        throw DimensionError("estimate count does not match the follower count");
    }
    if (i >= g.size()) {
        throw std::out_of_range("follower index out of range");
    }
    if (leader.size() != estimates[i].size()) {
        throw DimensionError("leader signal length does not match the observer length");
    }
}

} // namespace

Vec observer_rate(AgentIndex i, const Vec& w_i, std::span<const Vec> estimates,
                  const Vec& leader, const LeaderGraph& g, const Mat& s, double c) {
    check_observer_args(i, estimates, leader, g);
    if (s.cols() != w_i.size()) {
        throw DimensionError("observer state length does not match S");
    }
    Vec coupling = Vec::Zero(w_i.size());
    for (AgentIndex j = 0; j < g.size(); ++j) {
        if (g.followers.adjacent(i, j)) {
            coupling += estimates[i] - estimates[j];
        }
    }
    if (g.linked_to_leader(i)) {
        coupling += estimates[i] - leader;
    }
    return s * w_i - c * coupling;
}

double observer_trigger_value_cached(AgentIndex i, const Vec& e_i,
                                     std::span<const Vec> estimates, const Vec& leader,
                                     const LeaderGraph& g, const Mat& exp_minus_st, double t,
                                     double mu, double nu, DegreeMode mode) {
    check_observer_args(i, estimates, leader, g);
    double d = static_cast<double>(degree(g.followers, i));
    if (mode == DegreeMode::Inclusive && g.linked_to_leader(i)) {
        d += 1.0;
    }
    double disagreement = 0.0;
    for (AgentIndex j = 0; j < g.size(); ++j) {
        if (g.followers.adjacent(i, j)) {
            disagreement += (estimates[i] - estimates[j]).squaredNorm();
        }
    }
    if (g.linked_to_leader(i)) {
        disagreement += (estimates[i] - leader).squaredNorm();
    }
    const double eps_sq = (exp_minus_st * e_i).squaredNorm();
    return d * eps_sq - 0.25 * disagreement - mu * std::exp(-nu * t);
}

double observer_trigger_value(AgentIndex i, const Vec& e_i, std::span<const Vec> estimates,
                              const Vec& leader, const LeaderGraph& g, const Mat& s, double t,
                              double mu, double nu, DegreeMode mode) {
    return observer_trigger_value_cached(i, e_i, estimates, leader, g,
                                         matrix_exponential(s, -t), t, mu, nu, mode);
}

Vec control_input(const HeteroAgent& agent, const Vec& w_i) {
    return agent.K1 * agent.x + agent.K2 * w_i;
}

Mat compute_K2(const Mat& k1, const RegulatorSolution& reg, AgentIndex i) {
    if (i >= reg.Pi.size()) {
        throw std::out_of_range("regulator solution has no agent " + std::to_string(i + 1));
    }
    const Mat& pi = reg.Pi[i];
    const Mat& u = reg.U[i];
    if (k1.cols() != pi.rows() || k1.rows() != u.rows()) {
        throw DimensionError("K1 shape does not match the regulator solution");
    }
    return u - k1 * pi;
}

Vec output(const HeteroAgent& agent, const Vec& w0) { return agent.C * agent.x + agent.F * w0; }

bool transmission_rank_ok(const RegulatorAgent& agent, std::complex<double> lambda) {
    const Eigen::Index n = agent.A.rows();
    const Eigen::Index m = agent.B.cols();
    const Eigen::Index p = agent.C.rows();
    CMat sys = CMat::Zero(n + p, n + m);
    sys.topLeftCorner(n, n) = agent.A.cast<std::complex<double>>();
    sys.topLeftCorner(n, n).diagonal().array() -= lambda;
    sys.topRightCorner(n, m) = agent.B.cast<std::complex<double>>();
    sys.bottomLeftCorner(p, n) = agent.C.cast<std::complex<double>>();
    const double scale = 1.0 + spectral_norm(agent.A) + spectral_norm(agent.B) +
                         spectral_norm(agent.C) + std::abs(lambda);
    return numeric_rank(sys, 1e-8 * scale) == n + p;
}

} // namespace etcons
