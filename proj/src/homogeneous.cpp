#include "etcons/homogeneous.hpp"

#include "etcons/errors.hpp"

#include <cmath>
#include <string>

namespace etcons {

HomoParams::HomoParams(double c, double delta, double mu, double nu, Mat gain)
    : c_(c), delta_(delta), mu_(mu), nu_(nu), gain_(std::move(gain)) {
    if (!(c_ > 0.0) || !std::isfinite(c_)) {
        throw ValidationError("coupling gain c must be positive");
    }
    if (!(delta_ > 0.0 && delta_ < 1.0)) {
        throw ValidationError("delta must lie in (0, 1)");
    }
    if (!(mu_ > 0.0) || !std::isfinite(mu_)) {
        throw ValidationError("mu must be positive");
    }
    if (!(nu_ > 0.0) || !std::isfinite(nu_)) {
        throw ValidationError("nu must be positive");
    }
    if (!gain_.allFinite()) {
        throw ValidationError("gain G has non-finite entries");
    }
    gain_norm_ = spectral_norm(gain_);
}

const char* to_string(TriggerReason r) {
    switch (r) {
    case TriggerReason::None:
        return "none";
    case TriggerReason::Function:
        return "function";
    case TriggerReason::Topology:
        return "topology";
    }
    return "none";
}

void AgentEventState::reset(const Vec& state, double t, std::vector<std::uint8_t> row) {
    last_trigger = t;
    broadcast = state;
    estimate = state;
    adjacency_row = std::move(row);
}

Vec state_estimate(const Vec& broadcast, double t_k, double t, const Mat& a) {
    if (t < t_k) {
        throw TimeOrderError("estimate requested at t = " + std::to_string(t) +
                             " before the broadcast time " + std::to_string(t_k));
    }
    if (a.cols() != broadcast.size()) {
        throw DimensionError("broadcast state length does not match A");
    }
    return matrix_exponential(a, t - t_k) * broadcast;
}

namespace {

void check_estimates(AgentIndex i, std::span<const Vec> estimates, const UGraph& g) {
    if (estimates.size() != g.size()) {
        throw DimensionError("estimate count does not match the graph size");
    }
    if (i >= g.size()) {
        throw std::out_of_range("agent index out of range");
    }
}

} // namespace

Vec control_input(AgentIndex i, std::span<const Vec> estimates, const UGraph& g,
                  const HomoParams& p) {
    check_estimates(i, estimates, g);
    if (p.G().cols() != estimates[i].size()) {
        throw DimensionError("gain G column count does not match the state length");
    }
    Vec diff = Vec::Zero(estimates[i].size());
    for (AgentIndex j = 0; j < g.size(); ++j) {
        if (g.adjacent(i, j)) {
            diff += estimates[i] - estimates[j];
        }
    }
    return p.c() * (p.G() * diff);
}

double triggering_value(AgentIndex i, const Vec& e_i, std::span<const Vec> estimates,
                        const UGraph& g, const HomoParams& p, double t) {
    check_estimates(i, estimates, g);
    const auto d = static_cast<double>(degree(g, i));
    const double gn = p.gain_norm();
    double disagreement = 0.0;
    for (AgentIndex j = 0; j < g.size(); ++j) {
        if (g.adjacent(i, j)) {
            disagreement += (p.G() * (estimates[i] - estimates[j])).squaredNorm();
        }
    }
    return 4.0 * d * gn * gn * e_i.squaredNorm() - p.delta() * disagreement -
           p.mu() * std::exp(-p.nu() * t);
}

TriggerReason should_trigger(double f_i, const std::vector<std::uint8_t>& current_row,
                             const AgentEventState& state) {
    if (current_row != state.adjacency_row) {
        return TriggerReason::Topology;
    }
    if (f_i >= 0.0) {
        return TriggerReason::Function;
    }
    return TriggerReason::None;
}

Vec consensus_error(const Vec& stacked, std::size_t agents) {
    if (agents == 0 || stacked.size() % static_cast<Eigen::Index>(agents) != 0) {
        throw DimensionError("stacked state length is not a multiple of the agent count");
    }
    const Eigen::Index n = stacked.size() / static_cast<Eigen::Index>(agents);
    const auto N = static_cast<Eigen::Index>(agents);
    Vec mean = Vec::Zero(n);
    for (Eigen::Index i = 0; i < N; ++i) {
        mean += stacked.segment(i * n, n);
    }
    mean /= static_cast<double>(agents);
    Vec xi(stacked.size());
    for (Eigen::Index i = 0; i < N; ++i) {
        xi.segment(i * n, n) = stacked.segment(i * n, n) - mean;
    }
    return xi;
}

std::optional<double> zeno_lower_bound(double sigma, std::size_t degree, double a_norm,
                                       const HomoParams& p, double t_k, BoundForm form) {
    if (!(sigma > 0.0)) {
        throw InvalidBoundError("sigma must be positive for the inter-event bound");
    }
    if (degree == 0) {
        return std::nullopt;
    }
    if (!(p.gain_norm() > 0.0)) {
        throw InvalidBoundError("gain G is zero; the inter-event bound is undefined");
    }
    const double d = static_cast<double>(degree) * (form == BoundForm::Consistent ? 4.0 : 1.0);
    const double k = p.c() * sigma * p.gain_norm();
    auto rhs = [&](double tau) {
        const double root = std::sqrt(p.mu() * std::exp(-p.nu() * (t_k + tau)) / d);
        if (a_norm <= 0.0) {
            return root / k;
        }
        return std::log1p(a_norm / k * root) / a_norm;
    };

    double tau = 0.0;
    for (int it = 0; it < 500; ++it) {
        const double next = rhs(tau);
        if (std::abs(next - tau) <= 1e-12 * (1.0 + tau)) {
            return next;
        }
        tau = next;
    }
    // The map is decreasing, so tau - rhs(tau) is increasing with a root in [0, rhs(0)].
    double lo = 0.0;
    double hi = rhs(0.0);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (mid - rhs(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace etcons
