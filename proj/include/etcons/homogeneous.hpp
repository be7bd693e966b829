#pragma once

/**
 * @file homogeneous.hpp
 * @brief Event-triggered state consensus for identical linear agents.
 *
 * Each agent broadcasts its state only at its own event instants; every
 * other quantity is reconstructed from the last broadcast through the
 * open-loop flow e^{A (t - t_k)}.
 */

#include "etcons/graph.hpp"
#include "etcons/linalg.hpp"

#include <optional>
#include <span>
#include <vector>

namespace etcons {

/// Coupling gain c, trigger parameters (delta, mu, nu) and gain G.
class HomoParams {
  public:
    /// @throws ValidationError unless c > 0, 0 < delta < 1, mu > 0, nu > 0.
    HomoParams(double c, double delta, double mu, double nu, Mat gain);

    double c() const noexcept { return c_; }
    double delta() const noexcept { return delta_; }
    double mu() const noexcept { return mu_; }
    double nu() const noexcept { return nu_; }
    const Mat& G() const noexcept { return gain_; }
    /// Spectral norm of G.
    double gain_norm() const noexcept { return gain_norm_; }

  private:
    double c_;
    double delta_;
    double mu_;
    double nu_;
    Mat gain_;
    double gain_norm_;
};

enum class TriggerReason { None, Function, Topology };

const char* to_string(TriggerReason r);

struct AgentEventState {
    double last_trigger = 0.0;
    Vec broadcast;
    Vec estimate;
    std::vector<std::uint8_t> adjacency_row;

    /// Record a broadcast of `state` at time t under adjacency row `row`.
    void reset(const Vec& state, double t, std::vector<std::uint8_t> row);
};

/// e^{A (t - t_k)} * broadcast. @throws TimeOrderError if t < t_k.
Vec state_estimate(const Vec& broadcast, double t_k, double t, const Mat& a);

/// u_i = c G sum_j a_ij (x~_i - x~_j).
Vec control_input(AgentIndex i, std::span<const Vec> estimates, const UGraph& g,
                  const HomoParams& p);

/// f_i = 4 d_i ||G||^2 ||e_i||^2 - delta sum_j a_ij ||G (x~_i - x~_j)||^2 - mu e^{-nu t}.
double triggering_value(AgentIndex i, const Vec& e_i, std::span<const Vec> estimates,
                        const UGraph& g, const HomoParams& p, double t);

/// Topology change wins over the function test when both hold.
TriggerReason should_trigger(double f_i, const std::vector<std::uint8_t>& current_row,
                             const AgentEventState& state);

/// xi_i = x_i - mean(x). `stacked` holds N blocks of equal length.
Vec consensus_error(const Vec& stacked, std::size_t agents);

/// Which threshold on ||e_i||^2 the inter-event bound is derived from.
enum class BoundForm {
    /// mu e^{-nu t} / (4 d ||G||^2): the level at which the trigger can first fire.
    Consistent,
    /// mu e^{-nu t} / (d ||G||^2): the printed form, which drops the factor 4
    /// of the trigger and so can exceed the true first-firing time.
    Literal,
};

/**
 * @brief Lower bound on the gap after an event of agent i.
 *
 * Solves tau = (1/||A||) ln(1 + ||A|| / (c sigma ||G||) sqrt(mu e^{-nu (t_k + tau)} / (k d)))
 * with k = 4 (Consistent) or k = 1 (Literal), by fixed-point iteration
 * (bisection if the iteration stalls). For ||A|| = 0 the limit
 * tau = sqrt(mu e^{-nu (t_k + tau)} / (k d)) / (c sigma ||G||) is used.
 *
 * @return nullopt when d_i = 0.
 * @throws InvalidBoundError if sigma <= 0.
 */
std::optional<double> zeno_lower_bound(double sigma, std::size_t degree, double a_norm,
                                       const HomoParams& p, double t_k,
                                       BoundForm form = BoundForm::Consistent);

} // namespace etcons
