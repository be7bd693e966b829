#include "etcons/errors.hpp"
#include "etcons/homogeneous.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace etcons;

namespace {

const Mat oscillator = (Mat(2, 2) << 0, 1, -1, 0).finished();
const Mat example_gain = (Mat(1, 2) << 0, -1).finished();

HomoParams example_params() { return {5.0, 0.5, 0.5, 0.5, example_gain}; }

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

} // namespace

TEST_CASE("parameter validation") {
    CHECK_NOTHROW(example_params());
    CHECK_THROWS_AS(HomoParams(0.0, 0.5, 0.5, 0.5, example_gain), ValidationError);
    CHECK_THROWS_AS(HomoParams(1.0, 1.0, 0.5, 0.5, example_gain), ValidationError);
    CHECK_THROWS_AS(HomoParams(1.0, 0.0, 0.5, 0.5, example_gain), ValidationError);
    CHECK_THROWS_AS(HomoParams(1.0, 0.5, -1.0, 0.5, example_gain), ValidationError);
    CHECK_THROWS_AS(HomoParams(1.0, 0.5, 0.5, 0.0, example_gain), ValidationError);
    CHECK(example_params().gain_norm() == doctest::Approx(1.0));
}

TEST_CASE("state estimate propagation") {
    const Vec b = v2(1.0, 0.0);
    CHECK(state_estimate(b, 2.0, 2.0, oscillator) == b);
    CHECK(state_estimate(b, 0.0, 7.0, Mat::Zero(2, 2)) == b);
    const Vec quarter = state_estimate(b, 1.0, 1.0 + std::numbers::pi / 2, oscillator);
    CHECK((quarter - v2(0.0, -1.0)).norm() < 1e-12);
}

TEST_CASE("control input") {
    const auto p = example_params();
    const std::vector<Vec> est{v2(1, 2), v2(0, 1)};
    CHECK(control_input(0, est, UGraph(2), p).isZero());
    CHECK(control_input(0, std::vector<Vec>{v2(1, 1), v2(1, 1)}, UGraph(2, {{0, 1}}), p).isZero());
    const Vec u = control_input(0, est, UGraph(2, {{0, 1}}), p);
    REQUIRE(u.size() == 1);
    CHECK(u(0) == doctest::Approx(-5.0));
}

TEST_CASE("triggering function") {
    const auto p = example_params();
    SUBCASE("zero measurement error never fires") {
        const std::vector<Vec> est{v2(1, 2), v2(0, 1)};
        const double f = triggering_value(0, Vec::Zero(2), est, UGraph(2, {{0, 1}}), p, 1.0);
        CHECK(f == doctest::Approx(-0.5 * 1.0 - 0.5 * std::exp(-0.5)));
    }
    SUBCASE("isolated agent") {
        const std::vector<Vec> est{v2(1, 2), v2(0, 1)};
        const double f = triggering_value(0, v2(3, 3), est, UGraph(2), p, 2.0);
        CHECK(f == doctest::Approx(-0.5 * std::exp(-1.0)));
    }
    SUBCASE("hand evaluation") {
        // ||e||^2 = 0.01, ||G(x~_i - x~_j)||^2 = 0.04.
        const std::vector<Vec> est{v2(0, 0.2), v2(0, 0)};
        const double f = triggering_value(0, v2(0.1, 0.0), est, UGraph(2, {{0, 1}}), p, 0.0);
        CHECK(f == doctest::Approx(-0.48).epsilon(1e-12));
    }
}

TEST_CASE("trigger rule") {
    AgentEventState st;
    st.reset(v2(1, 0), 0.0, {0, 1, 0});
    CHECK(should_trigger(-0.48, {0, 1, 0}, st) == TriggerReason::None);
    CHECK(should_trigger(-1.0, {0, 1, 1}, st) == TriggerReason::Topology);
    CHECK(should_trigger(0.0, {0, 1, 0}, st) == TriggerReason::Function);
    CHECK(should_trigger(0.3, {1, 1, 0}, st) == TriggerReason::Topology);
}

TEST_CASE("reset clears the measurement error") {
    AgentEventState st;
    st.reset(v2(0.3, -0.2), 4.0, {1, 0});
    CHECK(st.last_trigger == 4.0);
    CHECK((st.estimate - v2(0.3, -0.2)).norm() == 0.0);
    CHECK(st.broadcast == st.estimate);
}

TEST_CASE("consensus error") {
    CHECK(consensus_error(Vec::Constant(6, 2.5), 3).isZero());
    CHECK(consensus_error((Vec(2) << 1, -1).finished(), 2) == (Vec(2) << 1, -1).finished());
    CHECK(consensus_error((Vec(3) << 1, 2, 3).finished(), 3) == (Vec(3) << -1, 0, 1).finished());
    CHECK_THROWS_AS(consensus_error(Vec::Zero(5), 2), DimensionError);
}

TEST_CASE("inter-event lower bound") {
    const auto p = example_params();
    CHECK_FALSE(zeno_lower_bound(1.0, 0, 1.0, p, 0.0).has_value());
    CHECK_THROWS_AS(zeno_lower_bound(0.0, 1, 1.0, p, 0.0), InvalidBoundError);

    SUBCASE("fixed point satisfies the implicit equation") {
        for (auto form : {BoundForm::Consistent, BoundForm::Literal}) {
            const double k = form == BoundForm::Consistent ? 4.0 : 1.0;
            const double tau = *zeno_lower_bound(1.0, 1, 1.0, p, 0.0, form);
            const double rhs = std::log1p(1.0 / 5.0 * std::sqrt(0.5 * std::exp(-0.5 * tau) / k));
            CHECK(tau > 0.0);
            CHECK(std::abs(tau - rhs) < 1e-10);
        }
    }
    SUBCASE("the literal form ignores the factor four of the trigger") {
        const double consistent = *zeno_lower_bound(0.7, 2, 1.0, p, 1.0);
        const double literal = *zeno_lower_bound(0.7, 2, 1.0, p, 1.0, BoundForm::Literal);
        CHECK(literal > consistent);
        const HomoParams quarter(5.0, 0.5, 0.125, 0.5, example_gain);
        const double relabelled = *zeno_lower_bound(0.7, 2, 1.0, quarter, 1.0, BoundForm::Literal);
        CHECK(consistent == doctest::Approx(relabelled).epsilon(1e-12));
    }
    SUBCASE("monotone in mu") {
        const HomoParams big(5.0, 0.5, 2.0, 0.5, example_gain);
        CHECK(*zeno_lower_bound(1.0, 1, 1.0, big, 0.0) > *zeno_lower_bound(1.0, 1, 1.0, p, 0.0));
    }
    SUBCASE("tiny mu still gives a positive bound") {
        const HomoParams tiny(5.0, 0.5, 1e-12, 0.5, example_gain);
        const double tau = *zeno_lower_bound(1.0, 1, 1.0, tiny, 0.0);
        CHECK(tau > 0.0);
        CHECK(tau < 1e-6);
    }
    SUBCASE("zero system matrix uses the limit form") {
        const double tau = *zeno_lower_bound(2.0, 1, 0.0, p, 0.0);
        CHECK(std::abs(tau - std::sqrt(0.5 * std::exp(-0.5 * tau) / 4.0) / 10.0) < 1e-12);
    }
}
