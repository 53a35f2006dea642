#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "wsp/model.hpp"
#include "wsp/rng.hpp"

using namespace wsp;

namespace {

LinkPair basic_pair(ChannelGains g, Weights w = {1, 1, 1}, QosReq q = {1, 1},
                    double p_min = 0.01, double p_max = 10.0) {
    LinkPair p;
    p.gains = g;
    p.weights = w;
    p.qos = q;
    p.grid = ResourceGrid{p_min, p_max, 1.0, 0.005};
    return p;
}

}  // namespace

TEST_CASE("dbm/watt conversions") {
    CHECK(dbm_to_watt(30.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dbm_to_watt(0.0) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(dbm_to_watt(-40.0) == doctest::Approx(1e-7).epsilon(1e-12));
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const double w = std::pow(10.0, rng.uniform(-9.0, 2.0));
        CHECK(dbm_to_watt(watt_to_dbm(w)) == doctest::Approx(w).epsilon(1e-12));
    }
    CHECK_THROWS_AS(dbm_to_watt(std::nan("")), InvalidInput);
    CHECK_THROWS_AS(watt_to_dbm(0.0), InvalidInput);
    CHECK_THROWS_AS(watt_to_dbm(-1.0), InvalidInput);
}

TEST_CASE("wsp value and split") {
    LinkPair p = basic_pair({1, 1, 1, 1});
    CHECK(wsp_value(p, {0.25, 0.1, 0.2, 0.4}) == doctest::Approx(0.275).epsilon(1e-12));
    p.weights = {2, 1, 1};
    CHECK(wsp_value(p, {0.25, 0.1, 0.2, 0.4}) == doctest::Approx(0.300).epsilon(1e-12));
    p.weights = {1, 1, 1};
    CHECK(wsp_value(p, {0.1, 1, 1, 1}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(wsp_value(p, {0.6, 1, 1, 1}), InvalidAllocation);
    CHECK_THROWS_AS(wsp_value(p, {0.0, 1, 1, 1}), InvalidAllocation);

    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const LinkPair q = wsp::testing::random_pair(rng);
        const Allocation a{rng.uniform(0.01, 0.49), rng.uniform(0.01, 5.0),
                           rng.uniform(0.01, 5.0), rng.uniform(0.01, 5.0)};
        const Metrics m = compute_metrics(q, a);
        CHECK(m.wsp == doctest::Approx(m.u + m.v).epsilon(1e-12));
        CHECK(m.wsp == doctest::Approx(wsp_value(q, a)).epsilon(1e-12));
    }
}

TEST_CASE("primary SE") {
    CHECK(primary_se(basic_pair({1, 3, 1, 1}), {1.0 / 3.0, 1, 1, 0}) ==
          doctest::Approx(std::log2(3.0) / 3.0).epsilon(1e-12));
    CHECK(primary_se(basic_pair({2, 1, 2, 1}), {0.4, 1, 1, 0}) ==
          doctest::Approx(0.4).epsilon(1e-12));
    CHECK(primary_se(basic_pair({15, 15, 1, 1}), {0.25, 1, 1, 0}) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("secondary SE") {
    CHECK(secondary_se(basic_pair({1, 1, 1, 6}), {0.25, 0, 0, 0.5}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(secondary_se(basic_pair({1, 1, 1, 15}), {0.4, 0, 0, 0.2}) ==
          doctest::Approx(0.4).epsilon(1e-12));
    // S_s vanishes as theta approaches one half.
    CHECK(secondary_se(basic_pair({1, 1, 1, 15}), {0.5 - 1e-9, 0, 0, 0.2}) ==
          doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("monotonicity of the SEs") {
    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
        const LinkPair p = wsp::testing::random_pair(rng);
        const double theta = rng.uniform(0.05, 0.45);
        Allocation a{theta, rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0)};
        Allocation more_pp = a, more_pr = a, more_ps = a, more_theta = a;
        more_pp.p_p *= 1.1;
        more_pr.p_r *= 1.1;
        more_ps.p_s *= 1.1;
        more_theta.theta = std::min(0.49, theta * 1.05);
        CHECK(primary_se(p, more_pp) >= primary_se(p, a));
        CHECK(primary_se(p, more_pr) >= primary_se(p, a));
        CHECK(primary_se(p, more_theta) >= primary_se(p, a));
        CHECK(secondary_se(p, more_ps) >= secondary_se(p, a));
        if (more_theta.theta > theta) CHECK(secondary_se(p, more_theta) < secondary_se(p, a));
    }
}

TEST_CASE("power floors") {
    LinkPair p = basic_pair({1, 2, 1, 15});
    PowerFloors f = power_floors(p, 0.25);
    CHECK(f.p_p_low == doctest::Approx(7.5).epsilon(1e-12));
    CHECK(f.p_s_low == doctest::Approx(0.2).epsilon(1e-12));

    LinkPair p2 = basic_pair({1, 100, 1, 1}, {1, 1, 1}, {0.1, 1});
    CHECK(power_floors(p2, 0.45).p_p_low == doctest::Approx(0.01).epsilon(1e-12));

    CHECK_THROWS_AS(power_floors(p, 0.5), InvalidInput);
    CHECK_THROWS_AS(power_floors(p, -0.1), InvalidInput);

    // Floor exactness: when the decode bound is the active floor, it meets the
    // QoS threshold with equality.
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        const LinkPair q = wsp::testing::random_pair(rng);
        const double theta = rng.uniform(0.05, 0.45);
        const PowerFloors fl = power_floors(q, theta);
        const double threshold = std::exp2(q.qos.q_p / theta) - 1.0;
        if (fl.p_p_low > q.grid.p_min)
            CHECK(q.gains.lambda_ps * fl.p_p_low ==
                  doctest::Approx(threshold).epsilon(1e-10));
        const double s_threshold = std::exp2(q.qos.q_s / (1.0 - 2.0 * theta)) - 1.0;
        if (fl.p_s_low > q.grid.p_min)
            CHECK(q.gains.lambda_ss * fl.p_s_low ==
                  doctest::Approx(s_threshold).epsilon(1e-10));
    }

    // theta -> 0+ saturates the floor instead of trapping.
    CHECK(std::isinf(power_floors(p, 1e-6).p_p_low));
}

TEST_CASE("energy efficiency") {
    LinkPair p = basic_pair({15, 15, 1, 6});
    CHECK(energy_efficiency(p, {0.25, 1, 1, 0.5}) ==
          doctest::Approx(2.0 / 0.75).epsilon(1e-12));
    // Doubling all powers at fixed theta cannot raise EE above half-ish: the
    // denominator doubles while the log numerator grows sublinearly.
    Rng rng(19);
    for (int i = 0; i < 100; ++i) {
        const LinkPair q = wsp::testing::random_pair(rng);
        const Allocation a{rng.uniform(0.05, 0.45), rng.uniform(0.1, 4.0),
                           rng.uniform(0.1, 4.0), rng.uniform(0.1, 4.0)};
        const Allocation b{a.theta, 2 * a.p_p, 2 * a.p_r, 2 * a.p_s};
        CHECK(energy_efficiency(q, b) <= energy_efficiency(q, a) * (1.0 + 1e-12));
    }
    CHECK_THROWS_AS(energy_efficiency(p, {0.25, 0, 0, 0}), InvalidAllocation);
}

TEST_CASE("check_feasible") {
    // Worked instance: the left-edge decode-binding optimum at theta = 0.25.
    LinkPair p = basic_pair({1, 2, 1, 15});
    const Allocation good{0.25, 7.5, 7.5, 0.2};
    CHECK(check_feasible(p, good).ok());

    const auto theta_bad = check_feasible(p, {0.6, 7.5, 7.5, 0.2});
    REQUIRE_FALSE(theta_bad.ok());
    CHECK(theta_bad.violated.front() == Constraint::ThetaRange);

    const auto ps_low = check_feasible(p, {0.25, 7.5, 7.5, 0.19});
    REQUIRE_FALSE(ps_low.ok());
    CHECK(ps_low.violated ==
          std::vector<Constraint>{Constraint::QosSecondary});

    // Independent re-evaluation of every constraint on random allocations.
    Rng rng(23);
    int disagreements = 0;
    for (int i = 0; i < 500; ++i) {
        const LinkPair q = wsp::testing::random_pair(rng);
        const Allocation a{rng.uniform(0.02, 0.48), rng.uniform(0.005, 12.0),
                           rng.uniform(0.005, 12.0), rng.uniform(0.005, 12.0)};
        const double rtol = 1e-9;
        const double thr = std::exp2(q.qos.q_p / a.theta) - 1.0;
        const bool oracle_ok =
            a.p_p >= q.grid.p_min * (1 - rtol) && a.p_p <= q.grid.p_max * (1 + rtol) &&
            a.p_r >= q.grid.p_min * (1 - rtol) && a.p_r <= q.grid.p_max * (1 + rtol) &&
            a.p_s >= q.grid.p_min * (1 - rtol) && a.p_s <= q.grid.p_max * (1 + rtol) &&
            q.gains.lambda_pp * a.p_p + q.gains.lambda_sp * a.p_r >= thr * (1 - rtol) &&
            a.theta * std::log2(1.0 + std::min(q.gains.lambda_ps * a.p_p,
                                               q.gains.lambda_pp * a.p_p +
                                                   q.gains.lambda_sp * a.p_r)) >=
                q.qos.q_p * (1 - rtol) &&
            (1.0 - 2.0 * a.theta) * std::log2(1.0 + q.gains.lambda_ss * a.p_s) >=
                q.qos.q_s * (1 - rtol);
        if (check_feasible(q, a).ok() != oracle_ok) ++disagreements;
    }
    CHECK(disagreements == 0);
}

TEST_CASE("hessian eigenvalues") {
    const auto ev = wsp_hessian_eigenvalues({1, 1, 1});
    CHECK(ev[0] == 0.0);
    CHECK(ev[1] == 0.0);
    CHECK(ev[2] == doctest::Approx(std::sqrt(6.0)).epsilon(1e-12));
    CHECK(ev[3] == doctest::Approx(-std::sqrt(6.0)).epsilon(1e-12));

    CHECK(wsp_hessian_eigenvalues({3, 4, 2})[2] ==
          doctest::Approx(std::sqrt(41.0)).epsilon(1e-12));

    Rng rng(29);
    for (int i = 0; i < 100; ++i) {
        const Weights w{wsp::testing::log_uniform(rng, 0.1, 10.0),
                        wsp::testing::log_uniform(rng, 0.1, 10.0),
                        wsp::testing::log_uniform(rng, 0.1, 10.0)};
        const auto analytic = wsp_hessian_eigenvalues(w);
        const auto numeric = wsp::testing::numeric_wsp_hessian_eigenvalues(w);
        // Numeric solver returns ascending order: {-r, 0, 0, +r}.
        CHECK(numeric[0] == doctest::Approx(analytic[3]).epsilon(1e-9));
        CHECK(std::fabs(numeric[1]) < 1e-9);
        CHECK(std::fabs(numeric[2]) < 1e-9);
        CHECK(numeric[3] == doctest::Approx(analytic[2]).epsilon(1e-9));
        // Product of the nonzero eigenvalues is negative: never PSD.
        CHECK(analytic[2] * analytic[3] < 0.0);
    }
}

TEST_CASE("resource grid levels") {
    ResourceGrid g{dbm_to_watt(-40.0), dbm_to_watt(23.0), 1.0, 0.005};
    const auto powers = g.power_levels();
    CHECK(powers.size() == 64);
    CHECK(powers.front() == doctest::Approx(1e-7).epsilon(1e-12));
    CHECK(powers.back() == g.p_max);
    const auto thetas = g.theta_levels();
    CHECK(thetas.size() == 99);
    CHECK(thetas.front() == doctest::Approx(0.005).epsilon(1e-12));
    CHECK(thetas.back() == doctest::Approx(0.495).epsilon(1e-12));

    CHECK(*g.round_power_up(powers[5]) == powers[5]);
    CHECK(*g.round_power_up(powers[5] * 1.01) == powers[6]);
    CHECK(*g.round_power_up(g.p_max) == g.p_max);
    CHECK_FALSE(g.round_power_up(g.p_max * 1.001).has_value());

    CHECK_THROWS_AS((ResourceGrid{1.0, 0.5, 1.0, 0.005}.validate()), InvalidInput);
    CHECK_THROWS_AS((ResourceGrid{0.1, 1.0, 1.0, 0.3}.validate()), InvalidInput);
}
