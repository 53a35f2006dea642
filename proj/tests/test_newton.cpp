#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "wsp/newton.hpp"
#include "wsp/rng.hpp"

using namespace wsp;

namespace {

LinkPair worked_pair() {
    LinkPair p;
    p.gains = {1, 2, 1, 15};
    p.weights = {1, 1, 1};
    p.qos = {1, 1};
    p.grid = ResourceGrid{0.01, 10.0, 1.0, 0.005};
    return p;
}

double bisect_w_prime(const LinkPair& pair, double lo, double hi) {
    double a = lo, b = hi;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (a + b);
        const WspThetaEval e = wsp_theta_eval(pair, mid);
        REQUIRE(e.feasible);
        if (e.w_prime < 0.0)
            a = mid;
        else
            b = mid;
    }
    return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("v derivatives against the closed forms and finite differences") {
    LinkPair p = worked_pair();
    const VDerivatives d = v_derivatives(p, 0.25);
    CHECK(d.v == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(d.v_prime == doctest::Approx(0.339357).epsilon(1e-5));
    CHECK(d.v_double_prime == doctest::Approx(4.0998).epsilon(1e-4));

    auto v_of = [&](double th) { return v_derivatives(p, th).v; };
    CHECK(d.v_prime ==
          doctest::Approx(wsp::testing::central_diff(v_of, 0.25, 1e-6)).epsilon(1e-6));
    CHECK(d.v_double_prime ==
          doctest::Approx(wsp::testing::second_central_diff(v_of, 0.25, 1e-4)).epsilon(1e-6));

    // Floor-binding branch is linear in theta.
    LinkPair q = p;
    q.gains.lambda_ss = 1e6;
    const VDerivatives lin = v_derivatives(q, 0.25);
    CHECK(lin.v_prime == doctest::Approx(-0.02).epsilon(1e-12));
    CHECK(lin.v_double_prime == 0.0);

    // Exploding secondary cost as theta approaches one half.
    CHECK(v_derivatives(p, 0.4999).v_prime > 1e6);
    CHECK_THROWS_AS(v_derivatives(p, 0.5), InvalidInput);
}

TEST_CASE("feasible theta interval on the worked pair") {
    const auto iv = feasible_theta_interval(worked_pair());
    REQUIRE(iv.has_value());
    CHECK(iv->lo == doctest::Approx(1.0 / std::log2(21.0)).epsilon(1e-12));
    CHECK(iv->hi == doctest::Approx(0.5 * (1.0 - 1.0 / std::log2(151.0))).epsilon(1e-12));
    CHECK(iv->lo == doctest::Approx(0.2277).epsilon(1e-3));
    CHECK(iv->hi == doctest::Approx(0.4309).epsilon(1e-3));

    // Inside the interval all three emptiness predicates hold; outside at
    // least one fails.
    LinkPair p = worked_pair();
    for (double t : {iv->lo + 1e-6, 0.5 * (iv->lo + iv->hi), iv->hi - 1e-6}) {
        const CaseGeometry geo = case_geometry(p, t);
        CHECK(geo.feasible);
    }
    CHECK_FALSE(case_geometry(p, iv->lo - 1e-3).feasible);
    CHECK_FALSE(case_geometry(p, iv->hi + 1e-3).feasible);
}

TEST_CASE("interval infeasibility cases") {
    LinkPair p = worked_pair();
    p.qos.q_p = 10.0;  // requires theta > 2: impossible
    CHECK_FALSE(feasible_theta_interval(p).has_value());

    // Near-degenerate but nonempty interval.
    LinkPair q = worked_pair();
    const double lo = 1.0 / std::log2(21.0);
    q.qos.q_s = (1.0 - 2.0 * (lo + 1e-3)) * std::log2(1.0 + 15.0 * 10.0);
    const auto iv = feasible_theta_interval(q);
    REQUIRE(iv.has_value());
    CHECK(iv->hi - iv->lo == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("theta0 selection") {
    LinkPair p = worked_pair();
    const auto iv = feasible_theta_interval(p);
    REQUIRE(iv.has_value());
    const double dt = p.grid.delta_theta;

    CHECK(select_theta0(p, *iv, Theta0Strategy::Midpoint, std::nullopt) ==
          doctest::Approx(0.5 * (iv->lo + iv->hi)));

    const double inside = 0.5 * (iv->lo + iv->hi) + 0.01;
    CHECK(select_theta0(p, *iv, Theta0Strategy::WarmStart, inside) == inside);
    CHECK(select_theta0(p, *iv, Theta0Strategy::WarmStart, iv->lo - 0.05) ==
          doctest::Approx(iv->lo + dt));
    CHECK(select_theta0(p, *iv, Theta0Strategy::WarmStart, iv->hi + 0.05) ==
          doctest::Approx(iv->hi - dt));

    NewtonTrace trace;
    CHECK(select_theta0(p, *iv, Theta0Strategy::WarmStart, std::nullopt, &trace) ==
          doctest::Approx(0.5 * (iv->lo + iv->hi)));
    CHECK(trace.theta0_fell_back_to_midpoint);

    // The scan start point leads to convergence.
    for (Theta0Strategy s :
         {Theta0Strategy::ConvergenceScan, Theta0Strategy::ConvergenceScanAlt}) {
        NewtonConfig cfg;
        cfg.theta0 = s;
        const NewtonOutcome out = newton_solve(p, cfg);
        CHECK(out.status == SolveStatus::Converged);
    }
}

TEST_CASE("newton on the worked pair matches the bisection oracle") {
    LinkPair p = worked_pair();
    const WspThetaEval at_quarter = wsp_theta_eval(p, 0.25);
    REQUIRE(at_quarter.feasible);
    CHECK(at_quarter.w_prime < 0.0);  // minimum sits to the right of 0.25

    const NewtonOutcome out = newton_solve(p, {});
    REQUIRE(out.status == SolveStatus::Converged);
    CHECK(out.theta_star > 0.25);

    const auto iv = feasible_theta_interval(p);
    const double root = bisect_w_prime(p, iv->lo, iv->hi);
    CHECK(out.theta_star == doctest::Approx(root).epsilon(1e-6));
}

TEST_CASE("one-signed derivative lands on the interval endpoint") {
    // Narrow high-theta interval where the secondary-power term dominates
    // from the start: W' > 0 everywhere, so the minimum is at theta_lo.
    LinkPair p;
    p.gains = {1, 2, 1, 1000};
    p.weights = {1, 1, 1};
    p.grid = ResourceGrid{0.01, 10.0, 1.0, 0.005};
    p.qos.q_p = 0.445 * std::log2(21.0);
    p.qos.q_s = (1.0 - 2.0 * 0.45) * std::log2(1.0 + 1000.0 * 10.0);
    const auto iv = feasible_theta_interval(p);
    REQUIRE(iv.has_value());
    REQUIRE(wsp_theta_eval(p, iv->lo + 1e-9).w_prime > 0.0);
    REQUIRE(wsp_theta_eval(p, iv->hi - 1e-9).w_prime > 0.0);

    const NewtonOutcome out = newton_solve(p, {});
    CHECK(out.status == SolveStatus::Converged);
    CHECK(out.at_interval_endpoint);
    CHECK(out.theta_star == doctest::Approx(iv->lo).epsilon(1e-12));
    CHECK(out.trace.iterations == 0);
}

TEST_CASE("infeasible pair propagates") {
    LinkPair p = worked_pair();
    p.qos.q_p = 50.0;
    const NewtonOutcome out = newton_solve(p, {});
    CHECK(out.status == SolveStatus::Infeasible);
    const SolveResult r = allocate(p, {});
    CHECK(r.status == SolveStatus::Infeasible);
    CHECK_FALSE(r.continuous.has_value());
    CHECK_FALSE(r.snapped.has_value());
}

TEST_CASE("warm start near the optimum converges in very few iterations") {
    // Median <= 2 is asserted at drift-experiment offsets in the sim tests;
    // one full grid step away still needs at most one extra contraction.
    LinkPair p = worked_pair();
    NewtonConfig base;
    base.epsilon = 1e-4;  // iteration-study tolerance
    const NewtonOutcome cold = newton_solve(p, base);
    REQUIRE(cold.status == SolveStatus::Converged);

    for (double off : {-p.grid.delta_theta, p.grid.delta_theta}) {
        NewtonConfig warm = base;
        warm.theta0 = Theta0Strategy::WarmStart;
        warm.previous_theta = cold.theta_star + off;
        const NewtonOutcome out = newton_solve(p, warm);
        CHECK(out.status == SolveStatus::Converged);
        CHECK(out.trace.iterations <= 3);
        CHECK(out.theta_star == doctest::Approx(cold.theta_star).epsilon(1e-4));
    }
    // A quarter-step drift contracts within two applications.
    NewtonConfig warm = base;
    warm.theta0 = Theta0Strategy::WarmStart;
    warm.previous_theta = cold.theta_star + 0.25 * p.grid.delta_theta;
    const NewtonOutcome out = newton_solve(p, warm);
    CHECK(out.status == SolveStatus::Converged);
    CHECK(out.trace.iterations <= 2);
}

TEST_CASE("assembled derivatives: convexity and finite-difference agreement") {
    Rng rng(211);
    int checked = 0;
    while (checked < 60) {
        const auto inst = wsp::testing::random_feasible_instance(rng);
        REQUIRE(inst.has_value());
        const auto& [pair, theta] = *inst;
        const WspThetaEval e = wsp_theta_eval(pair, theta);
        if (!e.feasible || !e.smooth) continue;
        const PowerFloors floors = power_floors(pair, theta);
        if (!(floors.p_s_low > pair.grid.p_min)) continue;

        CHECK(e.w_double_prime > 0.0);

        auto w_of = [&](double th) {
            const WspThetaEval ev = wsp_theta_eval(pair, th);
            REQUIRE(ev.feasible);
            return ev.w;
        };
        const double h1 = 1e-6;
        // Stay inside the current smooth piece.
        if (!wsp_theta_eval(pair, theta - 2 * h1).smooth ||
            !wsp_theta_eval(pair, theta + 2 * h1).smooth)
            continue;
        const double fd1 = wsp::testing::central_diff(w_of, theta, h1);
        CHECK(e.w_prime ==
              doctest::Approx(fd1).epsilon(1e-4).scale(std::max(1.0, std::fabs(fd1))));

        const double h2 = 1e-4;
        if (wsp_theta_eval(pair, theta - 2 * h2).smooth &&
            wsp_theta_eval(pair, theta + 2 * h2).smooth) {
            const double fd2 = wsp::testing::second_central_diff(w_of, theta, h2);
            CHECK(e.w_double_prime ==
                  doctest::Approx(fd2).epsilon(1e-4).scale(std::max(1.0, std::fabs(fd2))));
        }

        // W' strictly increasing across the smooth neighborhood.
        CHECK(wsp_theta_eval(pair, theta + h1).w_prime > wsp_theta_eval(pair, theta - h1).w_prime);
        ++checked;
    }
}

TEST_CASE("newton determinism, bracket sanity and residual bound") {
    Rng rng(223);
    int checked = 0;
    while (checked < 40) {
        const auto inst = wsp::testing::random_feasible_instance(rng);
        REQUIRE(inst.has_value());
        const LinkPair& pair = inst->first;
        NewtonConfig cfg;
        const NewtonOutcome a = newton_solve(pair, cfg);
        const NewtonOutcome b = newton_solve(pair, cfg);
        CHECK(a.status == b.status);
        CHECK(a.theta_star == b.theta_star);
        REQUIRE(a.trace.steps.size() == b.trace.steps.size());
        for (size_t i = 0; i < a.trace.steps.size(); ++i) {
            CHECK(a.trace.steps[i].theta == b.trace.steps[i].theta);
            CHECK(a.trace.steps[i].kind == b.trace.steps[i].kind);
        }
        if (a.status != SolveStatus::Converged) continue;
        CHECK(a.trace.iterations <= cfg.max_iter);

        if (!a.at_interval_endpoint) {
            const WspThetaEval elo = wsp_theta_eval(pair, a.bracket_lo);
            const WspThetaEval ehi = wsp_theta_eval(pair, a.bracket_hi);
            if (elo.feasible && ehi.feasible) {
                CHECK(elo.w_prime <= 1e-9 * std::max(1.0, std::fabs(elo.w_prime)));
                CHECK(ehi.w_prime >= -1e-9 * std::max(1.0, std::fabs(ehi.w_prime)));
            }
            const WspThetaEval estar = wsp_theta_eval(pair, a.theta_star);
            const double bound =
                1e-6 * std::max(1.0, std::fabs(estar.w_double_prime)) * cfg.epsilon * 1e3;
            const bool near_kink = !estar.smooth ||
                                   a.bracket_hi - a.bracket_lo <= 2.0 * cfg.epsilon;
            CHECK((std::fabs(estar.w_prime) <= bound || near_kink));
        }
        ++checked;
    }
}

TEST_CASE("allocate: snapping obeys the grid and dominates the continuous value") {
    LinkPair p = worked_pair();
    const SolveResult r = allocate(p, {});
    REQUIRE(r.status == SolveStatus::Converged);
    REQUIRE(r.continuous.has_value());
    REQUIRE(r.snapped.has_value());
    CHECK(check_feasible(p, *r.snapped).ok());
    CHECK(r.snapped_metrics->wsp >= r.continuous_metrics->wsp - 1e-12);

    // Snapped coordinates are grid members.
    const auto thetas = p.grid.theta_levels();
    const auto powers = p.grid.power_levels();
    auto is_member = [](const std::vector<double>& xs, double v) {
        for (double x : xs)
            if (x == v) return true;
        return false;
    };
    CHECK(is_member(thetas, r.snapped->theta));
    CHECK(is_member(powers, r.snapped->p_p));
    CHECK(is_member(powers, r.snapped->p_r));
    CHECK(is_member(powers, r.snapped->p_s));

    Rng rng(227);
    for (int i = 0; i < 30; ++i) {
        const auto inst = wsp::testing::random_feasible_instance(rng);
        REQUIRE(inst.has_value());
        const SolveResult s = allocate(inst->first, {});
        if (s.status == SolveStatus::Infeasible || !s.snapped) continue;
        CHECK(check_feasible(inst->first, *s.snapped).ok());
        CHECK(s.snapped_metrics->wsp >= s.continuous_metrics->wsp - 1e-12);
    }
}
