#include "wsp/newton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace wsp {

namespace {

constexpr double kLn2 = 0.6931471805599453;

bool v_decode_branch(const LinkPair& pair, double theta) {
    return power_floors(pair, theta).p_s_low > pair.grid.p_min;
}

}  // namespace

const char* theta0_strategy_name(Theta0Strategy s) {
    switch (s) {
        case Theta0Strategy::Midpoint: return "midpoint";
        case Theta0Strategy::ConvergenceScan: return "scan";
        case Theta0Strategy::ConvergenceScanAlt: return "scan_alt";
        case Theta0Strategy::WarmStart: return "warm";
    }
    return "unknown";
}

const char* solve_status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::Unconverged: return "unconverged";
        case SolveStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

void NewtonConfig::validate() const {
    if (!(epsilon > 0.0)) throw InvalidInput("NewtonConfig: epsilon must be > 0");
    if (max_iter < 1) throw InvalidInput("NewtonConfig: max_iter must be >= 1");
}

std::optional<ThetaInterval> feasible_theta_interval(const LinkPair& pair) {
    pair.validate();
    const ChannelGains& g = pair.gains;
    const double p_max = pair.grid.p_max;
    const double cap_combined = std::log2(1.0 + (g.lambda_pp + g.lambda_sp) * p_max);
    const double cap_decode = std::log2(1.0 + g.lambda_ps * p_max);
    const double cap_secondary = std::log2(1.0 + g.lambda_ss * p_max);
    const double lo = std::max(pair.qos.q_p / cap_combined, pair.qos.q_p / cap_decode);
    const double hi = 0.5 * (1.0 - pair.qos.q_s / cap_secondary);
    if (!(lo < hi) || hi <= 0.0 || lo >= 0.5) return std::nullopt;
    return ThetaInterval{lo, hi};
}

VDerivatives v_derivatives(const LinkPair& pair, double theta) {
    if (!(theta > 0.0 && theta < 0.5))
        throw InvalidInput("v_derivatives: theta must lie in (0, 0.5)");
    const double tau = 1.0 - 2.0 * theta;
    const double w_st = pair.weights.w_st;
    const double lam = pair.gains.lambda_ss;
    const double q_s = pair.qos.q_s;
    VDerivatives d;
    const double decode_floor = (exp2_sat(q_s / tau) - 1.0) / lam;
    if (decode_floor > pair.grid.p_min) {
        const double pow2 = exp2_sat(q_s / tau);
        const double qln = q_s * kLn2;
        d.v = w_st * tau * (pow2 - 1.0) / lam;
        d.v_prime = 2.0 * w_st / lam * (1.0 - (1.0 - qln / tau) * pow2);
        d.v_double_prime = 4.0 * w_st / lam * (qln * qln) / (tau * tau * tau) * pow2;
    } else {
        d.v = w_st * tau * pair.grid.p_min;
        d.v_prime = -2.0 * w_st * pair.grid.p_min;
        d.v_double_prime = 0.0;
    }
    return d;
}

WspThetaEval wsp_theta_eval(const LinkPair& pair, double theta, const LpOptions& opts) {
    WspThetaEval e;
    const LpSolution lp = solve_lp(pair, theta, opts);
    e.case_id = lp.case_id;
    if (lp.case_id == CaseId::Infeasible) return e;
    const VDerivatives vd = v_derivatives(pair, theta);
    e.feasible = true;
    e.w = lp.u + vd.v;
    e.w_prime = lp.u_prime + vd.v_prime;
    e.w_double_prime = lp.u_double_prime + vd.v_double_prime;

    bool v_stable = true;
    const bool here = v_decode_branch(pair, theta);
    const double probe = opts.transition_probe;
    if (theta - probe > 0.0) v_stable = v_stable && v_decode_branch(pair, theta - probe) == here;
    if (theta + probe < 0.5) v_stable = v_stable && v_decode_branch(pair, theta + probe) == here;
    e.smooth = lp.derivative_valid && v_stable;
    return e;
}

namespace {

double third_derivative_fd(const LinkPair& pair, double theta, const ThetaInterval& iv,
                           const LpOptions& opts) {
    const double h = std::min(1e-5, 0.25 * (iv.hi - iv.lo));
    const double lo = std::max(theta - h, iv.lo);
    const double hi = std::min(theta + h, iv.hi);
    if (!(hi > lo)) return 0.0;
    const WspThetaEval a = wsp_theta_eval(pair, lo, opts);
    const WspThetaEval b = wsp_theta_eval(pair, hi, opts);
    if (!a.feasible || !b.feasible) return 0.0;
    return (b.w_double_prime - a.w_double_prime) / (hi - lo);
}

}  // namespace

double select_theta0(const LinkPair& pair, const ThetaInterval& interval,
                     Theta0Strategy strategy, std::optional<double> previous_theta,
                     NewtonTrace* trace) {
    const double midpoint = 0.5 * (interval.lo + interval.hi);
    auto fallback = [&](bool note) {
        if (note && trace) trace->theta0_fell_back_to_midpoint = true;
        return midpoint;
    };
    switch (strategy) {
        case Theta0Strategy::Midpoint:
            return midpoint;
        case Theta0Strategy::WarmStart: {
            if (!previous_theta) return fallback(true);
            const double dt = pair.grid.delta_theta;
            double lo = interval.lo + dt;
            double hi = interval.hi - dt;
            if (!(lo < hi)) return fallback(false);
            return std::clamp(*previous_theta, lo, hi);
        }
        case Theta0Strategy::ConvergenceScan:
        case Theta0Strategy::ConvergenceScanAlt: {
            const LpOptions opts{};
            for (double t : pair.grid.theta_levels()) {
                if (t <= interval.lo || t >= interval.hi) continue;
                const WspThetaEval e = wsp_theta_eval(pair, t, opts);
                if (!e.feasible) continue;
                const double w3 = third_derivative_fd(pair, t, interval, opts);
                if (!(std::fabs(w3) > 1e-12 * std::max(1.0, std::fabs(e.w_double_prime))))
                    continue;
                const bool ok =
                    strategy == Theta0Strategy::ConvergenceScan
                        ? e.w_double_prime * e.w_double_prime >
                              std::fabs(e.w * e.w_prime) / 2.0
                        : std::fabs(e.w_prime * w3) <
                              e.w_double_prime * e.w_double_prime;
                if (ok) return t;
            }
            return fallback(true);
        }
    }
    return midpoint;
}

NewtonOutcome newton_solve(const LinkPair& pair, const NewtonConfig& config) {
    config.validate();
    NewtonOutcome out;
    const auto interval = feasible_theta_interval(pair);
    if (!interval) {
        out.status = SolveStatus::Infeasible;
        return out;
    }
    out.interval = *interval;
    const double lo = interval->lo;
    const double hi = interval->hi;
    const LpOptions& opts = config.lp;

    // Scan W' on the grid thetas inside the interval (plus the endpoints) to
    // bracket the root or detect a one-signed derivative.
    std::vector<double> ts;
    ts.push_back(lo);
    for (double t : pair.grid.theta_levels())
        if (t > lo && t < hi) ts.push_back(t);
    if (ts.size() < 3) ts.push_back(0.5 * (lo + hi));
    ts.push_back(hi);
    std::sort(ts.begin(), ts.end());

    std::vector<double> w1s, ws, tss;
    w1s.reserve(ts.size());
    for (double t : ts) {
        const WspThetaEval e = wsp_theta_eval(pair, t, opts);
        if (!e.feasible) continue;
        tss.push_back(t);
        ws.push_back(e.w);
        w1s.push_back(e.w_prime);
    }
    if (tss.empty()) {
        out.status = SolveStatus::Infeasible;
        return out;
    }

    auto endpoint_result = [&](double theta) {
        out.status = SolveStatus::Converged;
        out.theta_star = theta;
        out.at_interval_endpoint = true;
        out.bracket_lo = out.bracket_hi = theta;
        out.trace.theta0 = theta;
        out.trace.converged = true;
        out.trace.iterations = 0;
        return out;
    };

    const bool any_neg = std::any_of(w1s.begin(), w1s.end(), [](double x) { return x < 0.0; });
    const bool any_pos = std::any_of(w1s.begin(), w1s.end(), [](double x) { return x > 0.0; });
    if (!any_neg) return endpoint_result(tss.front());
    if (!any_pos) return endpoint_result(tss.back());

    const size_t i_min =
        static_cast<size_t>(std::min_element(ws.begin(), ws.end()) - ws.begin());
    double a, b;
    if (w1s[i_min] < 0.0) {
        size_t j = i_min + 1;
        while (j < w1s.size() && w1s[j] < 0.0) ++j;
        if (j == w1s.size()) return endpoint_result(tss.back());
        a = tss[j - 1];
        b = tss[j];
    } else {
        size_t j = i_min;
        while (j > 0 && w1s[j - 1] >= 0.0) --j;
        if (j == 0) return endpoint_result(tss.front());
        a = tss[j - 1];
        b = tss[j];
    }

    NewtonTrace& trace = out.trace;
    const double theta0 =
        std::clamp(select_theta0(pair, *interval, config.theta0, config.previous_theta, &trace),
                   a, b);
    trace.theta0 = theta0;

    double cur = theta0;
    bool converged = false;
    double theta_star = cur;
    for (int k = 0; k < config.max_iter; ++k) {
        const WspThetaEval e = wsp_theta_eval(pair, cur, opts);
        if (!e.feasible) break;
        if (e.w_prime == 0.0) {
            theta_star = cur;
            converged = true;
            break;
        }
        if (e.w_prime < 0.0)
            a = cur;
        else
            b = cur;

        double next;
        StepKind kind;
        if (e.smooth && e.w_double_prime > 0.0) {
            next = cur - e.w_prime / e.w_double_prime;
            kind = StepKind::Newton;
            if (!(next >= a && next <= b)) {
                next = 0.5 * (a + b);
                kind = StepKind::Bisection;
            }
        } else {
            next = 0.5 * (a + b);
            kind = StepKind::Bisection;
        }
        const double delta = std::fabs(next - cur);
        trace.steps.push_back({next, delta, kind});
        ++trace.iterations;
        theta_star = next;
        if (delta <= config.epsilon) {
            converged = true;
            break;
        }
        cur = next;
    }

    trace.converged = converged;
    out.status = converged ? SolveStatus::Converged : SolveStatus::Unconverged;
    if (!converged) theta_star = 0.5 * (a + b);

    // Drive the first-order residual down with a few extra Newton steps; they
    // happen after the stopping test and are not part of the iteration count.
    for (int k = 0; k < 4; ++k) {
        const WspThetaEval e = wsp_theta_eval(pair, theta_star, opts);
        if (!e.feasible || !e.smooth || !(e.w_double_prime > 0.0)) break;
        const double bound =
            1e-6 * std::max(1.0, std::fabs(e.w_double_prime)) * config.epsilon * 1e3;
        if (std::fabs(e.w_prime) <= bound) break;
        const double step = e.w_prime / e.w_double_prime;
        const double next = theta_star - step;
        if (std::fabs(step) > config.epsilon || !(next > lo && next < hi)) break;
        trace.steps.push_back({next, std::fabs(step), StepKind::Polish});
        theta_star = next;
    }

    out.theta_star = theta_star;
    out.bracket_lo = a;
    out.bracket_hi = b;
    return out;
}

std::optional<std::pair<Allocation, Metrics>> snap_to_grid(const LinkPair& pair,
                                                           double theta_star,
                                                           const LpOptions& opts) {
    const std::vector<double> thetas = pair.grid.theta_levels();
    if (thetas.empty()) return std::nullopt;
    auto it = std::upper_bound(thetas.begin(), thetas.end(), theta_star);
    const long floor_idx = (it - thetas.begin()) - 1;  // last grid theta <= theta_star
    const long n = static_cast<long>(thetas.size());
    const std::vector<double> levels = pair.grid.power_levels();
    const long nlv = static_cast<long>(levels.size());

    auto up_idx = [&](double x) -> long {
        if (!(x <= levels.back() * (1.0 + 1e-12))) return -1;
        const long i = std::lower_bound(levels.begin(), levels.end(), x * (1.0 - 1e-12)) -
                       levels.begin();
        return std::min(i, nlv - 1);
    };

    std::optional<std::pair<Allocation, Metrics>> best;
    auto better = [](const std::pair<Allocation, Metrics>& x,
                     const std::pair<Allocation, Metrics>& y) {
        const Allocation &ax = x.first, &ay = y.first;
        const auto kx = std::tuple(x.second.wsp, ax.theta, ax.p_p, ax.p_r, ax.p_s);
        const auto ky = std::tuple(y.second.wsp, ay.theta, ay.p_p, ay.p_r, ay.p_s);
        return kx < ky;
    };
    for (long idx = floor_idx - 2; idx <= floor_idx + 3; ++idx) {
        if (idx < 0 || idx >= n) continue;
        const double tg = thetas[static_cast<size_t>(idx)];
        const CaseGeometry geo = case_geometry(pair, tg);
        if (!geo.feasible) continue;
        const long ps_idx = up_idx(geo.p_s_low);
        const long x_lo = up_idx(geo.p_p_low);
        if (ps_idx < 0 || x_lo < 0) continue;

        // Per grid theta, walk the p_p levels above the rounded-up decode
        // floor and round the induced p_r requirement up; a plain
        // coordinate-wise round-up of the continuous optimizer can lose a
        // whole grid step on one power where trading it against the other is
        // cheaper.
        for (long xi = x_lo; xi < nlv; ++xi) {
            const double y_req =
                std::max(pair.grid.p_min, geo.h(levels[static_cast<size_t>(xi)]));
            const long yi = up_idx(y_req);
            if (yi < 0) continue;  // this p_p level would need p_r beyond p_max
            const Allocation alloc{tg, levels[static_cast<size_t>(xi)],
                                   levels[static_cast<size_t>(yi)],
                                   levels[static_cast<size_t>(ps_idx)]};
            if (!check_feasible(pair, alloc).ok()) continue;
            const Metrics m = compute_metrics(pair, alloc);
            std::pair<Allocation, Metrics> cand{alloc, m};
            if (!best || better(cand, *best)) best = cand;
        }
    }
    return best;
}

SolveResult allocate(const LinkPair& pair, const NewtonConfig& config) {
    SolveResult result;
    const NewtonOutcome out = newton_solve(pair, config);
    result.status = out.status;
    result.trace = out.trace;
    result.interval = out.interval;
    result.at_interval_endpoint = out.at_interval_endpoint;
    if (out.status == SolveStatus::Infeasible) return result;

    double theta = out.theta_star;
    LpSolution lp = solve_lp(pair, theta, config.lp);
    if (lp.case_id == CaseId::Infeasible) {
        const double span = out.interval.hi - out.interval.lo;
        theta = std::clamp(theta, out.interval.lo + 1e-9 * span,
                           out.interval.hi - 1e-9 * span);
        lp = solve_lp(pair, theta, config.lp);
    }
    result.final_case = lp.case_id;
    if (lp.case_id != CaseId::Infeasible) {
        const PowerFloors floors = power_floors(pair, theta);
        const Allocation cont{theta, lp.p_p, lp.p_r, floors.p_s_low};
        result.continuous = cont;
        result.continuous_metrics = compute_metrics(pair, cont);
    }
    if (auto snapped = snap_to_grid(pair, theta, config.lp)) {
        result.snapped = snapped->first;
        result.snapped_metrics = snapped->second;
    }
    return result;
}

}  // namespace wsp
