#include "wsp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "wsp/rng.hpp"

namespace wsp {

namespace {

constexpr double kLn2 = 0.6931471805599453;

using CandidateKey = std::tuple<double, double, double, double, double>;

CandidateKey wsp_key(const Allocation& a, const Metrics& m) {
    return {m.wsp, a.theta, a.p_p, a.p_r, a.p_s};
}

CandidateKey ee_key(const Allocation& a, const Metrics& m) {
    return {-m.ee, a.theta, a.p_p, a.p_r, a.p_s};
}

struct Best {
    bool found = false;
    CandidateKey key{};
    GridSolution sol{};

    void offer(const CandidateKey& k, const Allocation& a, const Metrics& m) {
        if (!found || k < key) {
            found = true;
            key = k;
            sol = GridSolution{a, m};
        }
    }
    void merge(const Best& other) {
        if (other.found) offer(other.key, other.sol.alloc, other.sol.metrics);
    }
};

using KeyFn = CandidateKey (*)(const Allocation&, const Metrics&);

// Smallest grid p_s whose secondary SE passes the feasibility tolerance at
// this theta, so the reduced mode prunes exactly the tuples the naive mode
// would reject.
std::optional<double> min_feasible_ps(const LinkPair& pair, double theta,
                                      const std::vector<double>& levels) {
    const double target = pair.qos.q_s * (1.0 - kFeasibilityRtol);
    auto it = std::partition_point(levels.begin(), levels.end(), [&](double ps) {
        return secondary_se(pair, Allocation{theta, 0, 0, ps}) < target;
    });
    if (it == levels.end()) return std::nullopt;
    return *it;
}

Best search_theta(const LinkPair& pair, double theta, const std::vector<double>& powers,
                  ExhaustiveMode mode, KeyFn key_fn) {
    Best best;
    std::vector<double> ps_levels;
    if (mode == ExhaustiveMode::Reduced) {
        const auto ps = min_feasible_ps(pair, theta, powers);
        if (!ps) return best;
        ps_levels.push_back(*ps);
    } else {
        ps_levels = powers;
    }
    for (double pp : powers) {
        for (double pr : powers) {
            for (double ps : ps_levels) {
                const Allocation alloc{theta, pp, pr, ps};
                if (!check_feasible(pair, alloc).ok()) continue;
                const Metrics m = compute_metrics(pair, alloc);
                best.offer(key_fn(alloc, m), alloc, m);
            }
        }
    }
    return best;
}

std::optional<GridSolution> grid_search(const LinkPair& pair, ExhaustiveMode mode,
                                        Parallelism par, KeyFn key_fn) {
    pair.validate();
    const std::vector<double> powers = pair.grid.power_levels();
    const std::vector<double> thetas = pair.grid.theta_levels();
    Best best;
    if (par == Parallelism::OpenMp) {
        const int n = static_cast<int>(thetas.size());
#pragma omp parallel
        {
            Best local;
#pragma omp for schedule(dynamic, 1) nowait
            for (int i = 0; i < n; ++i)
                local.merge(search_theta(pair, thetas[static_cast<size_t>(i)], powers, mode,
                                         key_fn));
#pragma omp critical
            best.merge(local);
        }
    } else {
        for (double theta : thetas) best.merge(search_theta(pair, theta, powers, mode, key_fn));
    }
    if (!best.found) return std::nullopt;
    return best.sol;
}

}  // namespace

std::optional<GridSolution> exhaustive_optimal(const LinkPair& pair, ExhaustiveMode mode,
                                               Parallelism par) {
    return grid_search(pair, mode, par, wsp_key);
}

std::optional<GridSolution> exhaustive_ee_max(const LinkPair& pair, Parallelism par) {
    return grid_search(pair, ExhaustiveMode::Naive, par, ee_key);
}

RandomDraw random_alloc(const LinkPair& pair, uint64_t seed) {
    pair.validate();
    const std::vector<double> powers = pair.grid.power_levels();
    const std::vector<double> thetas = pair.grid.theta_levels();
    Rng rng(derive_seed(seed, 0x72616e64));
    RandomDraw draw;
    draw.alloc.theta = thetas[rng.bounded(thetas.size())];
    draw.alloc.p_p = powers[rng.bounded(powers.size())];
    draw.alloc.p_r = powers[rng.bounded(powers.size())];
    draw.alloc.p_s = powers[rng.bounded(powers.size())];
    draw.verdict = check_feasible(pair, draw.alloc);
    return draw;
}

// ---------------------------------------------------------------------------
// KKT active-set enumeration.
//
// Constraints (as g_i(x) >= 0 with multipliers mu_i >= 0):
//   g0 theta, g1 0.5-theta, g2 combined QoS, g3 p_p - p_p_low(theta),
//   g4 p_max - p_p, g5 p_r - p_min, g6 p_max - p_r,
//   g7 p_s - p_s_low(theta), g8 p_max - p_s.
// g0/g1 cannot be active at a candidate, so 2^9 patterns reduce to 2^7.
// Stationarity in p_s forces g7 active (mu8 alone would need to be negative),
// and pinning p_p/p_r leaves at most one scalar equation in theta per
// pattern: either a pinning identity or the theta-stationarity F(theta) = 0.
// ---------------------------------------------------------------------------

namespace {

struct ThetaTerms {
    double threshold = 0;   // 2^(Q_p/theta) - 1
    double g2_slope = 0;    // d/dtheta of 2^(Q_p/theta), negated (positive)
    double pp_low = 0;
    bool pp_decode = false;
    double pp_low_slope = 0;  // -d pp_low/dtheta (>= 0)
    double ps_low = 0;
    bool ps_decode = false;
    double ps_low_slope = 0;  // +d ps_low/dtheta (>= 0)
};

ThetaTerms theta_terms(const LinkPair& pair, double theta) {
    ThetaTerms t;
    const double qp = pair.qos.q_p;
    const double qs = pair.qos.q_s;
    const double tau = 1.0 - 2.0 * theta;
    const double pow_p = exp2_sat(qp / theta);
    const double pow_s = exp2_sat(qs / tau);
    t.threshold = pow_p - 1.0;
    t.g2_slope = qp * kLn2 / (theta * theta) * pow_p;
    const double decode_floor = t.threshold / pair.gains.lambda_ps;
    t.pp_decode = decode_floor > pair.grid.p_min;
    t.pp_low = std::max(pair.grid.p_min, decode_floor);
    t.pp_low_slope = t.pp_decode ? t.g2_slope / pair.gains.lambda_ps : 0.0;
    const double ps_floor = (pow_s - 1.0) / pair.gains.lambda_ss;
    t.ps_decode = ps_floor > pair.grid.p_min;
    t.ps_low = std::max(pair.grid.p_min, ps_floor);
    t.ps_low_slope =
        t.ps_decode ? 2.0 * qs * kLn2 / (tau * tau) * pow_s / pair.gains.lambda_ss : 0.0;
    return t;
}

enum class PowerSrc { Floor, Max, FromQos };
enum class ThetaEq { None, PpLowEqPMax, PsLowEqPMax, QosPinned };

struct Pattern {
    bool qos = false, pp_low = false, pp_max = false;
    bool pr_min = false, pr_max = false, ps_low = false, ps_max = false;
    uint16_t mask() const {
        uint16_t m = 0;
        if (qos) m |= 1u << kCombinedQos;
        if (pp_low) m |= 1u << kPpLow;
        if (pp_max) m |= 1u << kPpMax;
        if (pr_min) m |= 1u << kPrMin;
        if (pr_max) m |= 1u << kPrMax;
        if (ps_low) m |= 1u << kPsLow;
        if (ps_max) m |= 1u << kPsMax;
        return m;
    }
};

struct Plan {
    bool viable = false;
    PowerSrc pp = PowerSrc::Max;
    PowerSrc pr = PowerSrc::Max;
    ThetaEq theta_eq = ThetaEq::None;
};

Plan make_plan(const Pattern& p) {
    Plan plan;
    if (!p.ps_low) return plan;         // mu8 alone would be negative
    if (p.pr_min && p.pr_max) return plan;
    int theta_eqs = 0;
    if (p.ps_max) {
        plan.theta_eq = ThetaEq::PsLowEqPMax;
        ++theta_eqs;
    }

    bool pp_pinned = true;
    if (p.pp_low && p.pp_max) {
        plan.pp = PowerSrc::Max;
        plan.theta_eq = ThetaEq::PpLowEqPMax;
        ++theta_eqs;
    } else if (p.pp_low) {
        plan.pp = PowerSrc::Floor;
    } else if (p.pp_max) {
        plan.pp = PowerSrc::Max;
    } else {
        pp_pinned = false;
    }

    bool pr_pinned = true;
    if (p.pr_min) {
        plan.pr = PowerSrc::Floor;
    } else if (p.pr_max) {
        plan.pr = PowerSrc::Max;
    } else {
        pr_pinned = false;
    }

    if (p.qos) {
        if (!pp_pinned && !pr_pinned) return plan;  // whole-edge degenerate
        if (!pp_pinned) {
            plan.pp = PowerSrc::FromQos;
        } else if (!pr_pinned) {
            plan.pr = PowerSrc::FromQos;
        } else {
            plan.theta_eq = ThetaEq::QosPinned;
            ++theta_eqs;
        }
    } else if (!pp_pinned || !pr_pinned) {
        return plan;  // a free power has no multiplier support
    }
    if (theta_eqs >= 2) return plan;
    plan.viable = true;
    return plan;
}

struct Primal {
    double pp = 0, pr = 0, ps = 0;
};

Primal eval_primal(const LinkPair& pair, const Plan& plan, const ThetaTerms& t) {
    const double p_min = pair.grid.p_min;
    const double p_max = pair.grid.p_max;
    Primal x;
    x.ps = t.ps_low;
    if (plan.pp != PowerSrc::FromQos)
        x.pp = plan.pp == PowerSrc::Floor ? t.pp_low : p_max;
    if (plan.pr != PowerSrc::FromQos)
        x.pr = plan.pr == PowerSrc::Floor ? p_min : p_max;
    if (plan.pp == PowerSrc::FromQos)
        x.pp = (t.threshold - pair.gains.lambda_sp * x.pr) / pair.gains.lambda_pp;
    if (plan.pr == PowerSrc::FromQos)
        x.pr = (t.threshold - pair.gains.lambda_pp * x.pp) / pair.gains.lambda_sp;
    return x;
}

// Square/overdetermined solve of A x = b (rows <= 3, cols <= 3) via normal
// equations with a pivot tolerance; returns false when singular or
// inconsistent beyond tol.
bool solve_small(const std::vector<std::array<double, 3>>& rows,
                 const std::vector<double>& rhs, int ncols, std::array<double, 3>& x,
                 double* residual_out) {
    const int m = ncols;
    double ata[3][3] = {};
    double atb[3] = {};
    for (size_t r = 0; r < rows.size(); ++r) {
        for (int i = 0; i < m; ++i) {
            atb[i] += rows[r][static_cast<size_t>(i)] * rhs[r];
            for (int j = 0; j < m; ++j)
                ata[i][j] += rows[r][static_cast<size_t>(i)] * rows[r][static_cast<size_t>(j)];
        }
    }
    double aug[3][4];
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) aug[i][j] = ata[i][j];
        aug[i][m] = atb[i];
    }
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r)
            if (std::fabs(aug[r][col]) > std::fabs(aug[piv][col])) piv = r;
        if (std::fabs(aug[piv][col]) < 1e-14) return false;
        if (piv != col)
            for (int j = col; j <= m; ++j) std::swap(aug[col][j], aug[piv][j]);
        for (int r = 0; r < m; ++r) {
            if (r == col) continue;
            const double factor = aug[r][col] / aug[col][col];
            for (int j = col; j <= m; ++j) aug[r][j] -= factor * aug[col][j];
        }
    }
    for (int i = 0; i < m; ++i) x[static_cast<size_t>(i)] = aug[i][m] / aug[i][i];

    double max_res = 0.0, scale = 1.0;
    for (size_t r = 0; r < rows.size(); ++r) {
        double acc = -rhs[r];
        for (int i = 0; i < m; ++i) acc += rows[r][static_cast<size_t>(i)] * x[static_cast<size_t>(i)];
        max_res = std::max(max_res, std::fabs(acc));
        scale = std::max(scale, std::fabs(rhs[r]));
    }
    if (residual_out) *residual_out = max_res;
    return max_res <= 1e-7 * scale;
}

struct MultiplierSolve {
    bool ok = false;
    // mu[0..8] in constraint order; mu0/mu1 are always zero.
    std::array<double, 9> mu{};
};

// Unknown columns in fixed order; viable plans activate at most three.
struct UnknownSet {
    std::array<int, 6> ids{};  // KktConstraint values
    int count = 0;
    void add(int id) { ids[static_cast<size_t>(count++)] = id; }
    int col(int id) const {
        for (int i = 0; i < count; ++i)
            if (ids[static_cast<size_t>(i)] == id) return i;
        return -1;
    }
};

MultiplierSolve solve_multipliers(const LinkPair& pair, const Pattern& pat,
                                  const ThetaTerms& t, const Primal& x, double theta,
                                  bool use_theta_row) {
    MultiplierSolve out;
    const ChannelGains& g = pair.gains;
    const Weights& w = pair.weights;
    const double tau = 1.0 - 2.0 * theta;

    UnknownSet unknowns;
    if (pat.qos) unknowns.add(kCombinedQos);
    if (pat.pp_low) unknowns.add(kPpLow);
    if (pat.pp_max) unknowns.add(kPpMax);
    if (pat.pr_min) unknowns.add(kPrMin);
    if (pat.pr_max) unknowns.add(kPrMax);
    const bool mu7_unknown = pat.ps_max;
    if (mu7_unknown) unknowns.add(kPsLow);
    const int m = unknowns.count;
    if (m == 0 || m > 3) return out;

    const double mu7_known = w.w_st * tau;
    const double w_theta = w.w_pt * x.pp + w.w_sr * x.pr - 2.0 * w.w_st * x.ps;

    std::vector<std::array<double, 3>> rows;
    std::vector<double> rhs;
    auto add_row = [&](std::initializer_list<std::pair<int, double>> coefs, double b) {
        std::array<double, 3> row{};
        for (const auto& [id, c] : coefs) {
            const int col = unknowns.col(id);
            if (col >= 0) row[static_cast<size_t>(col)] = c;
            // Coefficients on non-active multipliers are zero contributions.
        }
        rows.push_back(row);
        rhs.push_back(b);
    };

    add_row({{kCombinedQos, g.lambda_pp}, {kPpLow, 1.0}, {kPpMax, -1.0}}, w.w_pt * theta);
    add_row({{kCombinedQos, g.lambda_sp}, {kPrMin, 1.0}, {kPrMax, -1.0}}, w.w_sr * theta);
    if (use_theta_row) {
        double b = w_theta;
        if (!mu7_unknown) b += mu7_known * t.ps_low_slope;
        add_row({{kCombinedQos, t.g2_slope},
                 {kPpLow, t.pp_low_slope},
                 {kPsLow, -t.ps_low_slope}},
                b);
    }

    std::array<double, 3> sol{};
    if (!solve_small(rows, rhs, m, sol, nullptr)) return out;

    out.mu.fill(0.0);
    for (int i = 0; i < m; ++i)
        out.mu[static_cast<size_t>(unknowns.ids[static_cast<size_t>(i)])] =
            sol[static_cast<size_t>(i)];
    if (!mu7_unknown) {
        out.mu[kPsLow] = mu7_known;
    } else {
        out.mu[kPsMax] = out.mu[kPsLow] - mu7_known;  // split of the p_s stationarity
    }
    out.ok = true;
    return out;
}

double stationarity_residual(const LinkPair& pair, const ThetaTerms& t, const Primal& x,
                             double theta, const std::array<double, 9>& mu) {
    const ChannelGains& g = pair.gains;
    const Weights& w = pair.weights;
    const double tau = 1.0 - 2.0 * theta;
    const double r_pp = w.w_pt * theta - mu[kCombinedQos] * g.lambda_pp - mu[kPpLow] + mu[kPpMax];
    const double r_pr = w.w_sr * theta - mu[kCombinedQos] * g.lambda_sp - mu[kPrMin] + mu[kPrMax];
    const double r_ps = w.w_st * tau - mu[kPsLow] + mu[kPsMax];
    const double r_th = (w.w_pt * x.pp + w.w_sr * x.pr - 2.0 * w.w_st * x.ps) -
                        mu[kCombinedQos] * t.g2_slope - mu[kPpLow] * t.pp_low_slope +
                        mu[kPsLow] * t.ps_low_slope;
    return std::max(std::max(std::fabs(r_pp), std::fabs(r_pr)),
                    std::max(std::fabs(r_ps), std::fabs(r_th)));
}

// Scan for sign changes, then shrink each bracket by bisection (the function
// may be non-monotone across patterns; bisection is safe either way).
void scan_roots(const std::function<double(double)>& f, double lo, double hi, int n,
                std::vector<double>& roots) {
    if (!(hi > lo)) return;
    double prev_x = lo;
    double prev_f = f(lo);
    for (int i = 1; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double fx = f(x);
        if (std::isfinite(prev_f) && std::isfinite(fx)) {
            if (prev_f == 0.0) {
                roots.push_back(prev_x);
            } else if (prev_f * fx < 0.0) {
                double a = prev_x, b = x, fa = prev_f;
                for (int it = 0; it < 80; ++it) {
                    const double mid = 0.5 * (a + b);
                    if (b - a < 1e-15 * std::max(1.0, std::fabs(mid))) break;
                    const double fm = f(mid);
                    if (fm == 0.0) {
                        a = b = mid;
                        break;
                    }
                    if ((fm < 0.0) == (fa < 0.0)) {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                }
                roots.push_back(0.5 * (a + b));
            }
        }
        prev_x = x;
        prev_f = fx;
    }
    if (std::isfinite(prev_f) && prev_f == 0.0) roots.push_back(prev_x);
}

}  // namespace

std::vector<KktCandidate> kkt_candidates(const LinkPair& pair) {
    pair.validate();
    std::vector<KktCandidate> candidates;
    const auto interval = feasible_theta_interval(pair);
    if (!interval) return candidates;
    const double span = interval->hi - interval->lo;
    const double dom_lo = std::max(1e-9, interval->lo - 1e-6 * span);
    const double dom_hi = std::min(0.5 - 1e-9, interval->hi + 1e-6 * span);

    // Branch kinks of the two moving floors split the scan domain.
    std::vector<double> cuts{dom_lo, dom_hi};
    const double cap_decode_min = std::log2(1.0 + pair.gains.lambda_ps * pair.grid.p_min);
    if (cap_decode_min > 0.0) {
        const double tb = pair.qos.q_p / cap_decode_min;
        if (tb > dom_lo && tb < dom_hi) cuts.push_back(tb);
    }
    const double cap_sec_min = std::log2(1.0 + pair.gains.lambda_ss * pair.grid.p_min);
    if (cap_sec_min > 0.0) {
        const double ts = 0.5 * (1.0 - pair.qos.q_s / cap_sec_min);
        if (ts > dom_lo && ts < dom_hi) cuts.push_back(ts);
    }
    std::sort(cuts.begin(), cuts.end());

    const double mu_tol = 1e-9;
    for (int bits = 0; bits < 128; ++bits) {
        Pattern pat;
        pat.qos = bits & 1;
        pat.pp_low = bits & 2;
        pat.pp_max = bits & 4;
        pat.pr_min = bits & 8;
        pat.pr_max = bits & 16;
        pat.ps_low = bits & 32;
        pat.ps_max = bits & 64;
        const Plan plan = make_plan(pat);
        if (!plan.viable) continue;

        auto try_theta = [&](double theta, bool free_theta) {
            const ThetaTerms t = theta_terms(pair, theta);
            const Primal x = eval_primal(pair, plan, t);
            if (!std::isfinite(x.pp) || !std::isfinite(x.pr) || !std::isfinite(x.ps)) return;
            const MultiplierSolve ms =
                solve_multipliers(pair, pat, t, x, theta, /*use_theta_row=*/!free_theta);
            if (!ms.ok) return;
            for (double mu : ms.mu)
                if (mu < -mu_tol) return;
            const Allocation alloc{theta, x.pp, x.pr, x.ps};
            if (!check_feasible(pair, alloc).ok()) return;
            KktCandidate cand;
            cand.alloc = alloc;
            cand.wsp = wsp_value(pair, alloc);
            cand.active_mask = pat.mask();
            cand.multipliers = ms.mu;
            cand.multipliers_ok = true;
            cand.stationarity_residual = stationarity_residual(pair, t, x, theta, ms.mu);
            // Bisection across a floor kink converges on the jump itself, not
            // on a stationary point; the residual filter rejects those.
            if (cand.stationarity_residual > 1e-6) return;
            candidates.push_back(cand);
        };

        std::function<double(double)> equation;
        bool free_theta = false;
        switch (plan.theta_eq) {
            case ThetaEq::PpLowEqPMax:
                equation = [&](double th) {
                    return theta_terms(pair, th).pp_low - pair.grid.p_max;
                };
                break;
            case ThetaEq::PsLowEqPMax:
                equation = [&](double th) {
                    return theta_terms(pair, th).ps_low - pair.grid.p_max;
                };
                break;
            case ThetaEq::QosPinned:
                equation = [&](double th) {
                    const ThetaTerms t = theta_terms(pair, th);
                    const Primal x = eval_primal(pair, plan, t);
                    return pair.gains.lambda_pp * x.pp + pair.gains.lambda_sp * x.pr -
                           t.threshold;
                };
                break;
            case ThetaEq::None: {
                free_theta = true;
                equation = [&](double th) {
                    const ThetaTerms t = theta_terms(pair, th);
                    const Primal x = eval_primal(pair, plan, t);
                    const MultiplierSolve ms = solve_multipliers(pair, pat, t, x, th,
                                                                 /*use_theta_row=*/false);
                    if (!ms.ok) return std::numeric_limits<double>::quiet_NaN();
                    const double mu7 = ms.mu[kPsLow];
                    const double w_theta = pair.weights.w_pt * x.pp +
                                           pair.weights.w_sr * x.pr -
                                           2.0 * pair.weights.w_st * x.ps;
                    return ms.mu[kCombinedQos] * t.g2_slope + ms.mu[kPpLow] * t.pp_low_slope -
                           mu7 * t.ps_low_slope - w_theta;
                };
                break;
            }
        }

        std::vector<double> roots;
        for (size_t c = 0; c + 1 < cuts.size(); ++c)
            scan_roots(equation, cuts[c], cuts[c + 1], 256, roots);
        for (double th : roots) {
            if (!(th > 0.0 && th < 0.5)) continue;
            try_theta(th, free_theta);
        }
    }
    return candidates;
}

std::optional<KktResult> kkt_alloc(const LinkPair& pair) {
    const std::vector<KktCandidate> candidates = kkt_candidates(pair);
    if (candidates.empty()) return std::nullopt;
    const KktCandidate* best = &candidates.front();
    auto key = [](const KktCandidate& c) {
        return std::tuple(c.wsp, c.alloc.theta, c.alloc.p_p, c.alloc.p_r, c.alloc.p_s);
    };
    for (const KktCandidate& c : candidates)
        if (key(c) < key(*best)) best = &c;

    KktResult result;
    result.best = *best;
    result.continuous_metrics = compute_metrics(pair, best->alloc);
    result.candidates_found = static_cast<int>(candidates.size());
    result.patterns_examined = 128;
    if (auto snapped = snap_to_grid(pair, best->alloc.theta)) {
        result.snapped = snapped->first;
        result.snapped_metrics = snapped->second;
    }
    return result;
}

}  // namespace wsp
