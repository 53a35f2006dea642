// Independent oracles used by the test suites: brute-force grid minimization,
// finite differences, permutation-enumeration assignment, a numeric
// eigensolver for the nonconvexity certificate, and the shared random
// instance generators. Nothing here calls into the code paths it checks.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "wsp/model.hpp"
#include "wsp/newton.hpp"
#include "wsp/rng.hpp"

namespace wsp::testing {

// --- brute-force LP oracle ------------------------------------------------

struct LpGridMin {
    bool found = false;
    double p_p = 0;
    double p_r = 0;
    double value = 0;
    double step_x = 0;
    double step_y = 0;
};

// Uniform n x n grid over [p_min, p_max]^2, exact constraint filter for the
// per-theta LP: combined-QoS half plane, decode floor on p_p, boxes.
inline LpGridMin lp_brute_force(const LinkPair& pair, double theta, int n) {
    LpGridMin out;
    const double p_min = pair.grid.p_min;
    const double p_max = pair.grid.p_max;
    const double threshold = std::exp2(pair.qos.q_p / theta) - 1.0;
    const double pp_low = std::max(p_min, threshold / pair.gains.lambda_ps);
    const double h = (p_max - p_min) / (n - 1);
    out.step_x = out.step_y = h;
    for (int i = 0; i < n; ++i) {
        const double x = p_min + i * h;
        if (x < pp_low) continue;
        for (int j = 0; j < n; ++j) {
            const double y = p_min + j * h;
            if (pair.gains.lambda_pp * x + pair.gains.lambda_sp * y < threshold) continue;
            const double val = pair.weights.w_pt * x + pair.weights.w_sr * y;
            if (!out.found || val < out.value) {
                out.found = true;
                out.value = val;
                out.p_p = x;
                out.p_r = y;
            }
        }
    }
    return out;
}

// --- finite differences ----------------------------------------------------

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double second_central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

// --- numeric Hessian eigenvalues -------------------------------------------

// Hessian of w_pt*theta*p_p + w_sr*theta*p_r + w_st*(1-2theta)*p_s in the
// variable order (p_p, p_r, p_s, theta); constant in the variables.
inline std::array<double, 4> numeric_wsp_hessian_eigenvalues(const Weights& w) {
    Eigen::Matrix4d h = Eigen::Matrix4d::Zero();
    h(0, 3) = h(3, 0) = w.w_pt;
    h(1, 3) = h(3, 1) = w.w_sr;
    h(2, 3) = h(3, 2) = -2.0 * w.w_st;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(h);
    const auto ev = solver.eigenvalues();
    return {ev(0), ev(1), ev(2), ev(3)};
}

// --- assignment enumeration ------------------------------------------------

// Minimum total cost over all injections of the smaller side into the larger.
inline double assignment_brute_force(const std::vector<std::vector<double>>& cost,
                                     std::vector<std::pair<int, int>>* best_pairs = nullptr) {
    const int rows = static_cast<int>(cost.size());
    const int cols = static_cast<int>(cost.front().size());
    const bool transpose = rows > cols;
    const int small = transpose ? cols : rows;
    const int large = transpose ? rows : cols;
    std::vector<int> perm(static_cast<size_t>(large));
    for (int i = 0; i < large; ++i) perm[static_cast<size_t>(i)] = i;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_perm;
    do {
        double total = 0;
        for (int i = 0; i < small; ++i) {
            const int j = perm[static_cast<size_t>(i)];
            total += transpose ? cost[static_cast<size_t>(j)][static_cast<size_t>(i)]
                               : cost[static_cast<size_t>(i)][static_cast<size_t>(j)];
        }
        if (total < best) {
            best = total;
            best_perm.assign(perm.begin(), perm.begin() + small);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (best_pairs) {
        best_pairs->clear();
        for (int i = 0; i < small; ++i) {
            const int j = best_perm[static_cast<size_t>(i)];
            best_pairs->push_back(transpose ? std::pair(j, i) : std::pair(i, j));
        }
        std::sort(best_pairs->begin(), best_pairs->end());
    }
    return best;
}

// --- chi-square critical value ----------------------------------------------

// Wilson-Hilferty approximation, accurate to ~0.1% for df >= 30.
inline double chi_square_critical(int df, double z_upper) {
    const double a = 2.0 / (9.0 * df);
    const double t = 1.0 - a + z_upper * std::sqrt(a);
    return df * t * t * t;
}

// --- random instances -------------------------------------------------------

inline double log_uniform(Rng& rng, double lo, double hi) {
    return lo * std::pow(hi / lo, rng.uniform());
}

inline LinkPair random_pair(Rng& rng) {
    LinkPair p;
    p.gains.lambda_pp = log_uniform(rng, 0.05, 80.0);
    p.gains.lambda_ps = log_uniform(rng, 0.05, 80.0);
    p.gains.lambda_sp = log_uniform(rng, 0.05, 80.0);
    p.gains.lambda_ss = log_uniform(rng, 0.5, 200.0);
    p.weights.w_pt = log_uniform(rng, 0.25, 4.0);
    p.weights.w_sr = log_uniform(rng, 0.25, 4.0);
    p.weights.w_st = log_uniform(rng, 0.25, 4.0);
    p.qos.q_p = rng.uniform(0.3, 3.5);
    p.qos.q_s = rng.uniform(0.3, 3.5);
    p.grid.p_min = 0.01;
    p.grid.p_max = log_uniform(rng, 5.0, 20.0);
    p.grid.delta_p_db = 1.0;
    p.grid.delta_theta = 0.005;
    return p;
}

// Feasible pair plus an interior theta; resamples until the interval is
// comfortably wide so that brute-force grids see a fat polygon.
inline std::optional<std::pair<LinkPair, double>> random_feasible_instance(Rng& rng,
                                                                           double margin = 0.05) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        const LinkPair pair = random_pair(rng);
        const auto interval = feasible_theta_interval(pair);
        if (!interval) continue;
        const double span = interval->hi - interval->lo;
        if (span < 4.0 * margin * (interval->hi + interval->lo)) continue;
        const double theta =
            rng.uniform(interval->lo + margin * span, interval->hi - margin * span);
        return std::pair(pair, theta);
    }
    return std::nullopt;
}

}  // namespace wsp::testing
