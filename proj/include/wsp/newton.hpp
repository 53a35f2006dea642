// Time-split search: assembles W(theta) = u(theta) + v(theta) along the
// optimal-power trajectory, brackets the root of W', and refines it with a
// safeguarded Newton iteration (bisection fallback at case kinks). The
// continuous solution is then snapped to the discrete resource grid.

#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "wsp/lp2.hpp"
#include "wsp/model.hpp"

namespace wsp {

enum class Theta0Strategy {
    Midpoint,
    // First grid theta satisfying the published start-point test
    // |W''|^2 > |W * W'| / 2 with nonzero finite-difference W'''.
    ConvergenceScan,
    // Same scan with the textbook sufficient condition |W' * W'''| < |W''|^2.
    ConvergenceScanAlt,
    WarmStart,
};
const char* theta0_strategy_name(Theta0Strategy s);

struct NewtonConfig {
    double epsilon = 1e-6;  // stop tolerance on |theta_k - theta_{k-1}|
    int max_iter = 50;
    Theta0Strategy theta0 = Theta0Strategy::Midpoint;
    std::optional<double> previous_theta;  // warm-start state, caller owned
    LpOptions lp;
    void validate() const;
};

enum class StepKind { Newton, Bisection, Polish };

struct NewtonStep {
    double theta = 0;
    double delta = 0;  // |theta - previous|
    StepKind kind = StepKind::Newton;
};

struct NewtonTrace {
    double theta0 = 0;
    bool theta0_fell_back_to_midpoint = false;
    std::vector<NewtonStep> steps;
    int iterations = 0;  // main-loop update count, excludes polish steps
    bool converged = false;
};

struct ThetaInterval {
    double lo = 0;
    double hi = 0;
};

// Theta range on which the per-theta LP and the secondary floor are all
// satisfiable with powers <= p_max; nullopt when empty.
std::optional<ThetaInterval> feasible_theta_interval(const LinkPair& pair);

struct VDerivatives {
    double v = 0;
    double v_prime = 0;
    double v_double_prime = 0;
};

// Secondary-link share v(theta) = w_st (1-2 theta) p_s_low(theta) and its
// derivatives (linear branch when the p_min floor binds).
VDerivatives v_derivatives(const LinkPair& pair, double theta);

// W(theta) with assembled derivatives along the optimal-power trajectory.
struct WspThetaEval {
    bool feasible = false;
    double w = 0;
    double w_prime = 0;
    double w_double_prime = 0;
    bool smooth = false;  // LP case and both floor branches stable nearby
    CaseId case_id = CaseId::Infeasible;
};
WspThetaEval wsp_theta_eval(const LinkPair& pair, double theta, const LpOptions& opts = {});

double select_theta0(const LinkPair& pair, const ThetaInterval& interval,
                     Theta0Strategy strategy, std::optional<double> previous_theta,
                     NewtonTrace* trace = nullptr);

enum class SolveStatus { Converged, Unconverged, Infeasible };
const char* solve_status_name(SolveStatus s);

struct NewtonOutcome {
    SolveStatus status = SolveStatus::Infeasible;
    double theta_star = 0;
    ThetaInterval interval{};
    bool at_interval_endpoint = false;
    double bracket_lo = 0;
    double bracket_hi = 0;
    NewtonTrace trace;
};

NewtonOutcome newton_solve(const LinkPair& pair, const NewtonConfig& config = {});

struct SolveResult {
    SolveStatus status = SolveStatus::Infeasible;
    std::optional<Allocation> continuous;
    std::optional<Metrics> continuous_metrics;
    std::optional<Allocation> snapped;
    std::optional<Metrics> snapped_metrics;
    CaseId final_case = CaseId::Infeasible;
    NewtonTrace trace;
    ThetaInterval interval{};
    bool at_interval_endpoint = false;
};

// Feasible minimum over the grid thetas around theta_star (bracketing pair
// plus two further steps each way), powers rounded up to the next grid level.
std::optional<std::pair<Allocation, Metrics>> snap_to_grid(const LinkPair& pair,
                                                           double theta_star,
                                                           const LpOptions& opts = {});

SolveResult allocate(const LinkPair& pair, const NewtonConfig& config = {});

}  // namespace wsp
