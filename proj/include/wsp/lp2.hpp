// Per-theta two-variable LP over (p_p, p_r): minimize w_pt*p_p + w_sr*p_r
// subject to the combined-QoS half-plane and the power boxes. Solved by
// corner/edge analysis of the feasible polygon ("graphic method"), with the
// analytic value u(theta) and its first two derivatives for the outer
// time-split search.

#pragma once

#include "wsp/model.hpp"

namespace wsp {

enum class CaseId {
    Case1_AB,                // optimizer on the top edge, (g(p_max), p_max)
    Case2_BC_FloorBinding,   // optimizer on the left edge, p_p_low = p_min
    Case2_BC_DecodeBinding,  // optimizer on the left edge, p_p_low from the decode link
    Case3_CD,                // optimizer on the bottom edge, (g(p_min), p_min)
    Case4_DA,                // optimizer on the right edge, (p_max, h(p_max))
    Case5_CornerC,           // whole box feasible, optimizer at (p_p_low, p_min)
    Infeasible,
};
const char* case_name(CaseId c);

// Scalars of the polygon picture for one (pair, theta): objective/constraint
// slopes, the QoS threshold, corner values of f(x,y) = theta*log2(1+l_pp x+l_sp y)
// and the affine constraint-line evaluators g (x given y) and h (y given x).
struct CaseGeometry {
    double theta = 0;
    double k_l = 0;           // w_pt / w_sr
    double k_m = 0;           // lambda_pp / lambda_sp
    double threshold = 0;     // 2^(Q_p/theta) - 1
    double p_p_low = 0;
    double p_s_low = 0;
    double f_a = 0;           // f(p_max, p_max)
    double f_b = 0;           // f(p_p_low, p_max)
    double f_c = 0;           // f(p_p_low, p_min)
    double f_d = 0;           // f(p_max, p_min)
    bool feasible = false;    // f_a >= Q_p, p_p_low <= p_max, p_s_low <= p_max
    double lambda_pp = 0, lambda_sp = 0;

    double f(double x, double y) const;
    double g(double y) const;  // x on line m at height y
    double h(double x) const;  // y on line m at abscissa x
};

CaseGeometry case_geometry(const LinkPair& pair, double theta);

// Classification only (no derivatives); cheap enough to probe neighbors.
CaseId classify_case(const LinkPair& pair, double theta);

// The realized optimizer in Case 5 sits at (p_p_low, p_min); its derivative in
// theta is that of the corner trajectory. The published formulas reuse the
// Case-3 expressions instead; both are available.
enum class Case5Derivatives { Trajectory, PublishedCase3Form };

struct LpOptions {
    Case5Derivatives case5 = Case5Derivatives::Trajectory;
    double transition_probe = 1e-6;  // theta neighborhood for derivative_valid
};

struct UDerivatives {
    double u = 0;
    double u_prime = 0;
    double u_double_prime = 0;
};

UDerivatives u_derivatives(const LinkPair& pair, double theta, CaseId case_id,
                           const LpOptions& opts = {});

struct LpSolution {
    CaseId case_id = CaseId::Infeasible;
    double p_p = 0;
    double p_r = 0;
    double u = 0;
    double u_prime = 0;
    double u_double_prime = 0;
    // False exactly when the case (including sub-branches) changes within
    // +/- transition_probe of theta; u' and u'' are one-sided there.
    bool derivative_valid = false;
};

LpSolution solve_lp(const LinkPair& pair, double theta, const LpOptions& opts = {});

}  // namespace wsp
