#include "wsp/lp2.hpp"

#include <cmath>
#include <limits>

namespace wsp {

namespace {

constexpr double kLn2 = 0.6931471805599453;
// Slack on the emptiness trio only; keeps the interval endpoints classifiable
// when the binding corner value lands a few ulps under Q_p.
constexpr double kTrioRtol = 1e-12;

}  // namespace

const char* case_name(CaseId c) {
    switch (c) {
        case CaseId::Case1_AB: return "case1_ab";
        case CaseId::Case2_BC_FloorBinding: return "case2_bc_floor";
        case CaseId::Case2_BC_DecodeBinding: return "case2_bc_decode";
        case CaseId::Case3_CD: return "case3_cd";
        case CaseId::Case4_DA: return "case4_da";
        case CaseId::Case5_CornerC: return "case5_corner_c";
        case CaseId::Infeasible: return "infeasible";
    }
    return "unknown";
}

double CaseGeometry::f(double x, double y) const {
    return theta * std::log2(1.0 + lambda_pp * x + lambda_sp * y);
}

double CaseGeometry::g(double y) const { return (threshold - lambda_sp * y) / lambda_pp; }

double CaseGeometry::h(double x) const { return (threshold - lambda_pp * x) / lambda_sp; }

CaseGeometry case_geometry(const LinkPair& pair, double theta) {
    if (!(theta > 0.0 && theta < 0.5))
        throw InvalidInput("case_geometry: theta must lie in (0, 0.5)");
    const ChannelGains& gn = pair.gains;
    const ResourceGrid& grid = pair.grid;
    CaseGeometry geo;
    geo.theta = theta;
    geo.lambda_pp = gn.lambda_pp;
    geo.lambda_sp = gn.lambda_sp;
    geo.k_l = pair.weights.w_pt / pair.weights.w_sr;
    geo.k_m = gn.lambda_pp / gn.lambda_sp;
    geo.threshold = exp2_sat(pair.qos.q_p / theta) - 1.0;
    const PowerFloors floors = power_floors(pair, theta);
    geo.p_p_low = floors.p_p_low;
    geo.p_s_low = floors.p_s_low;
    geo.f_a = geo.f(grid.p_max, grid.p_max);
    if (std::isfinite(geo.p_p_low)) {
        geo.f_b = geo.f(geo.p_p_low, grid.p_max);
        geo.f_c = geo.f(geo.p_p_low, grid.p_min);
    } else {
        geo.f_b = geo.f_c = std::numeric_limits<double>::infinity();
    }
    geo.f_d = geo.f(grid.p_max, grid.p_min);
    geo.feasible = geo.f_a >= pair.qos.q_p * (1.0 - kTrioRtol) &&
                   geo.p_p_low <= grid.p_max * (1.0 + kTrioRtol) &&
                   geo.p_s_low <= grid.p_max * (1.0 + kTrioRtol);
    return geo;
}

namespace {

CaseId classify(const LinkPair& pair, const CaseGeometry& geo) {
    if (!geo.feasible) return CaseId::Infeasible;
    const double qp = pair.qos.q_p;
    if (geo.f_c >= qp) {
        // Whole box satisfies the combined-QoS line; minimum at corner C.
        return CaseId::Case5_CornerC;
    }
    if (geo.k_l >= geo.k_m) {
        if (qp <= geo.f_b) {
            const bool floor_binding =
                pair.grid.p_min >= (geo.threshold) / pair.gains.lambda_ps;
            return floor_binding ? CaseId::Case2_BC_FloorBinding
                                 : CaseId::Case2_BC_DecodeBinding;
        }
        return CaseId::Case1_AB;
    }
    if (qp < geo.f_d) return CaseId::Case3_CD;
    // Upper boundary Q_p == f_a folded in here so the partition stays
    // exhaustive; the optimizer formula degenerates to corner A there.
    return CaseId::Case4_DA;
}

}  // namespace

CaseId classify_case(const LinkPair& pair, double theta) {
    return classify(pair, case_geometry(pair, theta));
}

UDerivatives u_derivatives(const LinkPair& pair, double theta, CaseId case_id,
                           const LpOptions& opts) {
    const CaseGeometry geo = case_geometry(pair, theta);
    const CaseId actual = classify(pair, geo);
    if (case_id == CaseId::Infeasible || actual != case_id)
        throw InternalInconsistency("u_derivatives: case does not match theta");

    const ChannelGains& gn = pair.gains;
    const Weights& w = pair.weights;
    const double p_min = pair.grid.p_min;
    const double p_max = pair.grid.p_max;
    const double qp = pair.qos.q_p;

    const double pow2 = exp2_sat(qp / theta);
    const double qln = qp * kLn2;
    // Shared derivative kernels of theta * (2^(Q_p/theta) - 1).
    const double e1 = (1.0 - qln / theta) * pow2 - 1.0;
    const double e2 = (qln * qln) / (theta * theta * theta) * pow2;

    UDerivatives d;
    switch (case_id) {
        case CaseId::Case1_AB: {
            const double x = geo.g(p_max);
            d.u = theta * (w.w_pt * x + w.w_sr * p_max);
            d.u_prime = w.w_pt / gn.lambda_pp * (e1 - gn.lambda_sp * p_max) + w.w_sr * p_max;
            d.u_double_prime = w.w_pt / gn.lambda_pp * e2;
            break;
        }
        case CaseId::Case2_BC_FloorBinding: {
            const double y = geo.h(p_min);
            d.u = theta * (w.w_pt * p_min + w.w_sr * y);
            d.u_prime = w.w_pt * p_min + w.w_sr / gn.lambda_sp * (e1 - gn.lambda_pp * p_min);
            d.u_double_prime = w.w_sr / gn.lambda_sp * e2;
            break;
        }
        case CaseId::Case2_BC_DecodeBinding: {
            const double coeff =
                w.w_sr / gn.lambda_ps * (geo.k_l - geo.k_m + gn.lambda_ps / gn.lambda_sp);
            const double x = geo.p_p_low;
            d.u = theta * (w.w_pt * x + w.w_sr * geo.h(x));
            d.u_prime = coeff * e1;
            d.u_double_prime = coeff * e2;
            break;
        }
        case CaseId::Case3_CD: {
            const double x = geo.g(p_min);
            d.u = theta * (w.w_pt * x + w.w_sr * p_min);
            d.u_prime = w.w_pt / gn.lambda_pp * (e1 - gn.lambda_sp * p_min) + w.w_sr * p_min;
            d.u_double_prime = w.w_pt / gn.lambda_pp * e2;
            break;
        }
        case CaseId::Case4_DA: {
            const double y = geo.h(p_max);
            d.u = theta * (w.w_pt * p_max + w.w_sr * y);
            d.u_prime = w.w_pt * p_max + w.w_sr / gn.lambda_sp * (e1 - gn.lambda_pp * p_max);
            d.u_double_prime = w.w_sr / gn.lambda_sp * e2;
            break;
        }
        case CaseId::Case5_CornerC: {
            d.u = theta * (w.w_pt * geo.p_p_low + w.w_sr * p_min);
            if (opts.case5 == Case5Derivatives::PublishedCase3Form) {
                d.u_prime =
                    w.w_pt / gn.lambda_pp * (e1 - gn.lambda_sp * p_min) + w.w_sr * p_min;
                d.u_double_prime = w.w_pt / gn.lambda_pp * e2;
            } else if (geo.p_p_low > p_min) {
                // Decode floor moves with theta; corner C slides along it.
                d.u_prime = w.w_pt / gn.lambda_ps * e1 + w.w_sr * p_min;
                d.u_double_prime = w.w_pt / gn.lambda_ps * e2;
            } else {
                d.u_prime = (w.w_pt + w.w_sr) * p_min;
                d.u_double_prime = 0.0;
            }
            break;
        }
        case CaseId::Infeasible:
            break;
    }
    return d;
}

namespace {

// Sub-branch aware piece id; Case 5 has a kink where the decode floor meets
// p_min that CaseId alone does not expose.
int piece_key(const LinkPair& pair, double theta) {
    const CaseGeometry geo = case_geometry(pair, theta);
    const CaseId id = classify(pair, geo);
    int key = static_cast<int>(id);
    if (id == CaseId::Case5_CornerC && geo.p_p_low > pair.grid.p_min) key += 100;
    return key;
}

}  // namespace

LpSolution solve_lp(const LinkPair& pair, double theta, const LpOptions& opts) {
    const CaseGeometry geo = case_geometry(pair, theta);
    LpSolution sol;
    sol.case_id = classify(pair, geo);
    if (sol.case_id == CaseId::Infeasible) return sol;

    const double p_min = pair.grid.p_min;
    const double p_max = pair.grid.p_max;
    switch (sol.case_id) {
        case CaseId::Case1_AB:
            sol.p_p = geo.g(p_max);
            sol.p_r = p_max;
            break;
        case CaseId::Case2_BC_FloorBinding:
        case CaseId::Case2_BC_DecodeBinding:
            sol.p_p = geo.p_p_low;
            sol.p_r = geo.h(geo.p_p_low);
            break;
        case CaseId::Case3_CD:
            sol.p_p = geo.g(p_min);
            sol.p_r = p_min;
            break;
        case CaseId::Case4_DA:
            sol.p_p = p_max;
            sol.p_r = geo.h(p_max);
            break;
        case CaseId::Case5_CornerC:
            sol.p_p = geo.p_p_low;
            sol.p_r = p_min;
            break;
        case CaseId::Infeasible:
            break;
    }

    const UDerivatives d = u_derivatives(pair, theta, sol.case_id, opts);
    sol.u = d.u;
    sol.u_prime = d.u_prime;
    sol.u_double_prime = d.u_double_prime;

    const double probe = opts.transition_probe;
    const int here = piece_key(pair, theta);
    bool valid = true;
    const double lo = theta - probe;
    const double hi = theta + probe;
    if (lo > 0.0) valid = valid && piece_key(pair, lo) == here;
    if (hi < 0.5) valid = valid && piece_key(pair, hi) == here;
    sol.derivative_valid = valid;
    return sol;
}

}  // namespace wsp
