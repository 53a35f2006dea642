// Domain types and closed-form link formulas for three-phase cooperative
// spectrum sharing: weighted sum power, spectral efficiencies, power floors,
// energy efficiency and feasibility checks. All powers are watts internally;
// dBm appears only at I/O boundaries.

#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wsp {

struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvalidAllocation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvalidScenario : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InternalInconsistency : std::logic_error {
    using std::logic_error::logic_error;
};

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

// exp2 that saturates to +inf instead of trapping; lets theta -> 0+ probes
// produce infinite power floors that read as infeasible downstream.
double exp2_sat(double x);

// Normalized per-watt SNR coefficients, lambda_xy = g_xy / N with N the total
// noise power over the shared band.
struct ChannelGains {
    double lambda_pp = 0;  // PT -> PR
    double lambda_ps = 0;  // PT -> SR (relay decode link)
    double lambda_sp = 0;  // SR -> PR (relay delivery link)
    double lambda_ss = 0;  // ST -> SR (secondary link)
    void validate() const;
};

struct Weights {
    double w_pt = 1;
    double w_sr = 1;
    double w_st = 1;
    void validate() const;
};

// Minimum spectral efficiencies in bps/Hz.
struct QosReq {
    double q_p = 0;
    double q_s = 0;
    void validate() const;
};

// Discrete power/time-share grids. Power levels step in dB from p_min to
// p_max; theta levels are {dt, 2dt, ...} strictly below 0.5.
struct ResourceGrid {
    double p_min = 0;        // watts
    double p_max = 0;        // watts
    double delta_p_db = 1;   // power step, dB
    double delta_theta = 0.005;
    void validate() const;

    std::vector<double> power_levels() const;
    std::vector<double> theta_levels() const;
    // Smallest grid power >= watt (with a tiny relative slack so that grid
    // members round to themselves); nullopt if watt exceeds p_max.
    std::optional<double> round_power_up(double watt) const;
};

struct LinkPair {
    ChannelGains gains;
    Weights weights;
    QosReq qos;
    ResourceGrid grid;
    void validate() const;
};

// One candidate decision: the time split and the three transmit powers.
struct Allocation {
    double theta = 0;
    double p_p = 0;
    double p_r = 0;
    double p_s = 0;
};

struct Metrics {
    double wsp = 0;  // watts, weighted
    double u = 0;    // primary-link share of wsp
    double v = 0;    // secondary-link share of wsp
    double s_p = 0;  // bps/Hz
    double s_s = 0;  // bps/Hz
    double ee = 0;   // bps/Hz per watt, unweighted powers
};

struct PowerFloors {
    double p_p_low = 0;
    double p_s_low = 0;
};

double wsp_value(const LinkPair& pair, const Allocation& alloc);
double primary_se(const LinkPair& pair, const Allocation& alloc);
double secondary_se(const LinkPair& pair, const Allocation& alloc);
PowerFloors power_floors(const LinkPair& pair, double theta);
double energy_efficiency(const LinkPair& pair, const Allocation& alloc);
Metrics compute_metrics(const LinkPair& pair, const Allocation& alloc);

enum class Constraint {
    ThetaRange,    // theta outside (0, 0.5)
    PpBox,
    PrBox,
    PsBox,
    CombinedQos,   // lambda_pp*p_p + lambda_sp*p_r >= 2^(Q_p/theta) - 1
    QosPrimary,    // S_p >= Q_p
    QosSecondary,  // S_s >= Q_s
};
const char* constraint_name(Constraint c);

struct FeasibilityVerdict {
    std::vector<Constraint> violated;
    bool ok() const { return violated.empty(); }
};

// Relative tolerance used for QoS and box comparisons; grid rounding can
// overshoot targets by a hair, strict equality would be untestable.
inline constexpr double kFeasibilityRtol = 1e-9;

FeasibilityVerdict check_feasible(const LinkPair& pair, const Allocation& alloc);

// Eigenvalues of the 4x4 Hessian of the weighted sum power in
// (p_p, p_r, p_s, theta): {0, 0, +r, -r} with r = sqrt(w_pt^2+4w_st^2+w_sr^2).
// The negative eigenvalue certifies nonconvexity of the joint problem.
std::array<double, 4> wsp_hessian_eigenvalues(const Weights& w);

}  // namespace wsp
