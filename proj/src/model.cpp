#include "wsp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wsp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool cond, const char* msg) {
    if (!cond) throw InvalidInput(msg);
}

bool pos_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

double dbm_to_watt(double dbm) {
    require(std::isfinite(dbm), "dbm_to_watt: input must be finite");
    return std::pow(10.0, (dbm - 30.0) / 10.0);
}

double watt_to_dbm(double watt) {
    require(std::isfinite(watt) && watt > 0.0, "watt_to_dbm: input must be finite and > 0");
    return 10.0 * std::log10(watt) + 30.0;
}

double exp2_sat(double x) {
    if (x > 1024.0) return kInf;
    return std::exp2(x);
}

void ChannelGains::validate() const {
    require(pos_finite(lambda_pp) && pos_finite(lambda_ps) && pos_finite(lambda_sp) &&
                pos_finite(lambda_ss),
            "ChannelGains: all four normalized gains must be finite and > 0");
}

void Weights::validate() const {
    require(pos_finite(w_pt) && pos_finite(w_sr) && pos_finite(w_st),
            "Weights: all weights must be finite and > 0");
}

void QosReq::validate() const {
    require(pos_finite(q_p) && pos_finite(q_s), "QosReq: both QoS targets must be > 0");
}

void ResourceGrid::validate() const {
    require(pos_finite(p_min) && pos_finite(p_max) && p_min < p_max,
            "ResourceGrid: need 0 < p_min < p_max");
    require(pos_finite(delta_p_db), "ResourceGrid: delta_p_db must be > 0");
    require(delta_theta > 0.0 && delta_theta < 0.25,
            "ResourceGrid: need 0 < delta_theta < 0.25");
}

std::vector<double> ResourceGrid::power_levels() const {
    validate();
    const double lo_db = watt_to_dbm(p_min);
    const double hi_db = watt_to_dbm(p_max);
    const int steps = static_cast<int>(std::floor((hi_db - lo_db) / delta_p_db + 1e-9));
    std::vector<double> levels;
    levels.reserve(static_cast<size_t>(steps) + 2);
    levels.push_back(p_min);
    for (int k = 1; k <= steps; ++k) levels.push_back(dbm_to_watt(lo_db + k * delta_p_db));
    if (levels.back() >= p_max * (1.0 - 1e-12)) {
        levels.back() = p_max;  // top level is p_max exactly, not its dB round-trip
    } else {
        levels.push_back(p_max);
    }
    return levels;
}

std::vector<double> ResourceGrid::theta_levels() const {
    validate();
    std::vector<double> levels;
    for (int k = 1;; ++k) {
        const double t = k * delta_theta;
        if (t >= 0.5 - 1e-12) break;
        levels.push_back(t);
    }
    return levels;
}

std::optional<double> ResourceGrid::round_power_up(double watt) const {
    if (!(watt <= p_max * (1.0 + 1e-12))) return std::nullopt;
    const auto levels = power_levels();
    const double needle = watt * (1.0 - 1e-12);
    auto it = std::lower_bound(levels.begin(), levels.end(), needle);
    if (it == levels.end()) return levels.back();
    return *it;
}

void LinkPair::validate() const {
    gains.validate();
    weights.validate();
    qos.validate();
    grid.validate();
}

namespace {

void require_theta(double theta) {
    if (!(theta > 0.0 && theta < 0.5))
        throw InvalidAllocation("allocation: theta must lie in (0, 0.5)");
}

}  // namespace

double wsp_value(const LinkPair& pair, const Allocation& a) {
    require_theta(a.theta);
    const Weights& w = pair.weights;
    return w.w_pt * a.theta * a.p_p + w.w_sr * a.theta * a.p_r +
           w.w_st * (1.0 - 2.0 * a.theta) * a.p_s;
}

double primary_se(const LinkPair& pair, const Allocation& a) {
    require_theta(a.theta);
    const ChannelGains& g = pair.gains;
    const double snr = std::min(g.lambda_ps * a.p_p, g.lambda_pp * a.p_p + g.lambda_sp * a.p_r);
    return a.theta * std::log2(1.0 + snr);
}

double secondary_se(const LinkPair& pair, const Allocation& a) {
    require_theta(a.theta);
    return (1.0 - 2.0 * a.theta) * std::log2(1.0 + pair.gains.lambda_ss * a.p_s);
}

PowerFloors power_floors(const LinkPair& pair, double theta) {
    if (!(theta > 0.0 && theta < 0.5))
        throw InvalidInput("power_floors: theta must lie in (0, 0.5)");
    PowerFloors f;
    f.p_p_low = std::max(pair.grid.p_min,
                         (exp2_sat(pair.qos.q_p / theta) - 1.0) / pair.gains.lambda_ps);
    f.p_s_low = std::max(pair.grid.p_min,
                         (exp2_sat(pair.qos.q_s / (1.0 - 2.0 * theta)) - 1.0) / pair.gains.lambda_ss);
    return f;
}

double energy_efficiency(const LinkPair& pair, const Allocation& a) {
    require_theta(a.theta);
    const double denom = a.theta * a.p_p + a.theta * a.p_r + (1.0 - 2.0 * a.theta) * a.p_s;
    if (!(denom > 0.0)) throw InvalidAllocation("energy_efficiency: zero power consumption");
    return (primary_se(pair, a) + secondary_se(pair, a)) / denom;
}

Metrics compute_metrics(const LinkPair& pair, const Allocation& a) {
    require_theta(a.theta);
    const Weights& w = pair.weights;
    Metrics m;
    m.u = w.w_pt * a.theta * a.p_p + w.w_sr * a.theta * a.p_r;
    m.v = w.w_st * (1.0 - 2.0 * a.theta) * a.p_s;
    m.wsp = m.u + m.v;
    m.s_p = primary_se(pair, a);
    m.s_s = secondary_se(pair, a);
    m.ee = energy_efficiency(pair, a);
    return m;
}

const char* constraint_name(Constraint c) {
    switch (c) {
        case Constraint::ThetaRange: return "theta_range";
        case Constraint::PpBox: return "p_p_box";
        case Constraint::PrBox: return "p_r_box";
        case Constraint::PsBox: return "p_s_box";
        case Constraint::CombinedQos: return "combined_qos";
        case Constraint::QosPrimary: return "qos_primary";
        case Constraint::QosSecondary: return "qos_secondary";
    }
    return "unknown";
}

FeasibilityVerdict check_feasible(const LinkPair& pair, const Allocation& a) {
    FeasibilityVerdict verdict;
    const double rtol = kFeasibilityRtol;
    if (!(a.theta > 0.0 && a.theta < 0.5)) {
        verdict.violated.push_back(Constraint::ThetaRange);
        return verdict;  // SEs are undefined outside the theta domain
    }
    const ResourceGrid& grid = pair.grid;
    const double box_lo = grid.p_min * (1.0 - rtol);
    const double box_hi = grid.p_max * (1.0 + rtol);
    if (!(a.p_p >= box_lo && a.p_p <= box_hi)) verdict.violated.push_back(Constraint::PpBox);
    if (!(a.p_r >= box_lo && a.p_r <= box_hi)) verdict.violated.push_back(Constraint::PrBox);
    if (!(a.p_s >= box_lo && a.p_s <= box_hi)) verdict.violated.push_back(Constraint::PsBox);

    const ChannelGains& g = pair.gains;
    const double threshold = exp2_sat(pair.qos.q_p / a.theta) - 1.0;
    if (!(g.lambda_pp * a.p_p + g.lambda_sp * a.p_r >= threshold * (1.0 - rtol)))
        verdict.violated.push_back(Constraint::CombinedQos);
    if (!(primary_se(pair, a) >= pair.qos.q_p * (1.0 - rtol)))
        verdict.violated.push_back(Constraint::QosPrimary);
    if (!(secondary_se(pair, a) >= pair.qos.q_s * (1.0 - rtol)))
        verdict.violated.push_back(Constraint::QosSecondary);
    return verdict;
}

std::array<double, 4> wsp_hessian_eigenvalues(const Weights& w) {
    w.validate();
    const double r = std::sqrt(w.w_pt * w.w_pt + 4.0 * w.w_st * w.w_st + w.w_sr * w.w_sr);
    return {0.0, 0.0, r, -r};
}

}  // namespace wsp
