// Comparison schemes: exhaustive grid search (the grid optimum), uniform
// random selection, and KKT active-set enumeration over the nine inequality
// constraints. Enumeration kernels come in an OpenMP flavor and a plain
// serial reference; both must produce bit-identical results.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "wsp/newton.hpp"

namespace wsp {

enum class ExhaustiveMode { Naive, Reduced };
enum class Parallelism { Serial, OpenMp };

struct GridSolution {
    Allocation alloc;
    Metrics metrics;
};

// Minimum-WSP feasible grid tuple; ties break toward smaller theta, then
// lexicographically smaller (p_p, p_r, p_s). Naive mode enumerates all
// tuples; Reduced fixes p_s at the smallest feasible grid level per theta.
std::optional<GridSolution> exhaustive_optimal(const LinkPair& pair,
                                               ExhaustiveMode mode = ExhaustiveMode::Reduced,
                                               Parallelism par = Parallelism::OpenMp);

// Maximum-EE feasible grid tuple over the same constraint set.
std::optional<GridSolution> exhaustive_ee_max(const LinkPair& pair,
                                              Parallelism par = Parallelism::OpenMp);

struct RandomDraw {
    Allocation alloc;
    FeasibilityVerdict verdict;
};

// Independent uniform draws from the discrete theta and power sets;
// feasibility is reported, never enforced.
RandomDraw random_alloc(const LinkPair& pair, uint64_t seed);

// Indices into the active-set bitmask (L = 9 inequality constraints).
enum KktConstraint : int {
    kThetaPositive = 0,   // theta > 0, never active at a candidate
    kThetaBelowHalf = 1,  // theta < 0.5, never active at a candidate
    kCombinedQos = 2,     // lambda_pp p_p + lambda_sp p_r >= 2^(Q_p/theta)-1
    kPpLow = 3,
    kPpMax = 4,
    kPrMin = 5,
    kPrMax = 6,
    kPsLow = 7,
    kPsMax = 8,
};

struct KktCandidate {
    Allocation alloc;
    double wsp = 0;
    uint16_t active_mask = 0;
    double stationarity_residual = 0;  // sup-norm of the Lagrangian gradient
    std::array<double, 9> multipliers{};
    bool multipliers_ok = false;
};

// All primal/dual-feasible stationary points found across the active-set
// patterns (open theta bounds pruned: 512 -> 128 examined patterns).
std::vector<KktCandidate> kkt_candidates(const LinkPair& pair);

struct KktResult {
    KktCandidate best;
    Metrics continuous_metrics;
    std::optional<Allocation> snapped;
    std::optional<Metrics> snapped_metrics;
    int candidates_found = 0;
    int patterns_examined = 0;
};

std::optional<KktResult> kkt_alloc(const LinkPair& pair);

}  // namespace wsp
