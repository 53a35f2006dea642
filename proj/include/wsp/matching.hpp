// M-primary x N-secondary pairing: per-pair minimum WSP costs plus
// minimum-weight bipartite assignment (Kuhn-Munkres with potentials).

#pragma once

#include <vector>

#include "wsp/baselines.hpp"
#include "wsp/newton.hpp"

namespace wsp {

struct CostMatrix {
    int rows = 0;  // primaries
    int cols = 0;  // secondaries
    std::vector<double> cost;  // row-major; infeasible entries carry `sentinel`
    // Finite stand-in for infeasible pairs, strictly above the sum of all
    // feasible entries so it can never displace a feasible match.
    double sentinel = 1.0;

    double at(int i, int j) const { return cost[static_cast<size_t>(i) * cols + j]; }
    double& at(int i, int j) { return cost[static_cast<size_t>(i) * cols + j]; }
    bool is_sentinel(int i, int j) const { return at(i, j) >= sentinel; }
};

// Entry (i, j) = snapped WSP of allocate() for pair (i, j). Entries are
// independent; computed in parallel under OpenMp.
CostMatrix pairwise_cost_matrix(const std::vector<std::vector<LinkPair>>& pairs,
                                const NewtonConfig& config = {},
                                Parallelism par = Parallelism::OpenMp);

struct Assignment {
    struct Match {
        int primary = -1;
        int secondary = -1;
        double cost = 0;
    };
    std::vector<Match> pairs;      // sentinel matches already dropped
    double total_cost = 0;         // sum over kept pairs
    std::vector<int> unmatched_primaries;
    std::vector<int> unmatched_secondaries;
};

// Minimum-total-cost assignment; rectangular inputs are padded square with
// the sentinel, and sentinel-valued matches are reported as unmatched.
Assignment kuhn_munkres(const CostMatrix& costs);

}  // namespace wsp
