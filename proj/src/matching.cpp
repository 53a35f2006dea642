#include "wsp/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wsp {

CostMatrix pairwise_cost_matrix(const std::vector<std::vector<LinkPair>>& pairs,
                                const NewtonConfig& config, Parallelism par) {
    if (pairs.empty() || pairs.front().empty())
        throw InvalidInput("pairwise_cost_matrix: need at least one primary and one secondary");
    CostMatrix m;
    m.rows = static_cast<int>(pairs.size());
    m.cols = static_cast<int>(pairs.front().size());
    for (const auto& row : pairs)
        if (static_cast<int>(row.size()) != m.cols)
            throw InvalidInput("pairwise_cost_matrix: ragged pair matrix");
    const int total = m.rows * m.cols;
    std::vector<double> raw(static_cast<size_t>(total),
                            std::numeric_limits<double>::quiet_NaN());

    auto solve_entry = [&](int k) {
        const int i = k / m.cols;
        const int j = k % m.cols;
        const SolveResult r = allocate(pairs[static_cast<size_t>(i)][static_cast<size_t>(j)],
                                       config);
        if (r.snapped_metrics) raw[static_cast<size_t>(k)] = r.snapped_metrics->wsp;
    };
    if (par == Parallelism::OpenMp) {
#pragma omp parallel for schedule(dynamic, 1)
        for (int k = 0; k < total; ++k) solve_entry(k);
    } else {
        for (int k = 0; k < total; ++k) solve_entry(k);
    }

    double finite_sum = 0.0;
    for (double c : raw)
        if (!std::isnan(c)) finite_sum += c;
    m.sentinel = 1.0 + finite_sum;
    m.cost.resize(raw.size());
    for (size_t k = 0; k < raw.size(); ++k)
        m.cost[k] = std::isnan(raw[k]) ? m.sentinel : raw[k];
    return m;
}

namespace {

// O(n^3) potential-based assignment on a square cost matrix; returns for each
// column the matched row (size n+1, 1-based, col 0 unused).
std::vector<int> hungarian_square(const std::vector<std::vector<double>>& a, int n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<size_t>(n) + 1, false);
        do {
            used[static_cast<size_t>(j0)] = true;
            const int i0 = p[static_cast<size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = a[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] -
                                   u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    return p;
}

}  // namespace

Assignment kuhn_munkres(const CostMatrix& costs) {
    if (costs.rows <= 0 || costs.cols <= 0 ||
        static_cast<int>(costs.cost.size()) != costs.rows * costs.cols)
        throw InvalidInput("kuhn_munkres: malformed cost matrix");
    const int n = std::max(costs.rows, costs.cols);
    std::vector<std::vector<double>> a(static_cast<size_t>(n),
                                       std::vector<double>(static_cast<size_t>(n),
                                                           costs.sentinel));
    for (int i = 0; i < costs.rows; ++i)
        for (int j = 0; j < costs.cols; ++j) a[static_cast<size_t>(i)][static_cast<size_t>(j)] = costs.at(i, j);

    const std::vector<int> p = hungarian_square(a, n);

    Assignment result;
    std::vector<char> primary_matched(static_cast<size_t>(costs.rows), false);
    std::vector<char> secondary_matched(static_cast<size_t>(costs.cols), false);
    for (int j = 1; j <= n; ++j) {
        const int i = p[static_cast<size_t>(j)];
        if (i == 0) continue;
        const int row = i - 1, col = j - 1;
        if (row >= costs.rows || col >= costs.cols) continue;  // padding
        if (costs.is_sentinel(row, col)) continue;
        result.pairs.push_back({row, col, costs.at(row, col)});
        result.total_cost += costs.at(row, col);
        primary_matched[static_cast<size_t>(row)] = true;
        secondary_matched[static_cast<size_t>(col)] = true;
    }
    std::sort(result.pairs.begin(), result.pairs.end(),
              [](const Assignment::Match& x, const Assignment::Match& y) {
                  return x.primary < y.primary;
              });
    for (int i = 0; i < costs.rows; ++i)
        if (!primary_matched[static_cast<size_t>(i)]) result.unmatched_primaries.push_back(i);
    for (int j = 0; j < costs.cols; ++j)
        if (!secondary_matched[static_cast<size_t>(j)]) result.unmatched_secondaries.push_back(j);
    return result;
}

}  // namespace wsp
