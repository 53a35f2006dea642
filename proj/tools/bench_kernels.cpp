// Compares the OpenMP enumeration kernels against their serial reference
// implementations: same results required, wall clock reported. Covers the
// exhaustive grid searches, the Monte Carlo run loop and the pairwise cost
// matrix.
//
// Usage: bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "wsp/matching.hpp"
#include "wsp/sim.hpp"

using namespace wsp;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
    std::vector<double> times;
    fn();  // warmup
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-24s serial %10.3f ms   openmp %10.3f ms   speedup %5.2fx   results %s\n",
                name, serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "identical" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
#ifdef _OPENMP
    std::printf("openmp max threads: %d\n", omp_get_max_threads());
#else
    std::printf("compiled without openmp\n");
#endif

    const Scenario sc = drift_scenario(Scenario{}, 10000.0);
    const LinkPair pair = make_link_pair(sc);

    {
        const auto ser = exhaustive_optimal(pair, ExhaustiveMode::Naive, Parallelism::Serial);
        const auto par = exhaustive_optimal(pair, ExhaustiveMode::Naive, Parallelism::OpenMp);
        const bool same = ser && par && ser->alloc.theta == par->alloc.theta &&
                          ser->alloc.p_p == par->alloc.p_p && ser->alloc.p_r == par->alloc.p_r &&
                          ser->alloc.p_s == par->alloc.p_s;
        report("exhaustive naive",
               time_ms([&] { (void)exhaustive_optimal(pair, ExhaustiveMode::Naive,
                                                      Parallelism::Serial); }, 1),
               time_ms([&] { (void)exhaustive_optimal(pair, ExhaustiveMode::Naive,
                                                      Parallelism::OpenMp); }, 1),
               same);
    }
    {
        const auto ser = exhaustive_optimal(pair, ExhaustiveMode::Reduced, Parallelism::Serial);
        const auto par = exhaustive_optimal(pair, ExhaustiveMode::Reduced, Parallelism::OpenMp);
        const bool same = ser && par && ser->metrics.wsp == par->metrics.wsp;
        report("exhaustive reduced",
               time_ms([&] { (void)exhaustive_optimal(pair, ExhaustiveMode::Reduced,
                                                      Parallelism::Serial); }, repeats),
               time_ms([&] { (void)exhaustive_optimal(pair, ExhaustiveMode::Reduced,
                                                      Parallelism::OpenMp); }, repeats),
               same);
    }
    {
        MonteCarloConfig mc;
        mc.runs = 200;
        mc.qp_list = {3.0};
        mc.schemes = {Scheme::Proposed, Scheme::Random};
        mc.keep_samples = false;
        MonteCarloConfig ser_cfg = mc;
        ser_cfg.parallelism = Parallelism::Serial;
        MonteCarloConfig par_cfg = mc;
        par_cfg.parallelism = Parallelism::OpenMp;
        const SweepReport ser = monte_carlo(ser_cfg);
        const SweepReport par = monte_carlo(par_cfg);
        bool same = ser.rows.size() == par.rows.size();
        for (size_t i = 0; same && i < ser.rows.size(); ++i)
            same = ser.rows[i].mean_wsp == par.rows[i].mean_wsp &&
                   ser.rows[i].feasible_runs == par.rows[i].feasible_runs;
        report("monte carlo (200 runs)",
               time_ms([&] { (void)monte_carlo(ser_cfg); }, repeats),
               time_ms([&] { (void)monte_carlo(par_cfg); }, repeats), same);
    }
    {
        std::vector<std::vector<LinkPair>> pairs;
        for (int i = 0; i < 4; ++i) {
            std::vector<LinkPair> row;
            for (int j = 0; j < 4; ++j) {
                Scenario s = sc;
                s.st.x += 100.0 * i;
                s.sr.y += 150.0 * j;
                row.push_back(make_link_pair(s));
            }
            pairs.push_back(row);
        }
        const CostMatrix ser = pairwise_cost_matrix(pairs, {}, Parallelism::Serial);
        const CostMatrix par = pairwise_cost_matrix(pairs, {}, Parallelism::OpenMp);
        report("cost matrix 4x4",
               time_ms([&] { (void)pairwise_cost_matrix(pairs, {}, Parallelism::Serial); },
                       repeats),
               time_ms([&] { (void)pairwise_cost_matrix(pairs, {}, Parallelism::OpenMp); },
                       repeats),
               ser.cost == par.cost);
    }
    return 0;
}
