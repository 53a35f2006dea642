#include "wsp/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "wsp/rng.hpp"

namespace wsp {

double distance(const Vec2& a, const Vec2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

ResourceGrid GridSpec::to_grid() const {
    ResourceGrid g;
    g.p_min = dbm_to_watt(pmin_dbm);
    g.p_max = dbm_to_watt(pmax_dbm);
    g.delta_p_db = dp_db;
    g.delta_theta = dtheta;
    g.validate();
    return g;
}

void Scenario::validate() const {
    if (!(path_loss_exp > 2.0)) throw InvalidScenario("Scenario: path_loss_exp must be > 2");
    if (!(bandwidth_hz > 0.0)) throw InvalidScenario("Scenario: bandwidth_hz must be > 0");
    if (!(ref_distance_m > 0.0) || !(intercept_gain > 0.0))
        throw InvalidScenario("Scenario: reference distance and intercept must be > 0");
    const double dists[] = {distance(pt, pr), distance(pt, sr), distance(sr, pr),
                            distance(st, sr)};
    for (double d : dists)
        if (!(d > 0.0)) throw InvalidScenario("Scenario: coincident nodes");
    weights.validate();
    qos.validate();
    grid.to_grid();
}

double noise_power_watt(const Scenario& s) {
    return dbm_to_watt(s.noise_dbm_hz + 10.0 * std::log10(s.bandwidth_hz));
}

namespace {

double path_gain(const Scenario& s, double d) {
    return s.intercept_gain * std::pow(d / s.ref_distance_m, -s.path_loss_exp);
}

}  // namespace

ChannelGains gains_from_geometry(const Scenario& s) {
    s.validate();
    const double noise = noise_power_watt(s);
    ChannelGains g;
    g.lambda_pp = path_gain(s, distance(s.pt, s.pr)) / noise;
    g.lambda_ps = path_gain(s, distance(s.pt, s.sr)) / noise;
    g.lambda_sp = path_gain(s, distance(s.sr, s.pr)) / noise;
    g.lambda_ss = path_gain(s, distance(s.st, s.sr)) / noise;
    return g;
}

LinkPair make_link_pair(const Scenario& s) { return make_link_pair(s, gains_from_geometry(s)); }

LinkPair make_link_pair(const Scenario& s, const ChannelGains& gains) {
    LinkPair pair;
    pair.gains = gains;
    pair.weights = s.weights;
    pair.qos = s.qos;
    pair.grid = s.grid.to_grid();
    pair.validate();
    return pair;
}

const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Exhaustive: return "exhaustive";
        case Scheme::Kkt: return "kkt";
        case Scheme::Proposed: return "proposed";
        case Scheme::Random: return "random";
        case Scheme::EeMax: return "eemax";
    }
    return "unknown";
}

void MonteCarloConfig::validate() const {
    if (runs < 1) throw InvalidInput("MonteCarloConfig: runs must be >= 1");
    if (!(radius_m > 0.0)) throw InvalidInput("MonteCarloConfig: radius must be > 0");
    if (qp_list.empty()) throw InvalidInput("MonteCarloConfig: empty qp list");
    if (schemes.empty()) throw InvalidInput("MonteCarloConfig: no schemes selected");
    base.validate();
    newton.validate();
}

namespace {

Vec2 sample_disk(Rng& rng, double radius) {
    const double r = radius * std::sqrt(rng.uniform());
    const double phi = 2.0 * 3.14159265358979323846 * rng.uniform();
    return {r * std::cos(phi), r * std::sin(phi)};
}

struct SchemeOutcome {
    bool produced = false;
    Metrics metrics{};
    bool qos_ok = false;
};

SchemeOutcome run_scheme(const LinkPair& pair, Scheme scheme, const NewtonConfig& newton,
                         uint64_t random_seed) {
    SchemeOutcome out;
    std::optional<std::pair<Allocation, Metrics>> picked;
    switch (scheme) {
        case Scheme::Proposed: {
            const SolveResult r = allocate(pair, newton);
            if (r.snapped && r.snapped_metrics) picked = {{*r.snapped, *r.snapped_metrics}};
            break;
        }
        case Scheme::Exhaustive: {
            if (auto r = exhaustive_optimal(pair, ExhaustiveMode::Reduced, Parallelism::Serial))
                picked = {{r->alloc, r->metrics}};
            break;
        }
        case Scheme::EeMax: {
            if (auto r = exhaustive_ee_max(pair, Parallelism::Serial))
                picked = {{r->alloc, r->metrics}};
            break;
        }
        case Scheme::Kkt: {
            if (auto r = kkt_alloc(pair); r && r->snapped && r->snapped_metrics)
                picked = {{*r->snapped, *r->snapped_metrics}};
            break;
        }
        case Scheme::Random: {
            const RandomDraw draw = random_alloc(pair, random_seed);
            out.produced = true;
            out.metrics = compute_metrics(pair, draw.alloc);
            out.qos_ok = draw.verdict.ok();
            return out;
        }
    }
    if (picked) {
        out.produced = true;
        out.metrics = picked->second;
        const double rtol = kFeasibilityRtol;
        out.qos_ok = out.metrics.s_p >= pair.qos.q_p * (1.0 - rtol) &&
                     out.metrics.s_s >= pair.qos.q_s * (1.0 - rtol);
    }
    return out;
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0;
    for (double x : xs) acc += x;
    return acc / static_cast<double>(xs.size());
}

double percentile(std::vector<double> xs, double p) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(xs.begin(), xs.end());
    if (p >= 1.0) return xs.back();
    const size_t n = xs.size();
    if (p == 0.5 && n % 2 == 0) return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
    const size_t idx = static_cast<size_t>(std::ceil(p * static_cast<double>(n))) - 1;
    return xs[std::min(idx, n - 1)];
}

}  // namespace

SweepReport monte_carlo(const MonteCarloConfig& config) {
    config.validate();
    const int runs = config.runs;
    const int nq = static_cast<int>(config.qp_list.size());
    const int ns = static_cast<int>(config.schemes.size());
    std::vector<RunSample> samples(static_cast<size_t>(runs) * nq * ns);

    auto do_run = [&](int run) {
        Rng geo_rng(derive_seed(config.seed, 0x67656f6d, static_cast<uint64_t>(run)));
        Scenario sc = config.base;
        sc.pt = {-config.radius_m, 0.0};
        sc.pr = {config.radius_m, 0.0};
        sc.st = sample_disk(geo_rng, config.radius_m);
        sc.sr = sample_disk(geo_rng, config.radius_m);
        const ChannelGains gains = gains_from_geometry(sc);
        for (int qi = 0; qi < nq; ++qi) {
            Scenario sq = sc;
            sq.qos.q_p = config.qp_list[static_cast<size_t>(qi)];
            sq.qos.q_s = config.qs;
            const LinkPair pair = make_link_pair(sq, gains);
            for (int si = 0; si < ns; ++si) {
                const Scheme scheme = config.schemes[static_cast<size_t>(si)];
                const uint64_t rnd_seed = derive_seed(config.seed, 0x726e6400,
                                                      static_cast<uint64_t>(run),
                                                      static_cast<uint64_t>(qi));
                const SchemeOutcome o = run_scheme(pair, scheme, config.newton, rnd_seed);
                RunSample& slot =
                    samples[(static_cast<size_t>(qi) * ns + si) * runs + run];
                slot = RunSample{run, sq.qos.q_p, scheme, o.produced, o.qos_ok, o.metrics};
            }
        }
    };

    if (config.parallelism == Parallelism::OpenMp) {
#pragma omp parallel for schedule(dynamic, 1)
        for (int run = 0; run < runs; ++run) do_run(run);
    } else {
        for (int run = 0; run < runs; ++run) do_run(run);
    }

    SweepReport report;
    for (int qi = 0; qi < nq; ++qi) {
        // Rows ordered by scheme name within each qp for stable CSV output.
        std::vector<int> order(static_cast<size_t>(ns));
        for (int si = 0; si < ns; ++si) order[static_cast<size_t>(si)] = si;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return std::string(scheme_name(config.schemes[static_cast<size_t>(a)])) <
                   std::string(scheme_name(config.schemes[static_cast<size_t>(b)]));
        });
        for (int si : order) {
            SweepRow row;
            row.qp = config.qp_list[static_cast<size_t>(qi)];
            row.scheme = config.schemes[static_cast<size_t>(si)];
            row.runs = runs;
            std::vector<double> wsps, sps, sss, ees;
            for (int run = 0; run < runs; ++run) {
                const RunSample& s =
                    samples[(static_cast<size_t>(qi) * ns + si) * runs + run];
                if (!s.produced) continue;
                ++row.produced_runs;
                if (s.qos_ok) ++row.feasible_runs;
                wsps.push_back(s.metrics.wsp);
                sps.push_back(s.metrics.s_p);
                sss.push_back(s.metrics.s_s);
                ees.push_back(s.metrics.ee);
            }
            row.feasible_rate = static_cast<double>(row.feasible_runs) / runs;
            row.mean_wsp = mean_of(wsps);
            row.mean_sp = mean_of(sps);
            row.mean_ss = mean_of(sss);
            row.mean_ee = mean_of(ees);
            report.rows.push_back(row);
        }
    }
    if (config.keep_samples) report.samples = std::move(samples);
    return report;
}

void DriftConfig::validate() const {
    if (subframes < 2) throw InvalidInput("DriftConfig: need at least 2 subframes");
    if (!(rho >= 0.0 && rho < 1.0)) throw InvalidInput("DriftConfig: need 0 <= rho < 1");
    if (distances_m.empty()) throw InvalidInput("DriftConfig: empty distance sweep");
    if (!(newton_epsilon > 0.0)) throw InvalidInput("DriftConfig: newton_epsilon must be > 0");
    base.validate();
}

Scenario drift_scenario(const Scenario& base, double d) {
    // PT-PR fixed at 10 km, SR-PR at 5 km, ST-SR at 5 km; PT-SR swept. SR sits
    // at the circle intersection, degenerating to the axis at both sweep ends.
    Scenario sc = base;
    sc.pt = {0.0, 0.0};
    sc.pr = {10000.0, 0.0};
    const double x = (d * d + 75e6) / 20000.0;
    const double y2 = d * d - x * x;
    sc.sr = {x, y2 > 0.0 ? std::sqrt(y2) : 0.0};
    sc.st = {sc.sr.x, sc.sr.y + 5000.0};
    sc.qos = {3.0, 3.0};
    return sc;
}

IterationsReport warmstart_experiment(const DriftConfig& config) {
    config.validate();
    IterationsReport report;
    const int T = config.subframes;
    for (size_t di = 0; di < config.distances_m.size(); ++di) {
        const double d = config.distances_m[di];
        const Scenario sc = drift_scenario(config.base, d);
        const ChannelGains base_gains = gains_from_geometry(sc);

        // One channel realization per distance, shared by all strategies.
        Rng rng(derive_seed(config.seed, 0x64726966, di));
        const double innov = config.sigma_db * std::sqrt(1.0 - config.rho * config.rho);
        std::vector<ChannelGains> track(static_cast<size_t>(T));
        double state[4];
        for (double& s : state) s = config.sigma_db * rng.normal();
        for (int t = 0; t < T; ++t) {
            if (t > 0)
                for (double& s : state) s = config.rho * s + innov * rng.normal();
            ChannelGains g = base_gains;
            g.lambda_pp *= std::pow(10.0, state[0] / 10.0);
            g.lambda_ps *= std::pow(10.0, state[1] / 10.0);
            g.lambda_sp *= std::pow(10.0, state[2] / 10.0);
            g.lambda_ss *= std::pow(10.0, state[3] / 10.0);
            track[static_cast<size_t>(t)] = g;
        }

        for (Theta0Strategy strategy : config.strategies) {
            std::optional<double> prev;
            std::vector<double> iters;
            for (int t = 0; t < T; ++t) {
                const LinkPair pair = make_link_pair(sc, track[static_cast<size_t>(t)]);
                NewtonConfig ncfg;
                ncfg.epsilon = config.newton_epsilon;
                ncfg.max_iter = config.max_iter;
                ncfg.theta0 = strategy;
                ncfg.previous_theta = prev;
                const NewtonOutcome out = newton_solve(pair, ncfg);
                IterSample sample;
                sample.distance_m = d;
                sample.strategy = strategy;
                sample.subframe = t;
                sample.feasible = out.status != SolveStatus::Infeasible;
                sample.iterations = out.trace.iterations;
                report.samples.push_back(sample);
                if (sample.feasible) {
                    iters.push_back(static_cast<double>(out.trace.iterations));
                    prev = out.theta_star;
                }
            }
            IterRow row;
            row.distance_m = d;
            row.strategy = strategy;
            row.feasible_subframes = static_cast<int>(iters.size());
            row.median_iters = percentile(iters, 0.5);
            row.p90_iters = percentile(iters, 0.9);
            report.rows.push_back(row);
        }
    }
    return report;
}

void BenchConfig::validate() const {
    if (repeats < 1) throw InvalidInput("BenchConfig: repeats must be >= 1");
    if (distances_m.empty()) throw InvalidInput("BenchConfig: empty distance sweep");
    if (schemes.empty()) throw InvalidInput("BenchConfig: no schemes selected");
    base.validate();
}

namespace {

double time_once_ms(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

TimingReport bench(const BenchConfig& config) {
    config.validate();
    TimingReport report;
    for (double d : config.distances_m) {
        const Scenario sc = drift_scenario(config.base, d);
        const LinkPair pair = make_link_pair(sc);

        std::vector<std::pair<Scheme, double>> medians;
        for (Scheme scheme : config.schemes) {
            std::function<void()> work;
            switch (scheme) {
                case Scheme::Proposed:
                    work = [&] { (void)allocate(pair, config.newton); };
                    break;
                case Scheme::Exhaustive:
                    work = [&] {
                        (void)exhaustive_optimal(pair, config.exhaustive_mode,
                                                 Parallelism::Serial);
                    };
                    break;
                case Scheme::EeMax:
                    work = [&] { (void)exhaustive_ee_max(pair, Parallelism::Serial); };
                    break;
                case Scheme::Kkt:
                    work = [&] { (void)kkt_alloc(pair); };
                    break;
                case Scheme::Random:
                    work = [&] { (void)random_alloc(pair, 1); };
                    break;
            }
            for (int i = 0; i < config.warmup; ++i) work();
            std::vector<double> times;
            times.reserve(static_cast<size_t>(config.repeats));
            for (int i = 0; i < config.repeats; ++i) times.push_back(time_once_ms(work));
            medians.emplace_back(scheme, percentile(times, 0.5));
        }

        double proposed_ms = std::numeric_limits<double>::quiet_NaN();
        for (const auto& [scheme, ms] : medians)
            if (scheme == Scheme::Proposed) proposed_ms = ms;
        std::sort(medians.begin(), medians.end(), [](const auto& a, const auto& b) {
            return std::string(scheme_name(a.first)) < std::string(scheme_name(b.first));
        });
        for (const auto& [scheme, ms] : medians) {
            TimingRow row;
            row.distance_m = d;
            row.scheme = scheme;
            row.median_ms = ms;
            row.ratio_vs_proposed = ms / proposed_ms;
            report.rows.push_back(row);
        }
    }
    return report;
}

ScalingReport exhaustive_scaling(const Scenario& base,
                                 const std::vector<std::pair<double, double>>& grids,
                                 int repeats) {
    ScalingReport report;
    const Scenario sc = drift_scenario(base, 10000.0);
    for (const auto& [dp_db, dtheta] : grids) {
        Scenario sg = sc;
        sg.grid.dp_db = dp_db;
        sg.grid.dtheta = dtheta;
        const LinkPair pair = make_link_pair(sg);
        ScalingPoint point;
        point.power_levels = static_cast<int>(pair.grid.power_levels().size());
        point.theta_levels = static_cast<int>(pair.grid.theta_levels().size());
        point.tuples = std::pow(point.power_levels, 3) * point.theta_levels;
        auto work = [&] {
            (void)exhaustive_optimal(pair, ExhaustiveMode::Naive, Parallelism::Serial);
        };
        work();
        std::vector<double> times;
        for (int i = 0; i < repeats; ++i) times.push_back(time_once_ms(work));
        point.median_ms = percentile(times, 0.5);
        report.points.push_back(point);
    }
    // Least-squares slope of log t on log tuples.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(report.points.size());
    for (const ScalingPoint& p : report.points) {
        const double x = std::log(p.tuples);
        const double y = std::log(p.median_ms);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    report.loglog_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return report;
}

double calibrate_intercept(const Scenario& base, const std::vector<double>& distances_m) {
    auto feasible_at = [&](double k) {
        for (double d : distances_m) {
            Scenario sc = drift_scenario(base, d);
            sc.intercept_gain = k;
            if (!feasible_theta_interval(make_link_pair(sc))) return false;
        }
        return true;
    };
    double lo_log = 0.0, hi_log = 8.0;
    if (feasible_at(std::pow(10.0, lo_log))) return std::pow(10.0, lo_log);
    if (!feasible_at(std::pow(10.0, hi_log)))
        throw InvalidScenario("calibrate_intercept: sweep infeasible even at huge intercepts");
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo_log + hi_log);
        if (feasible_at(std::pow(10.0, mid)))
            hi_log = mid;
        else
            lo_log = mid;
    }
    return std::pow(10.0, hi_log);
}

}  // namespace wsp
