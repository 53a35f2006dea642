// Experiment front end. Subcommands:
//   solve      one link pair -> allocation + metrics (key=value output)
//   sweep      QoS-sweep Monte Carlo           -> CSV
//   warmstart  Newton iteration study          -> CSV
//   bench      per-scheme wall-clock medians   -> CSV
//   match      pairwise costs + assignment     -> CSV
//
// Configuration is a flat key=value file (see README for the key list);
// command-line flags override. All floating-point output uses nine
// significant digits so reruns with the same config and seed are
// byte-identical.
//
// Exit codes: 0 ok, 2 infeasible solve, 3 configuration error,
// 4 internal solver failure.

#include <CLI11.hpp>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wsp/matching.hpp"
#include "wsp/sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitConfig = 3;
constexpr int kExitInternal = 4;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Flat key=value store with consumption tracking; leftover keys are a
// configuration error so typos never pass silently.
class KeyValueConfig {
  public:
    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string stripped = trim(line);
            if (stripped.empty()) continue;
            const size_t eq = stripped.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": expected key = value");
            const std::string key = trim(stripped.substr(0, eq));
            const std::string value = trim(stripped.substr(eq + 1));
            if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) +
                                               ": empty key");
            values_[key] = value;
        }
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::optional<std::string> raw(const std::string& key) {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        consumed_.insert(key);
        return it->second;
    }

    double number(const std::string& key, double fallback) {
        const auto v = raw(key);
        if (!v) return fallback;
        try {
            size_t pos = 0;
            const double x = std::stod(*v, &pos);
            if (pos != v->size()) throw ConfigError("");
            return x;
        } catch (...) {
            throw ConfigError("config key '" + key + "': not a number: " + *v);
        }
    }

    int integer(const std::string& key, int fallback) {
        const double x = number(key, fallback);
        if (x != static_cast<int>(x))
            throw ConfigError("config key '" + key + "': expected an integer");
        return static_cast<int>(x);
    }

    uint64_t seed(const std::string& key, uint64_t fallback) {
        const auto v = raw(key);
        if (!v) return fallback;
        try {
            return std::stoull(*v);
        } catch (...) {
            throw ConfigError("config key '" + key + "': not a seed: " + *v);
        }
    }

    std::vector<double> number_list(const std::string& key, std::vector<double> fallback) {
        const auto v = raw(key);
        if (!v) return fallback;
        std::vector<double> out;
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                out.push_back(std::stod(item));
            } catch (...) {
                throw ConfigError("config key '" + key + "': bad list element: " + item);
            }
        }
        if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
        return out;
    }

    std::string text(const std::string& key, const std::string& fallback) {
        const auto v = raw(key);
        return v ? *v : fallback;
    }

    void reject_unconsumed() const {
        std::vector<std::string> unknown;
        for (const auto& [key, value] : values_)
            if (!consumed_.count(key)) unknown.push_back(key);
        if (!unknown.empty()) {
            std::string msg = "unknown config keys:";
            for (const auto& k : unknown) msg += " " + k;
            throw ConfigError(msg);
        }
    }

  private:
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

std::string g9(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

void write_text(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::fputs(content.c_str(), stdout);
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + out_path);
    out << content;
}

// ---------------------------------------------------------------------------
// Config -> domain objects
// ---------------------------------------------------------------------------

wsp::Vec2 parse_vec2(KeyValueConfig& cfg, const std::string& key, wsp::Vec2 fallback) {
    const auto v = cfg.raw(key);
    if (!v) return fallback;
    const auto xs = [&] {
        std::vector<double> out;
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(std::stod(trim(item)));
        return out;
    };
    try {
        const auto coords = xs();
        if (coords.size() != 2) throw ConfigError("");
        return {coords[0], coords[1]};
    } catch (...) {
        throw ConfigError("config key '" + key + "': expected 'x,y'");
    }
}

wsp::Scenario scenario_from(KeyValueConfig& cfg) {
    wsp::Scenario s;
    s.pt = parse_vec2(cfg, "pt", s.pt);
    s.pr = parse_vec2(cfg, "pr", s.pr);
    s.st = parse_vec2(cfg, "st", s.st);
    s.sr = parse_vec2(cfg, "sr", s.sr);
    s.path_loss_exp = cfg.number("gamma", s.path_loss_exp);
    s.ref_distance_m = cfg.number("d0_m", s.ref_distance_m);
    s.intercept_gain = cfg.number("intercept_gain", s.intercept_gain);
    s.noise_dbm_hz = cfg.number("noise_dbm_hz", s.noise_dbm_hz);
    s.bandwidth_hz = cfg.number("bandwidth_hz", s.bandwidth_hz);
    s.weights.w_pt = cfg.number("w_pt", s.weights.w_pt);
    s.weights.w_sr = cfg.number("w_sr", s.weights.w_sr);
    s.weights.w_st = cfg.number("w_st", s.weights.w_st);
    s.qos.q_p = cfg.number("qp", s.qos.q_p);
    s.qos.q_s = cfg.number("qs", s.qos.q_s);
    s.grid.pmin_dbm = cfg.number("pmin_dbm", s.grid.pmin_dbm);
    s.grid.pmax_dbm = cfg.number("pmax_dbm", s.grid.pmax_dbm);
    s.grid.dp_db = cfg.number("dp_db", s.grid.dp_db);
    s.grid.dtheta = cfg.number("dtheta", s.grid.dtheta);
    return s;
}

// Direct channel-gain overrides bypass the geometry.
std::optional<wsp::ChannelGains> gains_override(KeyValueConfig& cfg) {
    const bool any = cfg.has("lambda_pp") || cfg.has("lambda_ps") || cfg.has("lambda_sp") ||
                     cfg.has("lambda_ss");
    if (!any) return std::nullopt;
    wsp::ChannelGains g;
    g.lambda_pp = cfg.number("lambda_pp", 0.0);
    g.lambda_ps = cfg.number("lambda_ps", 0.0);
    g.lambda_sp = cfg.number("lambda_sp", 0.0);
    g.lambda_ss = cfg.number("lambda_ss", 0.0);
    try {
        g.validate();
    } catch (const wsp::InvalidInput& e) {
        throw ConfigError(std::string("channel override: ") + e.what());
    }
    return g;
}

wsp::Theta0Strategy parse_strategy(const std::string& name) {
    if (name == "midpoint") return wsp::Theta0Strategy::Midpoint;
    if (name == "scan") return wsp::Theta0Strategy::ConvergenceScan;
    if (name == "scan_alt") return wsp::Theta0Strategy::ConvergenceScanAlt;
    if (name == "warm") return wsp::Theta0Strategy::WarmStart;
    throw ConfigError("unknown theta0 strategy: " + name);
}

wsp::NewtonConfig newton_from(KeyValueConfig& cfg) {
    wsp::NewtonConfig n;
    n.epsilon = cfg.number("epsilon", n.epsilon);
    n.max_iter = cfg.integer("max_iter", n.max_iter);
    n.theta0 = parse_strategy(cfg.text("theta0", "midpoint"));
    if (cfg.has("warm_theta")) n.previous_theta = cfg.number("warm_theta", 0.0);
    return n;
}

std::vector<wsp::Scheme> parse_schemes(const std::string& list) {
    std::vector<wsp::Scheme> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        if (item == "proposed") out.push_back(wsp::Scheme::Proposed);
        else if (item == "exhaustive") out.push_back(wsp::Scheme::Exhaustive);
        else if (item == "kkt") out.push_back(wsp::Scheme::Kkt);
        else if (item == "random") out.push_back(wsp::Scheme::Random);
        else if (item == "eemax") out.push_back(wsp::Scheme::EeMax);
        else throw ConfigError("unknown scheme: " + item);
    }
    if (out.empty()) throw ConfigError("empty scheme list");
    return out;
}

std::vector<double> distance_sweep(KeyValueConfig& cfg) {
    const double lo = cfg.number("dist_min_m", 5000.0);
    const double hi = cfg.number("dist_max_m", 15000.0);
    const double step = cfg.number("dist_step_m", 1000.0);
    if (!(lo > 0.0) || !(hi >= lo) || !(step > 0.0))
        throw ConfigError("bad distance sweep (dist_min_m/dist_max_m/dist_step_m)");
    std::vector<double> out;
    for (double d = lo; d <= hi + 1e-9; d += step) out.push_back(d);
    return out;
}

std::vector<std::pair<wsp::Vec2, wsp::Vec2>> parse_node_pairs(const std::string& text,
                                                              const std::string& key) {
    std::vector<std::pair<wsp::Vec2, wsp::Vec2>> out;
    std::stringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        group = trim(group);
        if (group.empty()) continue;
        std::vector<double> xs;
        std::stringstream ss(group);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            try {
                xs.push_back(std::stod(item));
            } catch (...) {
                throw ConfigError("config key '" + key + "': bad coordinate: " + item);
            }
        }
        if (xs.size() != 4)
            throw ConfigError("config key '" + key + "': each entry needs 'x1,y1,x2,y2'");
        out.push_back({{xs[0], xs[1]}, {xs[2], xs[3]}});
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    std::optional<uint64_t> seed;
    std::optional<double> grid_dp;
    std::optional<double> grid_dtheta;
    std::optional<std::string> schemes;
    std::optional<int> runs;
};

KeyValueConfig load_config(const CommonArgs& args) {
    KeyValueConfig cfg;
    if (!args.config_path.empty()) cfg.load_file(args.config_path);
    if (args.seed) cfg.set("seed", std::to_string(*args.seed));
    if (args.grid_dp) cfg.set("dp_db", g9(*args.grid_dp));
    if (args.grid_dtheta) cfg.set("dtheta", g9(*args.grid_dtheta));
    if (args.schemes) cfg.set("schemes", *args.schemes);
    if (args.runs) cfg.set("runs", std::to_string(*args.runs));
    return cfg;
}

std::string out_path_from(KeyValueConfig& cfg, const CommonArgs& args) {
    const std::string from_cfg = cfg.text("out", "");
    return args.out_path.empty() ? from_cfg : args.out_path;
}

int cmd_solve(const CommonArgs& args) {
    KeyValueConfig cfg = load_config(args);
    const wsp::Scenario sc = scenario_from(cfg);
    const auto gains = gains_override(cfg);
    const wsp::NewtonConfig newton = newton_from(cfg);
    const std::string out_path = out_path_from(cfg, args);
    cfg.seed("seed", 0);  // accepted for uniformity, unused here
    cfg.reject_unconsumed();

    const wsp::LinkPair pair =
        gains ? wsp::make_link_pair(sc, *gains) : wsp::make_link_pair(sc);
    const wsp::SolveResult r = wsp::allocate(pair, newton);

    std::string text;
    text += std::string("status=") + wsp::solve_status_name(r.status) + "\n";
    if (r.status == wsp::SolveStatus::Infeasible) {
        write_text(out_path, text);
        return kExitInfeasible;
    }
    text += std::string("case=") + wsp::case_name(r.final_case) + "\n";
    text += "iterations=" + std::to_string(r.trace.iterations) + "\n";
    text += "interval_lo=" + g9(r.interval.lo) + "\n";
    text += "interval_hi=" + g9(r.interval.hi) + "\n";
    if (r.continuous) {
        text += "theta_star=" + g9(r.continuous->theta) + "\n";
        text += "p_p_w=" + g9(r.continuous->p_p) + "\n";
        text += "p_r_w=" + g9(r.continuous->p_r) + "\n";
        text += "p_s_w=" + g9(r.continuous->p_s) + "\n";
        text += "wsp_w=" + g9(r.continuous_metrics->wsp) + "\n";
        text += "s_p=" + g9(r.continuous_metrics->s_p) + "\n";
        text += "s_s=" + g9(r.continuous_metrics->s_s) + "\n";
        text += "ee=" + g9(r.continuous_metrics->ee) + "\n";
    }
    if (r.snapped) {
        text += "snapped_theta=" + g9(r.snapped->theta) + "\n";
        text += "snapped_p_p_w=" + g9(r.snapped->p_p) + "\n";
        text += "snapped_p_r_w=" + g9(r.snapped->p_r) + "\n";
        text += "snapped_p_s_w=" + g9(r.snapped->p_s) + "\n";
        text += "snapped_wsp_w=" + g9(r.snapped_metrics->wsp) + "\n";
    } else {
        text += "snapped=none\n";
    }
    write_text(out_path, text);
    return kExitOk;
}

int cmd_sweep(const CommonArgs& args) {
    KeyValueConfig cfg = load_config(args);
    wsp::MonteCarloConfig mc;
    mc.base = scenario_from(cfg);
    mc.newton = newton_from(cfg);
    mc.runs = cfg.integer("runs", mc.runs);
    mc.radius_m = cfg.number("radius_m", mc.radius_m);
    mc.qp_list = cfg.number_list("qp_list", mc.qp_list);
    mc.qs = mc.base.qos.q_s;
    mc.seed = cfg.seed("seed", mc.seed);
    mc.schemes = parse_schemes(cfg.text("schemes", "exhaustive,kkt,proposed,random"));
    const std::string out_path = out_path_from(cfg, args);
    cfg.reject_unconsumed();

    const wsp::SweepReport report = wsp::monte_carlo(mc);
    std::string csv = "qp,scheme,mean_wsp,mean_sp,mean_ss,mean_ee,feasible_rate\n";
    for (const wsp::SweepRow& row : report.rows) {
        csv += g9(row.qp);
        csv += ",";
        csv += wsp::scheme_name(row.scheme);
        csv += "," + g9(row.mean_wsp) + "," + g9(row.mean_sp) + "," + g9(row.mean_ss) + "," +
               g9(row.mean_ee) + "," + g9(row.feasible_rate) + "\n";
    }
    write_text(out_path, csv);
    return kExitOk;
}

int cmd_warmstart(const CommonArgs& args) {
    KeyValueConfig cfg = load_config(args);
    wsp::DriftConfig dc;
    dc.base = scenario_from(cfg);
    dc.subframes = cfg.integer("subframes", dc.subframes);
    dc.distances_m = distance_sweep(cfg);
    dc.sigma_db = cfg.number("sigma_db", dc.sigma_db);
    dc.rho = cfg.number("rho", dc.rho);
    dc.seed = cfg.seed("seed", dc.seed);
    dc.newton_epsilon = cfg.number("drift_epsilon", dc.newton_epsilon);
    dc.max_iter = cfg.integer("max_iter", dc.max_iter);
    const std::string out_path = out_path_from(cfg, args);
    cfg.reject_unconsumed();

    const wsp::IterationsReport report = wsp::warmstart_experiment(dc);
    std::vector<wsp::IterRow> rows = report.rows;
    std::sort(rows.begin(), rows.end(), [](const wsp::IterRow& a, const wsp::IterRow& b) {
        if (a.distance_m != b.distance_m) return a.distance_m < b.distance_m;
        return std::string(wsp::theta0_strategy_name(a.strategy)) <
               std::string(wsp::theta0_strategy_name(b.strategy));
    });
    std::string csv = "distance_m,strategy,median_iters,p90_iters\n";
    for (const wsp::IterRow& row : rows) {
        csv += g9(row.distance_m);
        csv += ",";
        csv += wsp::theta0_strategy_name(row.strategy);
        csv += "," + g9(row.median_iters) + "," + g9(row.p90_iters) + "\n";
    }
    write_text(out_path, csv);
    return kExitOk;
}

int cmd_bench(const CommonArgs& args) {
    KeyValueConfig cfg = load_config(args);
    wsp::BenchConfig bc;
    bc.base = scenario_from(cfg);
    bc.newton = newton_from(cfg);
    bc.distances_m = distance_sweep(cfg);
    bc.repeats = cfg.integer("repeats", bc.repeats);
    bc.warmup = cfg.integer("warmup", bc.warmup);
    bc.schemes = parse_schemes(cfg.text("schemes", "exhaustive,kkt,proposed"));
    cfg.seed("seed", 0);  // accepted for uniformity; timing has no RNG
    const std::string out_path = out_path_from(cfg, args);
    cfg.reject_unconsumed();

    const wsp::TimingReport report = wsp::bench(bc);
    std::string csv = "distance_m,scheme,median_ms,ratio_vs_proposed\n";
    for (const wsp::TimingRow& row : report.rows) {
        csv += g9(row.distance_m);
        csv += ",";
        csv += wsp::scheme_name(row.scheme);
        csv += "," + g9(row.median_ms) + "," + g9(row.ratio_vs_proposed) + "\n";
    }
    write_text(out_path, csv);
    return kExitOk;
}

int cmd_match(const CommonArgs& args) {
    KeyValueConfig cfg = load_config(args);
    const wsp::Scenario base = scenario_from(cfg);
    const wsp::NewtonConfig newton = newton_from(cfg);
    const auto primaries = parse_node_pairs(cfg.text("primaries", ""), "primaries");
    const auto secondaries = parse_node_pairs(cfg.text("secondaries", ""), "secondaries");
    cfg.seed("seed", 0);
    const std::string out_path = out_path_from(cfg, args);
    cfg.reject_unconsumed();

    std::vector<std::vector<wsp::LinkPair>> pairs;
    for (const auto& [pt, pr] : primaries) {
        std::vector<wsp::LinkPair> row;
        for (const auto& [st, sr] : secondaries) {
            wsp::Scenario sc = base;
            sc.pt = pt;
            sc.pr = pr;
            sc.st = st;
            sc.sr = sr;
            row.push_back(wsp::make_link_pair(sc));
        }
        pairs.push_back(std::move(row));
    }
    const wsp::CostMatrix costs = wsp::pairwise_cost_matrix(pairs, newton);
    const wsp::Assignment assignment = wsp::kuhn_munkres(costs);

    struct Row {
        int primary;
        int secondary;
        double cost;
    };
    std::vector<Row> rows;
    for (int j : assignment.unmatched_secondaries)
        rows.push_back({-1, j, std::numeric_limits<double>::quiet_NaN()});
    for (const auto& m : assignment.pairs) rows.push_back({m.primary, m.secondary, m.cost});
    for (int i : assignment.unmatched_primaries)
        rows.push_back({i, -1, std::numeric_limits<double>::quiet_NaN()});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.primary != b.primary) return a.primary < b.primary;
        return a.secondary < b.secondary;
    });
    std::string csv = "primary_id,secondary_id,cost_w\n";
    for (const Row& r : rows)
        csv += std::to_string(r.primary) + "," + std::to_string(r.secondary) + "," +
               g9(r.cost) + "\n";
    write_text(out_path, csv);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weighted-sum-power allocation experiments"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "key=value config file");
        sub->add_option("--out", args.out_path, "output path (default: stdout)");
        sub->add_option("--seed", args.seed, "RNG seed override");
        sub->add_option("--grid-dp", args.grid_dp, "power grid step override, dB");
        sub->add_option("--grid-dtheta", args.grid_dtheta, "theta grid step override");
        sub->add_option("--schemes", args.schemes, "comma-separated scheme list");
        sub->add_option("--runs", args.runs, "Monte Carlo run count override");
    };

    CLI::App* solve = app.add_subcommand("solve", "solve one link pair");
    CLI::App* sweep = app.add_subcommand("sweep", "QoS-sweep Monte Carlo");
    CLI::App* warmstart = app.add_subcommand("warmstart", "Newton iteration study");
    CLI::App* bench = app.add_subcommand("bench", "scheme timing comparison");
    CLI::App* match = app.add_subcommand("match", "multi-link assignment");
    for (CLI::App* sub : {solve, sweep, warmstart, bench, match}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(args);
        if (sweep->parsed()) return cmd_sweep(args);
        if (warmstart->parsed()) return cmd_warmstart(args);
        if (bench->parsed()) return cmd_bench(args);
        if (match->parsed()) return cmd_match(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const wsp::InvalidInput& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const wsp::InvalidScenario& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitConfig;
}
