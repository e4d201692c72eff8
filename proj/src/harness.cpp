#include "tlswitch/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace tlswitch {

namespace fs = std::filesystem;

// ── Utilities ────────────────────────────────────────────────────────────────

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double time_seconds(const std::function<void()>& fn) {
    using clock = std::chrono::steady_clock;
    auto once = [&]() {
        auto t0 = clock::now();
        fn();
        return std::chrono::duration<double>(clock::now() - t0).count();
    };
    double best = once();
    int reps = best > 0.0 ? static_cast<int>(0.05 / best) : 50;
    reps = std::min(std::max(reps, 2), 50);
    for (int i = 0; i < reps; ++i)
        best = std::min(best, once());
    return best;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string cell_str(std::pair<int, int> c) {
    return std::to_string(c.first) + ":" + std::to_string(c.second);
}

} // namespace

// ── Config ───────────────────────────────────────────────────────────────────

ExperimentConfig load_experiment_config(const std::string& path) {
    nlohmann::json doc = nlohmann::json::parse(read_file(path));
    fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& rel) {
        fs::path p(rel);
        return p.is_absolute() ? p.string() : (base / p).string();
    };

    ExperimentConfig cfg;
    auto get = [&](const char* key, auto& into) {
        if (doc.contains(key)) into = doc[key].get<std::decay_t<decltype(into)>>();
    };
    get("kind", cfg.kind);
    if (doc.contains("grid")) cfg.grid_path = resolve(doc["grid"].get<std::string>());
    get("formula", cfg.formula);
    if (doc.contains("fsa")) cfg.fsa_path = resolve(doc["fsa"].get<std::string>());
    get("horizon", cfg.horizon);
    get("pr_des", cfg.pr_des);
    get("epsilon_agent", cfg.epsilon_agent);
    get("z", cfg.z);
    get("episodes", cfg.episodes);
    get("n_sample", cfg.n_sample);
    get("runs", cfg.runs);
    get("seed", cfg.seed);
    get("bound_method", cfg.bound_method);
    if (doc.contains("outdir")) cfg.outdir = resolve(doc["outdir"].get<std::string>());
    get("window", cfg.window);
    get("mc_trials", cfg.mc_trials);
    get("alpha", cfg.alpha);
    get("gamma", cfg.gamma);
    get("explore_init", cfg.explore_init);
    get("explore_final", cfg.explore_final);
    get("report_k", cfg.report_k);
    if (doc.contains("report"))
        for (const auto& r : doc["report"]) {
            ReportState rs;
            rs.cell = {r.at("cell")[0].get<int>(), r.at("cell")[1].get<int>()};
            if (r.contains("fsa")) rs.fsa_state = r["fsa"].get<std::string>();
            cfg.report_states.push_back(rs);
        }
    if (doc.contains("sweep"))
        for (const auto& f : doc["sweep"])
            cfg.sweep.push_back(f.get<std::string>());

    if (cfg.grid_path.empty()) throw std::runtime_error("config: missing 'grid'");
    if (cfg.pr_des <= 0.0 || cfg.pr_des > 1.0)
        throw std::runtime_error("config: pr_des must lie in (0,1]");
    if (cfg.runs < 1) throw std::runtime_error("config: runs must be >= 1");
    return cfg;
}

// ── Context assembly ─────────────────────────────────────────────────────────

CaseContext build_context(const GridModel& grid, const Fsa& fsa, int horizon) {
    CaseContext ctx;
    ctx.grid = grid;
    ctx.fsa = fsa;
    ctx.fsa.extend_ap(ctx.grid.mdp.ap);
    ctx.pm = build_product(ctx.grid.knowledge, ctx.grid.mdp, ctx.fsa);
    ctx.dist = distance_to_accepting(ctx.pm);
    ctx.pi = compute_go_policy(ctx.pm, ctx.dist, kGridStayAction);
    ctx.jumps = compute_max_distance_increase(ctx.pm, ctx.dist);
    ctx.horizon = horizon;
    return ctx;
}

CaseContext build_context(const ExperimentConfig& cfg) {
    GridConfig gc = load_grid_config(nlohmann::json::parse(read_file(cfg.grid_path)));
    gc.epsilon_agent = cfg.epsilon_agent;
    GridModel grid = build_gridworld(gc);

    Fsa fsa;
    int horizon = cfg.horizon;
    if (!cfg.formula.empty()) {
        TwtlAst ast = parse_twtl(cfg.formula);
        fsa = translate_to_fsa(ast);
        if (horizon == 0) horizon = time_bound(ast);
    } else if (!cfg.fsa_path.empty()) {
        fsa = load_fsa(nlohmann::json::parse(read_file(cfg.fsa_path)));
        if (horizon == 0)
            throw std::runtime_error("config: 'horizon' is required with a stored automaton");
    } else {
        throw std::runtime_error("config: needs 'formula' or 'fsa'");
    }
    return build_context(grid, fsa, horizon);
}

// ── CSV reports ──────────────────────────────────────────────────────────────

std::string bounds_csv(const CaseContext& ctx, const std::vector<const BoundTable*>& tables,
                       const std::vector<ReportState>& selection, int k_filter) {
    std::string out = "method,k,state_cell,fsa_state,lb\n";
    auto emit = [&](const BoundTable& bt, int k, int p) {
        out += (bt.kind == BoundTable::Kind::Closed ? "closed," : "recursive,");
        out += std::to_string(k) + ",";
        out += cell_str(ctx.grid.state_cell[ctx.pm.mdp_of(p)]) + ",";
        out += ctx.fsa.state_names[ctx.pm.fsa_of(p)] + ",";
        out += fmt(bt.at(k, p)) + "\n";
    };

    for (const BoundTable* bt : tables)
        if (bt && bt->available && k_filter > bt->horizon)
            throw std::runtime_error("requested k=" + std::to_string(k_filter) +
                                     " exceeds the table horizon " +
                                     std::to_string(bt->horizon));

    std::vector<int> pids;
    if (selection.empty()) {
        for (int p = 0; p < ctx.pm.num_states(); ++p)
            pids.push_back(p);
    } else {
        for (const auto& rs : selection) {
            if (rs.cell.first < 0 || rs.cell.first >= ctx.grid.cfg.width ||
                rs.cell.second < 0 || rs.cell.second >= ctx.grid.cfg.height)
                throw std::runtime_error("report state outside the grid");
            int s = ctx.grid.state_at(rs.cell.first, rs.cell.second);
            if (s < 0) throw std::runtime_error("report state is an obstacle cell");
            bool matched = false;
            for (int q = 0; q < ctx.pm.n_fsa; ++q) {
                if (!rs.fsa_state.empty() && ctx.fsa.state_names[q] != rs.fsa_state) continue;
                pids.push_back(ctx.pm.pid(s, q));
                matched = true;
            }
            if (!matched)
                throw std::runtime_error("unknown automaton state '" + rs.fsa_state + "'");
        }
    }
    for (const BoundTable* bt : tables) {
        if (!bt || !bt->available) continue;
        for (int p : pids) {
            if (k_filter >= 0) {
                emit(*bt, k_filter, p);
            } else {
                for (int k = 0; k <= bt->horizon; ++k)
                    emit(*bt, k, p);
            }
        }
    }
    return out;
}

std::string validation_csv(const CaseContext& ctx, const BoundTable* closed,
                           const BoundTable* recursive, long long trials, std::uint64_t seed,
                           const std::vector<int>& budgets) {
    GoRollout roll(ctx.grid.mdp, ctx.pm, ctx.pi);
    int threads = std::max(1u, std::thread::hardware_concurrency());
    std::string out =
        "state_cell,fsa_state,k,trials,estimate,std_error,lb_closed,lb_recursive,valid\n";
    for (std::size_t i = 0; i < ctx.pm.init_states.size(); ++i) {
        int p0 = ctx.pm.init_states[i];
        auto counts = roll.first_hit_counts(p0, ctx.horizon, trials, derive_seed(seed, i), threads);
        for (int k : budgets) {
            double est = static_cast<double>(counts[k]) / static_cast<double>(trials);
            double se = std::sqrt(est * (1.0 - est) / static_cast<double>(trials));
            double lc = closed && closed->available ? closed->at(k, p0) : 0.0;
            double lr = recursive ? recursive->at(k, p0) : 0.0;
            bool valid = est >= lc - 3.0 * se && est >= lr - 3.0 * se;
            out += cell_str(ctx.grid.state_cell[ctx.pm.mdp_of(p0)]) + "," +
                   ctx.fsa.state_names[ctx.pm.fsa_of(p0)] + "," + std::to_string(k) + "," +
                   std::to_string(trials) + "," + fmt(est) + "," + fmt(se) + "," + fmt(lc) + "," +
                   fmt(lr) + "," + (valid ? "1" : "0") + "\n";
        }
    }
    return out;
}

std::string episodes_csv(const CaseContext& ctx, const std::vector<EpisodeRecord>& episodes) {
    std::string out = "episode,mode,p0_cell,p0_fsa,satisfied,reward,steps_to_acceptance\n";
    for (const auto& e : episodes) {
        out += std::to_string(e.episode) + ",";
        out += (e.mode == EpisodeMode::Go ? "GO," : "RL,");
        out += cell_str(ctx.grid.state_cell[ctx.pm.mdp_of(e.initial_state)]) + ",";
        out += ctx.fsa.state_names[ctx.pm.fsa_of(e.initial_state)] + ",";
        out += std::string(e.satisfied ? "1" : "0") + ",";
        out += fmt(e.total_reward) + "," + std::to_string(e.steps_to_acceptance) + "\n";
    }
    return out;
}

namespace {

// window-averaged series, one value per episode
std::vector<double> windowed(const std::vector<double>& xs, int window) {
    std::vector<double> out(xs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        acc += xs[i];
        if (i >= static_cast<std::size_t>(window)) acc -= xs[i - window];
        out[i] = acc / std::min<std::size_t>(i + 1, window);
    }
    return out;
}

} // namespace

std::string summary_csv(const std::vector<std::vector<EpisodeRecord>>& runs, int window) {
    std::string out =
        "episode,reward_mean,reward_min,reward_max,sat_mean,sat_min,sat_max,go_fraction\n";
    if (runs.empty()) return out;
    std::size_t episodes = runs[0].size();

    std::vector<std::vector<double>> rw, sat;
    for (const auto& run : runs) {
        std::vector<double> r, s;
        for (const auto& e : run) {
            r.push_back(e.total_reward);
            s.push_back(e.satisfied ? 1.0 : 0.0);
        }
        rw.push_back(windowed(r, window));
        sat.push_back(windowed(s, window));
    }

    for (std::size_t e = 0; e < episodes; ++e) {
        double rmin = rw[0][e], rmax = rw[0][e], rsum = 0.0;
        double smin = sat[0][e], smax = sat[0][e], ssum = 0.0;
        int go = 0;
        for (std::size_t r = 0; r < runs.size(); ++r) {
            rmin = std::min(rmin, rw[r][e]);
            rmax = std::max(rmax, rw[r][e]);
            rsum += rw[r][e];
            smin = std::min(smin, sat[r][e]);
            smax = std::max(smax, sat[r][e]);
            ssum += sat[r][e];
            go += runs[r][e].mode == EpisodeMode::Go ? 1 : 0;
        }
        out += std::to_string(e) + "," + fmt(rsum / runs.size()) + "," + fmt(rmin) + "," +
               fmt(rmax) + "," + fmt(ssum / runs.size()) + "," + fmt(smin) + "," + fmt(smax) +
               "," + fmt(static_cast<double>(go) / runs.size()) + "\n";
    }
    return out;
}

nlohmann::json qtable_json(const QTable& q) {
    nlohmann::json doc;
    doc["alpha"] = q.alpha;
    doc["gamma"] = q.gamma;
    doc["n_states"] = q.n_states;
    doc["n_actions"] = q.n_actions;
    nlohmann::json rows = nlohmann::json::array();
    for (int s = 0; s < q.n_states; ++s) {
        nlohmann::json row = nlohmann::json::array();
        for (int a = 0; a < q.n_actions; ++a)
            row.push_back(q.at(s, a));
        rows.push_back(std::move(row));
    }
    doc["q"] = std::move(rows);
    return doc;
}

nlohmann::json switch_stats_json(const SwitchStats& stats, const CaseContext& ctx) {
    nlohmann::json doc;
    doc["pr_des"] = stats.pr_des;
    doc["z"] = stats.z;
    doc["n_sample"] = stats.n_sample;
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t p = 0; p < stats.entries.size(); ++p) {
        const SwitchEntry& e = stats.entries[p];
        if (e.n == 0) continue;
        auto cell = ctx.grid.state_cell[ctx.pm.mdp_of(static_cast<int>(p))];
        entries.push_back({{"cell", {cell.first, cell.second}},
                           {"fsa", ctx.fsa.state_names[ctx.pm.fsa_of(static_cast<int>(p))]},
                           {"n", e.n},
                           {"n_success", e.n_success},
                           {"n_failure", e.n_failure},
                           {"pr_low", e.pr_low},
                           {"pr_up", e.pr_up},
                           {"pr_switch", e.pr_switch}});
    }
    doc["entries"] = std::move(entries);
    return doc;
}

// ── Bench ────────────────────────────────────────────────────────────────────

std::vector<BenchRow> bench_bounds(const GridModel& grid, const std::vector<std::string>& formulas,
                                   double eps) {
    std::vector<CaseContext> contexts;
    std::vector<BenchRow> rows;
    for (const auto& f : formulas) {
        TwtlAst ast = parse_twtl(f);
        Fsa fsa = translate_to_fsa(ast);
        contexts.push_back(build_context(grid, fsa, time_bound(ast)));
        BenchRow row;
        row.formula = f;
        row.horizon = contexts.back().horizon;
        row.pk_pairs = static_cast<long long>(contexts.back().pm.num_states()) * row.horizon;
        row.closed_seconds = row.recursive_seconds = std::numeric_limits<double>::infinity();
        rows.push_back(row);
    }

    // interleaved rounds, minimum per instance: background load hits all
    // sweep entries alike instead of distorting whichever ran during a spike
    using clock = std::chrono::steady_clock;
    auto once = [](const std::function<void()>& fn) {
        auto t0 = clock::now();
        fn();
        return std::chrono::duration<double>(clock::now() - t0).count();
    };
    const int rounds = 15;
    for (int round = 0; round < rounds; ++round) {
        for (std::size_t i = 0; i < contexts.size(); ++i) {
            const CaseContext& ctx = contexts[i];
            rows[i].closed_seconds = std::min(
                rows[i].closed_seconds,
                once([&] { closed_form_table(ctx.pm, ctx.dist, ctx.horizon, eps, ctx.jumps); }));
            rows[i].recursive_seconds = std::min(
                rows[i].recursive_seconds,
                once([&] { recursive_lb(ctx.pm, ctx.dist, ctx.pi, ctx.horizon, eps); }));
        }
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::string out = "formula,horizon,pk_pairs,closed_seconds,recursive_seconds\n";
    for (const auto& r : rows)
        out += "\"" + r.formula + "\"," + std::to_string(r.horizon) + "," +
               std::to_string(r.pk_pairs) + "," + fmt(r.closed_seconds) + "," +
               fmt(r.recursive_seconds) + "\n";
    return out;
}

// ── Full case ────────────────────────────────────────────────────────────────

namespace {

struct Manifest {
    std::vector<std::pair<std::string, std::string>> files; // name, content
    std::string outdir;

    void add(const std::string& name, const std::string& content) {
        write_file(outdir + "/" + name, content);
        files.push_back({name, content});
    }
    void finish(const std::string& status) {
        std::string out = "# MANIFEST\nstatus: " + status + "\n";
        for (const auto& [name, content] : files) {
            char hash[20];
            std::snprintf(hash, sizeof(hash), "%016llx",
                          static_cast<unsigned long long>(fnv1a64(content)));
            out += name + "\t" + hash + "\t" + std::to_string(content.size()) + "\n";
        }
        out += "# timing artifacts vary with the machine; seeded artifacts are "
               "reproducible from (config, seed)\n";
        write_file(outdir + "/MANIFEST", out);
    }
};

} // namespace

std::string training_plot_script(const std::string& summary_file) {
    return "set datafile separator ','\n"
           "set key autotitle columnhead\n"
           "set term pngcairo size 1000,400\n"
           "set output 'curves.png'\n"
           "set multiplot layout 1,2\n"
           "set title 'reward (moving window)'\n"
           "plot '" + summary_file + "' using 1:3:4 with filledcurves fc rgb '#cce5ff' notitle, \\\n"
           "     '' using 1:2 with lines lc rgb '#1f77b4' title 'mean'\n"
           "set title 'satisfaction rate (moving window)'\n"
           "set yrange [0:1.05]\n"
           "plot '" + summary_file + "' using 1:6:7 with filledcurves fc rgb '#ffe0cc' notitle, \\\n"
           "     '' using 1:5 with lines lc rgb '#d62728' title 'mean'\n"
           "unset multiplot\n";
}

void run_case(const ExperimentConfig& cfg) {
    Manifest manifest;
    manifest.outdir = cfg.outdir;
    std::string stage = "setup";
    try {
        CaseContext ctx = build_context(cfg);
        manifest.add("env.txt", ascii_map(ctx.grid));

        if (cfg.kind == "bench") {
            stage = "bench";
            manifest.add("timing_sweep.csv", bench_csv(bench_bounds(ctx.grid, cfg.sweep,
                                                                    cfg.epsilon_agent)));
            manifest.finish("ok");
            return;
        }

        stage = "bounds";
        const bool want_closed = cfg.bound_method == "closed" || cfg.bound_method == "both";
        const bool want_recursive =
            cfg.bound_method == "recursive" || cfg.bound_method == "both";
        std::optional<BoundTable> closed, recursive;
        double closed_time = 0.0, recursive_time = 0.0;
        if (want_closed || cfg.kind == "table" || cfg.mc_trials > 0) {
            closed_time = time_seconds(
                [&] { closed_form_table(ctx.pm, ctx.dist, ctx.horizon, cfg.epsilon_agent,
                                        ctx.jumps); });
            closed = closed_form_table(ctx.pm, ctx.dist, ctx.horizon, cfg.epsilon_agent,
                                       ctx.jumps);
        }
        if (want_recursive || cfg.kind == "table" || cfg.mc_trials > 0) {
            recursive_time = time_seconds(
                [&] { recursive_lb(ctx.pm, ctx.dist, ctx.pi, ctx.horizon, cfg.epsilon_agent); });
            recursive = recursive_lb(ctx.pm, ctx.dist, ctx.pi, ctx.horizon, cfg.epsilon_agent);
        }

        std::vector<const BoundTable*> tables;
        if (closed) tables.push_back(&*closed);
        if (recursive) tables.push_back(&*recursive);
        manifest.add("bounds.csv",
                     bounds_csv(ctx, tables, cfg.report_states,
                                cfg.report_k >= 0 ? cfg.report_k : ctx.horizon));
        manifest.add("timing.csv", "method,seconds\nclosed," + fmt(closed_time) +
                                       "\nrecursive," + fmt(recursive_time) + "\n");

        if (cfg.mc_trials > 0) {
            stage = "validation";
            std::vector<int> budgets{ctx.horizon / 4, ctx.horizon / 2, ctx.horizon};
            manifest.add("validation.csv",
                         validation_csv(ctx, closed ? &*closed : nullptr,
                                        recursive ? &*recursive : nullptr, cfg.mc_trials,
                                        derive_seed(cfg.seed, 0x4D43), budgets));
        }

        if (cfg.kind == "train") {
            stage = "train";
            const BoundTable& cert = want_recursive ? *recursive : *closed;
            std::vector<std::vector<EpisodeRecord>> all_runs(cfg.runs);
            std::vector<TrainResult> results(cfg.runs);
            std::vector<std::exception_ptr> errors(cfg.runs);
            auto one_run = [&](int r) {
                try {
                    TrainConfig tc;
                    tc.episodes = cfg.episodes;
                    tc.horizon = ctx.horizon;
                    tc.pr_des = cfg.pr_des;
                    tc.z = cfg.z;
                    tc.n_sample = cfg.n_sample;
                    tc.alpha = cfg.alpha;
                    tc.gamma = cfg.gamma;
                    tc.explore_init = cfg.explore_init;
                    tc.explore_final = cfg.explore_final;
                    tc.seed = derive_seed(cfg.seed, r);
                    tc.start_state = ctx.grid.start_state;
                    results[r] = train(ctx.grid.mdp, ctx.pm, ctx.pi, cert, tc);
                    all_runs[r] = results[r].episodes;
                } catch (...) {
                    errors[r] = std::current_exception();
                }
            };
            std::vector<std::thread> pool;
            for (int r = 0; r < cfg.runs; ++r)
                pool.emplace_back(one_run, r);
            for (auto& th : pool) th.join();
            for (const auto& err : errors)
                if (err) std::rethrow_exception(err);

            for (int r = 0; r < cfg.runs; ++r) {
                std::string tag = "run" + std::to_string(r);
                manifest.add("episodes_" + tag + ".csv", episodes_csv(ctx, all_runs[r]));
                manifest.add("qtable_" + tag + ".json", qtable_json(results[r].q).dump(1));
                manifest.add("stats_" + tag + ".json",
                             switch_stats_json(results[r].stats, ctx).dump(1));
            }
            manifest.add("summary.csv", summary_csv(all_runs, cfg.window));
            if (cfg.emit_gnuplot) manifest.add("plots.gp", training_plot_script("summary.csv"));
        }
        manifest.finish("ok");
    } catch (...) {
        manifest.finish("failed:" + stage);
        throw;
    }
}

} // namespace tlswitch
