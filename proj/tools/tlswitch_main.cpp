// tlswitch — temporal-logic-constrained switching RL toolbox.
//
// Subcommands: translate, env, product, bounds, verify, train, case.

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "tlswitch/harness.hpp"

using namespace tlswitch;

namespace {

ExperimentConfig make_cfg(const std::string& grid, const std::string& formula,
                          const std::string& fsa_path, double eps, int horizon) {
    ExperimentConfig cfg;
    cfg.grid_path = grid;
    cfg.formula = formula;
    cfg.fsa_path = fsa_path;
    cfg.epsilon_agent = eps;
    cfg.horizon = horizon;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"switching-based RL under bounded-temporal-logic constraints"};
    app.require_subcommand(1);

    // ── translate ────────────────────────────────────────────────────────────
    auto* translate = app.add_subcommand("translate", "formula -> automaton JSON");
    std::string t_formula, t_out, t_dot;
    translate->add_option("--formula", t_formula, "formula string")->required();
    translate->add_option("--out", t_out, "output automaton JSON")->required();
    translate->add_option("--dot", t_dot, "also write a Graphviz rendering");
    translate->callback([&] {
        TwtlAst ast = parse_twtl(t_formula);
        Fsa fsa = translate_to_fsa(ast);
        write_file(t_out, save_fsa(fsa).dump(1) + "\n");
        if (!t_dot.empty()) write_file(t_dot, to_dot(fsa));
        std::cout << "time bound: " << time_bound(ast) << "\nstates: " << fsa.num_states()
                  << "\nwrote " << t_out << "\n";
    });

    // ── env show ─────────────────────────────────────────────────────────────
    auto* env = app.add_subcommand("env", "environment inspection");
    auto* env_show = env->add_subcommand("show", "print the grid as ASCII");
    std::string e_grid;
    env_show->add_option("--config", e_grid, "grid JSON")->required();
    env_show->callback([&] {
        GridModel g = build_gridworld(load_grid_config(nlohmann::json::parse(read_file(e_grid))));
        std::cout << ascii_map(g);
    });

    // ── product stats ────────────────────────────────────────────────────────
    auto* product = app.add_subcommand("product", "product inspection");
    auto* product_stats = product->add_subcommand("stats", "print product sizes");
    std::string p_grid, p_formula, p_fsa;
    double p_eps = 0.1;
    int p_horizon = 0;
    product_stats->add_option("--config", p_grid, "grid JSON")->required();
    product_stats->add_option("--formula", p_formula, "formula string");
    product_stats->add_option("--fsa", p_fsa, "stored automaton JSON");
    product_stats->add_option("--eps", p_eps, "agent-side transition uncertainty");
    product_stats->add_option("--horizon", p_horizon, "episode length (with --fsa)");
    product_stats->callback([&] {
        CaseContext ctx = build_context(make_cfg(p_grid, p_formula, p_fsa, p_eps, p_horizon));
        int n_acc = 0, n_reach = 0, n_finite = 0;
        for (int p = 0; p < ctx.pm.num_states(); ++p) {
            n_acc += ctx.pm.accepting[p];
            n_reach += ctx.pm.reachable[p];
            n_finite += ctx.dist.finite(p);
        }
        std::cout << "product states: " << ctx.pm.num_states() << " (" << ctx.pm.n_mdp
                  << " mdp x " << ctx.pm.n_fsa << " fsa)\n"
                  << "initial states: " << ctx.pm.init_states.size() << "\n"
                  << "accepting states: " << n_acc << "\n"
                  << "reachable from initial: " << n_reach << "\n"
                  << "finite distance: " << n_finite << "\n"
                  << "max distance increase: " << ctx.jumps.max_increase << "\n"
                  << "finite->infinite jumps: " << ctx.jumps.infinite_jumps.size() << "\n";
        for (const auto& w : ctx.pm.warnings)
            std::cout << "warning: " << w << "\n";
    });

    // ── bounds ───────────────────────────────────────────────────────────────
    auto* bounds = app.add_subcommand("bounds", "lower-bound tables");
    std::string b_grid, b_formula, b_fsa, b_method = "both", b_state, b_out;
    double b_eps = 0.1;
    int b_horizon = 0, b_k = -1;
    bounds->add_option("--config", b_grid, "grid JSON")->required();
    bounds->add_option("--formula", b_formula, "formula string");
    bounds->add_option("--fsa", b_fsa, "stored automaton JSON");
    bounds->add_option("--eps", b_eps, "agent-side transition uncertainty");
    bounds->add_option("--method", b_method, "closed | recursive | both");
    bounds->add_option("--state", b_state, "filter: x,y or x,y,qname");
    bounds->add_option("--k", b_k, "filter: single step budget");
    bounds->add_option("--horizon", b_horizon, "episode length (with --fsa)");
    bounds->add_option("--out", b_out, "output CSV")->required();
    bounds->callback([&] {
        CaseContext ctx = build_context(make_cfg(b_grid, b_formula, b_fsa, b_eps, b_horizon));
        std::optional<BoundTable> closed, recursive;
        std::vector<const BoundTable*> tables;
        if (b_method == "closed" || b_method == "both") {
            closed = closed_form_table(ctx.pm, ctx.dist, ctx.horizon, b_eps, ctx.jumps);
            if (!closed->available)
                std::cerr << "note: closed-form table unavailable ("
                          << ctx.jumps.infinite_jumps.size()
                          << " transitions jump to infinite distance)\n";
            tables.push_back(&*closed);
        }
        if (b_method == "recursive" || b_method == "both") {
            recursive = recursive_lb(ctx.pm, ctx.dist, ctx.pi, ctx.horizon, b_eps);
            tables.push_back(&*recursive);
        }
        std::vector<ReportState> sel;
        if (!b_state.empty()) {
            ReportState rs;
            if (std::sscanf(b_state.c_str(), "%d,%d", &rs.cell.first, &rs.cell.second) != 2)
                throw std::runtime_error("--state expects x,y[,qname]");
            auto second_comma = b_state.find(',', b_state.find(',') + 1);
            if (second_comma != std::string::npos) rs.fsa_state = b_state.substr(second_comma + 1);
            sel.push_back(rs);
        }
        write_file(b_out, bounds_csv(ctx, tables, sel, b_k));
        std::cout << "wrote " << b_out << "\n";
    });

    // ── verify ───────────────────────────────────────────────────────────────
    auto* verify = app.add_subcommand("verify", "Monte-Carlo check of the bounds");
    std::string v_grid, v_formula, v_fsa, v_out;
    double v_eps = 0.1;
    long long v_trials = 100000;
    std::uint64_t v_seed = 7;
    int v_horizon = 0;
    verify->add_option("--config", v_grid, "grid JSON")->required();
    verify->add_option("--formula", v_formula, "formula string");
    verify->add_option("--fsa", v_fsa, "stored automaton JSON");
    verify->add_option("--eps", v_eps, "agent-side transition uncertainty");
    verify->add_option("--trials", v_trials, "rollouts per initial state");
    verify->add_option("--seed", v_seed, "master seed");
    verify->add_option("--horizon", v_horizon, "episode length (with --fsa)");
    verify->add_option("--out", v_out, "output CSV (default stdout)");
    verify->callback([&] {
        CaseContext ctx = build_context(make_cfg(v_grid, v_formula, v_fsa, v_eps, v_horizon));
        BoundTable closed = closed_form_table(ctx.pm, ctx.dist, ctx.horizon, v_eps, ctx.jumps);
        BoundTable recursive = recursive_lb(ctx.pm, ctx.dist, ctx.pi, ctx.horizon, v_eps);
        std::string csv = validation_csv(ctx, &closed, &recursive, v_trials, v_seed,
                                         {ctx.horizon / 4, ctx.horizon / 2, ctx.horizon});
        if (v_out.empty())
            std::cout << csv;
        else {
            write_file(v_out, csv);
            std::cout << "wrote " << v_out << "\n";
        }
    });

    // ── train ────────────────────────────────────────────────────────────────
    auto* tr = app.add_subcommand("train", "switching-based learning runs");
    ExperimentConfig tcfg;
    bool t_force = false, t_count_rl = false, t_gnuplot = false;
    tr->add_option("--config", tcfg.grid_path, "grid JSON")->required();
    tr->add_option("--formula", tcfg.formula, "formula string");
    tr->add_option("--fsa", tcfg.fsa_path, "stored automaton JSON");
    tr->add_option("--horizon", tcfg.horizon, "episode length (with --fsa)");
    tr->add_option("--prdes", tcfg.pr_des, "desired satisfaction probability");
    tr->add_option("--eps", tcfg.epsilon_agent, "agent-side transition uncertainty");
    tr->add_option("--episodes", tcfg.episodes, "episodes per run");
    tr->add_option("--runs", tcfg.runs, "independent runs");
    tr->add_option("--seed", tcfg.seed, "master seed");
    tr->add_option("--nsample", tcfg.n_sample, "episodes before the switch rule engages");
    tr->add_option("--z", tcfg.z, "Wilson z score");
    tr->add_option("--window", tcfg.window, "moving-average window for summary.csv");
    tr->add_option("--alpha", tcfg.alpha, "learning rate");
    tr->add_option("--gamma", tcfg.gamma, "discount factor");
    tr->add_option("--method", tcfg.bound_method, "certification bound: closed | recursive");
    tr->add_option("--out", tcfg.outdir, "output directory")->required();
    tr->add_flag("--force", t_force, "run even if certification fails");
    tr->add_flag("--count-rl-episodes", t_count_rl,
                 "update switch statistics on RL episodes too (literal rule)");
    tr->add_flag("--gnuplot", t_gnuplot, "emit plot scripts");
    tr->callback([&] {
        CaseContext ctx = build_context(tcfg);
        BoundTable cert =
            tcfg.bound_method == "closed"
                ? closed_form_table(ctx.pm, ctx.dist, ctx.horizon, tcfg.epsilon_agent, ctx.jumps)
                : recursive_lb(ctx.pm, ctx.dist, ctx.pi, ctx.horizon, tcfg.epsilon_agent);
        std::vector<std::vector<EpisodeRecord>> all;
        for (int r = 0; r < tcfg.runs; ++r) {
            TrainConfig tc;
            tc.episodes = tcfg.episodes;
            tc.horizon = ctx.horizon;
            tc.pr_des = tcfg.pr_des;
            tc.z = tcfg.z;
            tc.n_sample = tcfg.n_sample;
            tc.alpha = tcfg.alpha;
            tc.gamma = tcfg.gamma;
            tc.explore_init = tcfg.explore_init;
            tc.explore_final = tcfg.explore_final;
            tc.seed = derive_seed(tcfg.seed, r);
            tc.start_state = ctx.grid.start_state;
            tc.force = t_force;
            tc.count_rl_episodes = t_count_rl;
            TrainResult res = train(ctx.grid.mdp, ctx.pm, ctx.pi, cert, tc);
            std::string tag = "run" + std::to_string(r);
            write_file(tcfg.outdir + "/episodes_" + tag + ".csv",
                       episodes_csv(ctx, res.episodes));
            write_file(tcfg.outdir + "/qtable_" + tag + ".json", qtable_json(res.q).dump(1));
            write_file(tcfg.outdir + "/stats_" + tag + ".json",
                       switch_stats_json(res.stats, ctx).dump(1));
            all.push_back(res.episodes);
        }
        write_file(tcfg.outdir + "/summary.csv", summary_csv(all, tcfg.window));
        if (t_gnuplot) write_file(tcfg.outdir + "/plots.gp", training_plot_script("summary.csv"));
        std::cout << "wrote " << tcfg.outdir << "\n";
    });

    // ── case ─────────────────────────────────────────────────────────────────
    auto* case_cmd = app.add_subcommand("case", "run a bundled experiment config");
    std::string c_config;
    bool c_gnuplot = false;
    case_cmd->add_option("--config", c_config, "experiment JSON")->required();
    case_cmd->add_flag("--gnuplot", c_gnuplot, "emit plot scripts");
    case_cmd->callback([&] {
        ExperimentConfig cfg = load_experiment_config(c_config);
        cfg.emit_gnuplot = c_gnuplot;
        run_case(cfg);
        std::cout << "wrote " << cfg.outdir << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
