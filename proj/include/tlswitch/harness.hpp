#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tlswitch/fsa.hpp"
#include "tlswitch/model.hpp"
#include "tlswitch/product.hpp"
#include "tlswitch/reachability.hpp"
#include "tlswitch/switching.hpp"

namespace tlswitch {

// ── Experiment configuration ─────────────────────────────────────────────────

struct ReportState {
    std::pair<int, int> cell;
    std::string fsa_state; // empty = all automaton states for the cell
};

struct ExperimentConfig {
    std::string kind = "train"; // train | table | bench
    std::string grid_path;
    std::string formula;  // either a formula ...
    std::string fsa_path; // ... or a stored automaton
    int horizon = 0;      // 0 = derive from the formula's time bound
    double pr_des = 0.7;
    double epsilon_agent = 0.1;
    double z = 2.58;
    int episodes = 1000;
    long long n_sample = 30;
    int runs = 10;
    std::uint64_t seed = 0;
    std::string bound_method = "recursive"; // closed | recursive | both
    std::string outdir = "out";
    int window = 50;
    long long mc_trials = 20000;
    double alpha = 0.1;
    double gamma = 0.95;
    double explore_init = 0.7;
    double explore_final = 0.0001;
    std::vector<ReportState> report_states;
    int report_k = -1; // -1 = horizon
    std::vector<std::string> sweep; // bench formulas
    bool emit_gnuplot = false;
};

// Paths inside the document resolve relative to the config file's directory.
ExperimentConfig load_experiment_config(const std::string& path);

// ── Assembled case ───────────────────────────────────────────────────────────

struct CaseContext {
    GridModel grid;
    Fsa fsa;
    ProductMdp pm;
    DistanceTable dist;
    GoPolicy pi;
    DistanceJumpReport jumps;
    int horizon = 0;
};

// Builds environment, automaton (alphabet extended to the grid's labels),
// product, distances and go policy from a config.
CaseContext build_context(const ExperimentConfig& cfg);
CaseContext build_context(const GridModel& grid, const Fsa& fsa, int horizon);

// ── Reports ──────────────────────────────────────────────────────────────────

// Runs one bundled case end to end and writes its artifacts plus a MANIFEST
// into cfg.outdir. On error the MANIFEST records the failing stage and the
// exception propagates.
void run_case(const ExperimentConfig& cfg);

struct BenchRow {
    std::string formula;
    int horizon = 0;
    long long pk_pairs = 0; // product states x horizon
    double closed_seconds = 0.0;
    double recursive_seconds = 0.0;
};

// Times both bound computations per sweep formula on the given grid.
std::vector<BenchRow> bench_bounds(const GridModel& grid, const std::vector<std::string>& formulas,
                                   double eps);
std::string bench_csv(const std::vector<BenchRow>& rows);

// bounds table rows: method,k,state_cell,fsa_state,lb
std::string bounds_csv(const CaseContext& ctx, const std::vector<const BoundTable*>& tables,
                       const std::vector<ReportState>& selection, int k_filter);

// per-initial-state Monte-Carlo validation against both bound tables
std::string validation_csv(const CaseContext& ctx, const BoundTable* closed,
                           const BoundTable* recursive, long long trials, std::uint64_t seed,
                           const std::vector<int>& budgets);

// pooled training curves: per episode, min/mean/max over runs of the
// window-averaged reward and satisfaction rate
std::string summary_csv(const std::vector<std::vector<EpisodeRecord>>& runs, int window);

std::string episodes_csv(const CaseContext& ctx, const std::vector<EpisodeRecord>& episodes);

nlohmann::json qtable_json(const QTable& q);
nlohmann::json switch_stats_json(const SwitchStats& stats, const CaseContext& ctx);

// gnuplot script rendering the pooled curves of a summary.csv
std::string training_plot_script(const std::string& summary_file);

// ── Small utilities ──────────────────────────────────────────────────────────

std::uint64_t fnv1a64(const std::string& data);
void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Wall-clock seconds of fn(), minimum over enough repetitions to defeat
// timer noise.
double time_seconds(const std::function<void()>& fn);

} // namespace tlswitch
