#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlswitch/model.hpp"
#include "tlswitch/product.hpp"
#include "tlswitch/reachability.hpp"
#include "tlswitch/rng.hpp"

namespace tlswitch {

class TrainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ── Wilson score interval ────────────────────────────────────────────────────
// two-sided score interval for a Bernoulli proportion with n_s successes and
// n_f failures; n = 0 returns (0, 1).
struct WilsonBounds {
    double low = 0.0;
    double up = 1.0;
};

WilsonBounds wilson_bounds(long long n_s, long long n_f, double z);

// ── Per-initial-state switching statistics ───────────────────────────────────
// Counts episodes that started at p and followed the go policy, their
// outcomes, and the derived switch probability
// min(1, pr_des / pr_low), guarded to 1 while the estimate is unusable.

struct SwitchEntry {
    long long n = 0;
    long long n_success = 0;
    long long n_failure = 0;
    double pr_low = 0.0;
    double pr_up = 1.0;
    double pr_switch = 1.0;
};

struct SwitchStats {
    double pr_des = 0.7;
    double z = 2.58;
    long long n_sample = 30;
    std::vector<SwitchEntry> entries; // indexed by product state id

    explicit SwitchStats(int num_product_states = 0, double pr_des_ = 0.7, double z_ = 2.58,
                         long long n_sample_ = 30)
        : pr_des(pr_des_), z(z_), n_sample(n_sample_), entries(num_product_states) {}

    const SwitchEntry& entry(int p) const { return entries[p]; }
    void update(int p, bool success);
};

// ── Tabular Q ────────────────────────────────────────────────────────────────

struct QTable {
    int n_states = 0;
    int n_actions = 0;
    double alpha = 0.1;
    double gamma = 0.95;
    std::vector<double> q; // row-major (state, action)

    QTable() = default;
    QTable(int states, int actions, double alpha_ = 0.1, double gamma_ = 0.95)
        : n_states(states), n_actions(actions), alpha(alpha_), gamma(gamma_),
          q(static_cast<std::size_t>(states) * actions, 0.0) {}

    double& at(int s, int a) { return q[static_cast<std::size_t>(s) * n_actions + a]; }
    double at(int s, int a) const { return q[static_cast<std::size_t>(s) * n_actions + a]; }
    double max_value(int s) const;
    int greedy_action(int s) const; // ties to the first action in the fixed order
};

void q_update(QTable& table, int s, int a, double r, int s_next);

// ── Switching-based training loop ────────────────────────────────────────────

enum class EpisodeMode { Go, Rl };

struct EpisodeRecord {
    int episode = 0;
    int initial_state = 0; // product id
    EpisodeMode mode = EpisodeMode::Go;
    bool satisfied = false;
    double total_reward = 0.0;
    int steps_to_acceptance = -1; // -1 when never accepted
};

struct TrainConfig {
    int episodes = 1000;
    int horizon = 0;         // steps per episode (the formula's time bound)
    double pr_des = 0.7;
    double z = 2.58;
    long long n_sample = 30;
    double alpha = 0.1;
    double gamma = 0.95;
    double explore_init = 0.7;    // epsilon-greedy schedule over episodes
    double explore_final = 0.0001;
    std::uint64_t seed = 0;
    int start_state = 0;          // MDP state the first episode starts from
    bool count_rl_episodes = false; // literal reading of the episode-count update
    bool force = false;           // skip the certification gate
};

struct TrainResult {
    QTable q;
    SwitchStats stats;
    std::vector<EpisodeRecord> episodes;
};

// Exploration rate for episode j: linear interpolation between explore_init
// and explore_final across the configured episode count.
double explore_rate(const TrainConfig& cfg, int episode);

// Refuses to run (unless cfg.force) when any initial product state has
// certification.at(horizon, p0) < pr_des; the error lists every failing
// state. The MDP state persists across episodes; the automaton is reset and
// consumes the current state's label to form each episode's initial product
// state. Episodes in Go mode follow the go policy until acceptance and run
// Q-learning for the remaining steps; Rl episodes run Q-learning throughout.
// Only Go episodes update the switch statistics unless count_rl_episodes.
TrainResult train(const LabeledMdp& env, const ProductMdp& pm, const GoPolicy& pi,
                  const BoundTable& certification, const TrainConfig& cfg);

} // namespace tlswitch
