#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tlswitch/rng.hpp"

namespace tlswitch {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ── Labeled MDP ──────────────────────────────────────────────────────────────
// True simulator dynamics. Rewards live on states; the reward of a step is
// the reward of the state being entered.

struct LabeledMdp {
    int num_states = 0;
    int num_actions = 0;
    std::vector<std::string> action_names;
    std::vector<std::string> ap;                   // proposition names, index = label bit
    std::vector<std::uint64_t> label;              // per state
    std::vector<double> reward;                    // per state
    // sparse distribution per (state, action)
    std::vector<std::vector<std::vector<std::pair<int, double>>>> trans;

    const std::vector<std::pair<int, double>>& dist(int s, int a) const { return trans[s][a]; }

    // Samples the successor of (s, a) and returns (s', R(s')).
    std::pair<int, double> step(int s, int a, SplitMix64& rng) const;

    // Checks that every distribution sums to 1 within 1e-12 and that labels
    // stay inside the declared alphabet. Throws ModelError otherwise.
    void validate() const;
};

// ── Agent-side knowledge ─────────────────────────────────────────────────────
// What the learner is allowed to see: per (s, a), the support set and the
// successors with probability at least 1 - epsilon. True probabilities stay
// in the simulator.

struct KnowledgeModel {
    double epsilon = 0.1;
    std::vector<std::vector<std::vector<int>>> support; // [s][a]
    std::vector<std::vector<std::vector<int>>> likely;  // [s][a]
};

KnowledgeModel make_knowledge(const LabeledMdp& mdp, double epsilon);

// ── Grid world (8-connected moves + Stay) ───────────────────────────────────

struct GridConfig {
    int width = 8;
    int height = 8;
    std::vector<std::pair<int, int>> obstacles;
    // proposition -> labeled cells
    std::vector<std::pair<std::string, std::vector<std::pair<int, int>>>> labels;
    std::vector<std::pair<std::pair<int, int>, double>> rewards;
    double intended_prob = 0.9;
    double epsilon_agent = 0.1;
    std::pair<int, int> start{0, 0};
};

struct GridModel {
    GridConfig cfg;
    LabeledMdp mdp;
    KnowledgeModel knowledge;
    std::vector<int> cell_state;                 // width*height, -1 for obstacles
    std::vector<std::pair<int, int>> state_cell; // inverse
    int start_state = 0;

    int state_at(int x, int y) const { return cell_state[y * cfg.width + x]; }
};

// Action order is fixed: N, NE, E, SE, S, SW, W, NW, Stay. Each movement
// action reaches the intended neighbor with cfg.intended_prob and the two
// 45-degree flanking neighbors with the remaining mass split evenly; any
// component that would leave the grid or enter an obstacle moves its mass to
// the current cell. Stay is deterministic.
GridModel build_gridworld(const GridConfig& cfg);

inline constexpr int kGridStayAction = 8;

GridConfig load_grid_config(const nlohmann::json& doc);
nlohmann::json save_grid_config(const GridConfig& cfg);

// ASCII rendering for `env show`: obstacles '#', labels by first letter,
// reward cells '+' and '*'.
std::string ascii_map(const GridModel& grid);

} // namespace tlswitch
