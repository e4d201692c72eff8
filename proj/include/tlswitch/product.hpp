#pragma once

#include <string>
#include <vector>

#include "tlswitch/fsa.hpp"
#include "tlswitch/model.hpp"

namespace tlswitch {

// ── Product MDP ──────────────────────────────────────────────────────────────
//
// Synchronous composition of the agent's knowledge of the MDP with the
// constraint automaton. States are stored densely, row-major over
// (mdp state, fsa state). Only support/likely structure is lifted; true
// transition probabilities stay in the simulator.
//
// Convention: taking a step into MDP state s' advances the automaton on
// l(s'), and an episode's initial product state consumes the label of the
// start state. The literal alternative (advancing on the label of the state
// being left) can be selected at build time with -DTLSWITCH_ADVANCE_ON_CURRENT_LABEL;
// it is isolated in build_product/product_successor.

struct ProductMdp {
    int n_mdp = 0;
    int n_fsa = 0;
    int fsa_initial = 0;
    int num_actions = 0;
    std::vector<std::string> action_names;

    std::vector<std::vector<std::vector<int>>> support; // [pid][a] -> product ids
    std::vector<std::vector<std::vector<int>>> likely;  // [pid][a]
    std::vector<char> accepting;                        // F_P membership per pid
    std::vector<double> reward;                         // R_P(pid) = R(mdp state)
    std::vector<int> init_states;                       // one per mdp state, deduplicated
    std::vector<int> fsa_step;                          // [s * n_fsa + q] = advance(q, l(s))
    std::vector<char> reachable;                        // from init_states over support
    std::vector<std::string> warnings;                  // unreachable fsa states etc.

    int num_states() const { return n_mdp * n_fsa; }
    int pid(int s, int q) const { return s * n_fsa + q; }
    int mdp_of(int p) const { return p / n_fsa; }
    int fsa_of(int p) const { return p % n_fsa; }

    // product state reached from p when the MDP moves to s_next
    int successor(int p, int s_next) const {
#ifdef TLSWITCH_ADVANCE_ON_CURRENT_LABEL
        return pid(s_next, fsa_step[pid(mdp_of(p), fsa_of(p))]);
#else
        return pid(s_next, fsa_step[pid(s_next, fsa_of(p))]);
#endif
    }

    // product state starting an episode at MDP state s with the automaton reset
    int episode_start(int s) const { return pid(s, fsa_step[pid(s, fsa_initial)]); }
};

// Requires every MDP label proposition to be in the automaton's alphabet
// (throws FsaError with the offending name otherwise). Use Fsa::extend_ap to
// align alphabets first when the environment labels more than the formula
// mentions.
ProductMdp build_product(const KnowledgeModel& km, const LabeledMdp& mdp, const Fsa& fsa);

} // namespace tlswitch
