#include "tlswitch/product.hpp"

#include <algorithm>
#include <deque>

namespace tlswitch {

ProductMdp build_product(const KnowledgeModel& km, const LabeledMdp& mdp, const Fsa& fsa) {
    ProductMdp pm;
    pm.n_mdp = mdp.num_states;
    pm.n_fsa = fsa.num_states();
    pm.fsa_initial = fsa.initial;
    pm.num_actions = mdp.num_actions;
    pm.action_names = mdp.action_names;

    // translate MDP label masks into the automaton's bit space
    std::vector<int> ap_map(mdp.ap.size());
    for (std::size_t i = 0; i < mdp.ap.size(); ++i) {
        ap_map[i] = fsa.find_ap(mdp.ap[i]);
        if (ap_map[i] < 0)
            throw FsaError("unknown proposition: MDP labels '" + mdp.ap[i] +
                           "' but the automaton's alphabet lacks it");
    }
    std::vector<std::uint64_t> obs(mdp.num_states, 0);
    for (int s = 0; s < mdp.num_states; ++s)
        for (std::size_t i = 0; i < mdp.ap.size(); ++i)
            if (mdp.label[s] & (std::uint64_t{1} << i))
                obs[s] |= (std::uint64_t{1} << ap_map[i]);

    const int n = pm.num_states();
    pm.fsa_step.resize(n);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int q = 0; q < pm.n_fsa; ++q)
            pm.fsa_step[pm.pid(s, q)] = advance(fsa, q, obs[s]);

    pm.accepting.assign(n, 0);
    pm.reward.resize(n);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int q = 0; q < pm.n_fsa; ++q) {
            pm.accepting[pm.pid(s, q)] = fsa.accepting[q];
            pm.reward[pm.pid(s, q)] = mdp.reward[s];
        }

    pm.support.assign(n, std::vector<std::vector<int>>(pm.num_actions));
    pm.likely.assign(n, std::vector<std::vector<int>>(pm.num_actions));
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int q = 0; q < pm.n_fsa; ++q) {
            int p = pm.pid(s, q);
            for (int a = 0; a < pm.num_actions; ++a) {
                for (int t : km.support[s][a])
                    pm.support[p][a].push_back(pm.successor(p, t));
                for (int t : km.likely[s][a])
                    pm.likely[p][a].push_back(pm.successor(p, t));
            }
        }
    }

    for (int s = 0; s < mdp.num_states; ++s)
        pm.init_states.push_back(pm.episode_start(s));
    std::sort(pm.init_states.begin(), pm.init_states.end());
    pm.init_states.erase(std::unique(pm.init_states.begin(), pm.init_states.end()),
                         pm.init_states.end());

    // reachability from the initial set over support edges
    pm.reachable.assign(n, 0);
    std::deque<int> queue;
    for (int p : pm.init_states) {
        pm.reachable[p] = 1;
        queue.push_back(p);
    }
    while (!queue.empty()) {
        int p = queue.front();
        queue.pop_front();
        for (int a = 0; a < pm.num_actions; ++a)
            for (int t : pm.support[p][a])
                if (!pm.reachable[t]) {
                    pm.reachable[t] = 1;
                    queue.push_back(t);
                }
    }

    std::vector<char> fsa_seen(pm.n_fsa, 0);
    for (int p = 0; p < n; ++p)
        if (pm.reachable[p]) fsa_seen[pm.fsa_of(p)] = 1;
    for (int q = 0; q < pm.n_fsa; ++q)
        if (!fsa_seen[q])
            pm.warnings.push_back("automaton state " + fsa.state_names[q] +
                                  " is unreachable in the product");
    return pm;
}

} // namespace tlswitch
