#include "tlswitch/switching.hpp"

#include <algorithm>
#include <cmath>

namespace tlswitch {

WilsonBounds wilson_bounds(long long n_s, long long n_f, double z) {
    if (n_s < 0 || n_f < 0) throw TrainError("negative outcome counts");
    if (z <= 0.0) throw TrainError("z score must be positive");
    const long long n = n_s + n_f;
    if (n == 0) return {0.0, 1.0};
    const double nd = static_cast<double>(n);
    const double z2 = z * z;
    const double center = (static_cast<double>(n_s) + 0.5 * z2) / (nd + z2);
    const double half = z / (nd + z2) *
                        std::sqrt(static_cast<double>(n_s) * static_cast<double>(n_f) / nd +
                                  0.25 * z2);
    return {center - half, center + half};
}

void SwitchStats::update(int p, bool success) {
    SwitchEntry& e = entries[p];
    e.n += 1;
    (success ? e.n_success : e.n_failure) += 1;
    WilsonBounds wb = wilson_bounds(e.n_success, e.n_failure, z);
    e.pr_low = wb.low;
    e.pr_up = wb.up;
    if (e.n < n_sample || e.pr_low <= 0.0)
        e.pr_switch = 1.0;
    else
        e.pr_switch = std::min(1.0, pr_des / e.pr_low);
}

double QTable::max_value(int s) const {
    double best = at(s, 0);
    for (int a = 1; a < n_actions; ++a)
        best = std::max(best, at(s, a));
    return best;
}

int QTable::greedy_action(int s) const {
    int best = 0;
    for (int a = 1; a < n_actions; ++a)
        if (at(s, a) > at(s, best)) best = a;
    return best;
}

void q_update(QTable& table, int s, int a, double r, int s_next) {
    double& q = table.at(s, a);
    q = (1.0 - table.alpha) * q + table.alpha * (r + table.gamma * table.max_value(s_next));
}

double explore_rate(const TrainConfig& cfg, int episode) {
    if (cfg.episodes <= 1) return cfg.explore_final;
    double f = static_cast<double>(episode) / static_cast<double>(cfg.episodes - 1);
    return cfg.explore_init + (cfg.explore_final - cfg.explore_init) * f;
}

TrainResult train(const LabeledMdp& env, const ProductMdp& pm, const GoPolicy& pi,
                  const BoundTable& certification, const TrainConfig& cfg) {
    if (cfg.horizon <= 0) throw TrainError("horizon must be positive");
    if (cfg.pr_des <= 0.0 || cfg.pr_des > 1.0) throw TrainError("pr_des must lie in (0,1]");

    if (!cfg.force) {
        if (!certification.available)
            throw TrainError("certification bound table unavailable; rerun with the "
                             "recursive method or force");
        std::string failing;
        for (int p0 : pm.init_states)
            if (certification.at(cfg.horizon, p0) < cfg.pr_des)
                failing += "\n  state " + std::to_string(p0) + ": lb(" +
                           std::to_string(cfg.horizon) + ") = " +
                           std::to_string(certification.at(cfg.horizon, p0));
        if (!failing.empty())
            throw TrainError("certification failed: lower bound below pr_des=" +
                             std::to_string(cfg.pr_des) + " at initial states:" + failing);
    }

    TrainResult result;
    result.q = QTable(env.num_states, env.num_actions, cfg.alpha, cfg.gamma);
    result.stats = SwitchStats(pm.num_states(), cfg.pr_des, cfg.z, cfg.n_sample);
    result.episodes.reserve(cfg.episodes);

    SplitMix64 rng(cfg.seed);

    int s = cfg.start_state;
    for (int j = 0; j < cfg.episodes; ++j) {
        const int p0 = pm.episode_start(s);
        const SwitchEntry& entry = result.stats.entry(p0);
        // under-sampled states stay on the go policy without spending a draw
        const EpisodeMode mode =
            (entry.n < cfg.n_sample || rng.next_double() < entry.pr_switch) ? EpisodeMode::Go
                                                                            : EpisodeMode::Rl;
        const double explore = explore_rate(cfg, j);

        EpisodeRecord rec;
        rec.episode = j;
        rec.initial_state = p0;
        rec.mode = mode;
        rec.satisfied = pm.accepting[p0] != 0;
        rec.steps_to_acceptance = rec.satisfied ? 0 : -1;

        int p = p0;
        for (int t = 0; t < cfg.horizon; ++t) {
            int a;
            bool learning = rec.satisfied || mode == EpisodeMode::Rl;
            if (learning)
                a = rng.next_double() < explore ? rng.next_index(env.num_actions)
                                                : result.q.greedy_action(s);
            else
                a = pi.action[p];

            auto [s_next, r] = env.step(s, a, rng);
            if (learning) q_update(result.q, s, a, r, s_next);
            if (!std::isfinite(result.q.at(s, a)))
                throw TrainError("non-finite Q value at episode " + std::to_string(j));

            p = pm.successor(p, s_next);
            s = s_next;
            rec.total_reward += r;
            if (!rec.satisfied && pm.accepting[p]) {
                rec.satisfied = true;
                rec.steps_to_acceptance = t + 1;
            }
        }

        if (mode == EpisodeMode::Go || cfg.count_rl_episodes)
            result.stats.update(p0, rec.satisfied);
        result.episodes.push_back(rec);
    }
    return result;
}

} // namespace tlswitch
