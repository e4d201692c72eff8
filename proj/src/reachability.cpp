#include "tlswitch/reachability.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <thread>

namespace tlswitch {

// ── Distance ─────────────────────────────────────────────────────────────────

DistanceTable distance_to_accepting(const ProductMdp& pm) {
    const int n = pm.num_states();

    // reverse adjacency over likely edges (any action)
    std::vector<std::vector<int>> rev(n);
    for (int p = 0; p < n; ++p)
        for (int a = 0; a < pm.num_actions; ++a)
            for (int t : pm.likely[p][a])
                rev[t].push_back(p);

    DistanceTable dist;
    dist.d.assign(n, DistanceTable::kInfinite);
    std::deque<int> queue;
    for (int p = 0; p < n; ++p)
        if (pm.accepting[p]) {
            dist.d[p] = 0;
            queue.push_back(p);
        }
    while (!queue.empty()) {
        int p = queue.front();
        queue.pop_front();
        for (int from : rev[p])
            if (dist.d[from] == DistanceTable::kInfinite) {
                dist.d[from] = dist.d[p] + 1;
                queue.push_back(from);
            }
    }
    return dist;
}

GoPolicy compute_go_policy(const ProductMdp& pm, const DistanceTable& dist, int idle_action) {
    const int n = pm.num_states();
    GoPolicy pi;
    pi.action.assign(n, idle_action);
    for (int p = 0; p < n; ++p) {
        if (dist.d[p] == 0 || dist.d[p] == DistanceTable::kInfinite) continue;
        int best_action = -1;
        long long best = std::numeric_limits<long long>::max();
        for (int a = 0; a < pm.num_actions; ++a) {
            if (pm.likely[p][a].empty()) continue; // no dominant successor under a
            long long reach = std::numeric_limits<long long>::max();
            for (int t : pm.likely[p][a])
                reach = std::min<long long>(reach, dist.d[t]);
            if (reach < best) { // strict: first minimal action wins
                best = reach;
                best_action = a;
            }
        }
        if (best_action < 0)
            throw ReachabilityError("state " + std::to_string(p) +
                                    " has finite distance but no likely successor");
        pi.action[p] = best_action;
    }
    return pi;
}

DistanceJumpReport compute_max_distance_increase(const ProductMdp& pm, const DistanceTable& dist) {
    DistanceJumpReport report;
    const int n = pm.num_states();
    for (int p = 0; p < n; ++p) {
        if (!dist.finite(p)) continue;
        for (int a = 0; a < pm.num_actions; ++a)
            for (int t : pm.support[p][a]) {
                if (!dist.finite(t))
                    report.infinite_jumps.push_back({p, a, t});
                else
                    report.max_increase = std::max(report.max_increase, dist.d[t] - dist.d[p]);
            }
    }
    return report;
}

// ── Closed-form bound ────────────────────────────────────────────────────────

namespace {

void check_walk_args(int d, int k, double eps, int delta_max) {
    if (d <= 0) throw ReachabilityError("closed-form bound needs 0 < d < infinity");
    if (k < 0) throw ReachabilityError("step budget must be nonnegative");
    if (eps < 0.0 || eps >= 1.0) throw ReachabilityError("eps must lie in [0,1)");
    if (delta_max < 1) throw ReachabilityError("delta_max must be a positive integer");
}

// Precomputed combinatorics for the +1 / -delta_max progress walk. Shared
// across every distance when a whole table is filled.
struct WalkTables {
    int horizon;
    int delta;
    std::vector<double> pow_eps, pow_keep;  // eps^i, (1-eps)^i
    std::vector<std::vector<double>> binom; // Pascal rows 0..horizon
    std::vector<double> zero_return;        // mass of a net-zero stretch of length L

    WalkTables(int horizon_, double eps, int delta_)
        : horizon(horizon_), delta(delta_), pow_eps(horizon_ + 1), pow_keep(horizon_ + 1),
          binom(horizon_ + 1), zero_return(horizon_ + 1, 0.0) {
        pow_eps[0] = pow_keep[0] = 1.0; // eps^0 = 1 also when eps = 0
        for (int i = 1; i <= horizon; ++i) {
            pow_eps[i] = pow_eps[i - 1] * eps;
            pow_keep[i] = pow_keep[i - 1] * (1.0 - eps);
        }
        for (int n = 0; n <= horizon; ++n) {
            binom[n].assign(n + 1, 1.0);
            for (int r = 1; r < n; ++r)
                binom[n][r] = binom[n - 1][r - 1] + binom[n - 1][r];
        }
        for (int len = 1; len <= horizon; ++len)
            zero_return[len] = mass(len, len);
    }

    // P(exactly q regressions among len steps) with q determined by the net
    // progress constraint; zero when the divisibility fails
    double mass(int len, int numerator) const {
        if (numerator < 0 || numerator % (1 + delta) != 0) return 0.0;
        int q = numerator / (1 + delta);
        if (q > len) return 0.0;
        return binom[len][q] * pow_eps[q] * pow_keep[len - q];
    }
};

// first-passage mass per step count, m = 1..k
std::vector<double> first_passage_terms(int d, int k, const WalkTables& wt) {
    std::vector<double> pt(k + 1, 0.0);
    for (int m = 1; m <= k; ++m) {
        double v = wt.mass(m, m - d);
        const double* z = wt.zero_return.data();
        for (int mp = 1; mp < m; ++mp)
            v -= z[m - mp] * pt[mp];
        pt[m] = v;
    }
    return pt;
}

} // namespace

double closed_form_lb(int d, int k, double eps, int delta_max) {
    check_walk_args(d, k, eps, delta_max);
    WalkTables wt(k, eps, delta_max);
    std::vector<double> pt = first_passage_terms(d, k, wt);
    double lb = std::accumulate(pt.begin(), pt.end(), 0.0);
    if (lb < -1e-9 || lb > 1.0 + 1e-9)
        throw ReachabilityError("closed-form bound escaped [0,1]: " + std::to_string(lb));
    return std::clamp(lb, 0.0, 1.0);
}

double walk_hit_probability(int d, int k, double eps, int delta_max) {
    check_walk_args(d, k, eps, delta_max);
    // progress in [-k*delta_max, d-1], absorbing at d
    const int offset = k * delta_max;
    std::vector<double> cur(offset + d, 0.0), next(offset + d, 0.0);
    cur[offset] = 1.0;
    double absorbed = 0.0;
    for (int step = 0; step < k; ++step) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int i = 0; i < static_cast<int>(cur.size()); ++i) {
            double mass = cur[i];
            if (mass == 0.0) continue;
            int x = i - offset;
            if (x + 1 == d)
                absorbed += mass * (1.0 - eps);
            else
                next[i + 1] += mass * (1.0 - eps);
            if (eps > 0.0 && i - delta_max >= 0)
                next[i - delta_max] += mass * eps;
        }
        cur.swap(next);
    }
    return absorbed;
}

// ── Worst-case linear program ────────────────────────────────────────────────

double solve_worst_case_lp(const std::vector<double>& likely_values,
                           const std::vector<double>& other_values, double eps) {
    const std::size_t m = likely_values.size();
    if (m + other_values.size() == 0)
        throw ReachabilityError("worst-case LP needs at least one successor");
    const double floor_mass = 1.0 - eps;
    if (static_cast<double>(m) * floor_mass > 1.0 + 1e-12)
        throw ReachabilityError("infeasible successor box: " + std::to_string(m) +
                                " likely successors with eps=" + std::to_string(eps));

    double value = 0.0;
    double residual = 1.0 - static_cast<double>(m) * floor_mass;

    // (child value, spare capacity above its floor)
    std::vector<std::pair<double, double>> spare;
    spare.reserve(m + other_values.size());
    for (double v : likely_values) {
        value += v * floor_mass;
        spare.push_back({v, eps});
    }
    for (double v : other_values)
        spare.push_back({v, 1.0});
    std::sort(spare.begin(), spare.end());

    // pour the unpinned mass onto the cheapest children first
    for (const auto& [v, cap] : spare) {
        if (residual <= 0.0) break;
        double take = std::min(residual, cap);
        value += take * v;
        residual -= take;
    }
    return value;
}

// ── Bound tables ─────────────────────────────────────────────────────────────

BoundTable closed_form_table(const ProductMdp& pm, const DistanceTable& dist, int horizon,
                             double eps, const DistanceJumpReport& jumps) {
    BoundTable bt;
    bt.kind = BoundTable::Kind::Closed;
    bt.horizon = horizon;
    bt.eps = eps;
    bt.delta_max = std::max(1, jumps.max_increase);
    bt.n = pm.num_states();
    bt.available = jumps.closed_form_applicable();
    if (!bt.available) return bt;

    // distance values repeat across states: compute each row of partial sums once
    WalkTables wt(horizon, eps, bt.delta_max);
    std::vector<std::vector<double>> row_for_d; // indexed by d, rows over k
    auto row = [&](int d) -> const std::vector<double>& {
        if (static_cast<int>(row_for_d.size()) <= d) row_for_d.resize(d + 1);
        auto& r = row_for_d[d];
        if (r.empty()) {
            std::vector<double> pt = first_passage_terms(d, horizon, wt);
            r.assign(horizon + 1, 0.0);
            double acc = 0.0;
            for (int k = 1; k <= horizon; ++k) {
                acc += pt[k];
                r[k] = std::clamp(acc, 0.0, 1.0);
            }
        }
        return r;
    };

    bt.lb.assign(static_cast<std::size_t>(horizon + 1) * bt.n, 0.0);
    std::vector<const double*> state_row(bt.n, nullptr);
    for (int p = 0; p < bt.n; ++p)
        if (!pm.accepting[p] && dist.finite(p)) state_row[p] = row(dist.d[p]).data();
    for (int k = 0; k <= horizon; ++k) {
        double* layer = &bt.lb[static_cast<std::size_t>(k) * bt.n];
        for (int p = 0; p < bt.n; ++p)
            layer[p] = pm.accepting[p] ? 1.0 : (state_row[p] && k > 0 ? state_row[p][k] : 0.0);
    }
    return bt;
}

BoundTable recursive_lb(const ProductMdp& pm, const DistanceTable& dist, const GoPolicy& pi,
                        int horizon, double eps) {
    const int n = pm.num_states();
    BoundTable bt;
    bt.kind = BoundTable::Kind::Recursive;
    bt.horizon = horizon;
    bt.eps = eps;
    bt.n = n;
    bt.lb.assign(static_cast<std::size_t>(horizon + 1) * n, 0.0);

    // successor structure under the go policy, fixed across budgets
    struct Children {
        std::vector<int> likely;
        std::vector<int> other;
    };
    std::vector<Children> kids(n);
    for (int p = 0; p < n; ++p) {
        if (pm.accepting[p] || !dist.finite(p)) continue;
        int a = pi.action[p];
        const auto& like = pm.likely[p][a];
        const auto& supp = pm.support[p][a];
        kids[p].likely = like;
        std::set_difference(supp.begin(), supp.end(), like.begin(), like.end(),
                            std::back_inserter(kids[p].other));
        if (static_cast<double>(like.size()) * (1.0 - eps) > 1.0 + 1e-12)
            throw ReachabilityError(
                "infeasible successor box at product state " + std::to_string(p) + ", action " +
                pm.action_names[a] + ": " + std::to_string(like.size()) +
                " likely successors with eps=" + std::to_string(eps));
    }

    for (int p = 0; p < n; ++p)
        if (pm.accepting[p]) bt.lb[p] = 1.0;

    std::vector<double> lv, ov;
    for (int k = 1; k <= horizon; ++k) {
        const double* prev = &bt.lb[static_cast<std::size_t>(k - 1) * n];
        double* curr = &bt.lb[static_cast<std::size_t>(k) * n];
        for (int p = 0; p < n; ++p) {
            if (pm.accepting[p]) {
                curr[p] = 1.0;
                continue;
            }
            if (!dist.finite(p) || dist.d[p] > k) {
                curr[p] = 0.0;
                continue;
            }
            lv.clear();
            ov.clear();
            for (int t : kids[p].likely) lv.push_back(prev[t]);
            for (int t : kids[p].other) ov.push_back(prev[t]);
            curr[p] = solve_worst_case_lp(lv, ov, eps);
        }
    }
    return bt;
}

// ── Monte-Carlo ground truth ─────────────────────────────────────────────────

GoRollout::GoRollout(const LabeledMdp& sim, const ProductMdp& pm, const GoPolicy& pi) : pm_(&pm) {
    const int n = pm.num_states();
    cdf_.resize(n);
    for (int p = 0; p < n; ++p) {
        if (pm.accepting[p]) continue;
        const auto& d = sim.trans[pm.mdp_of(p)][pi.action[p]];
        double cum = 0.0;
        cdf_[p].reserve(d.size());
        for (const auto& [t, prob] : d) {
            cum += prob;
            cdf_[p].push_back({cum, pm.successor(p, t)});
        }
    }
}

int GoRollout::first_hit(int p0, int horizon, SplitMix64& rng) const {
    if (pm_->accepting[p0]) return 0;
    int p = p0;
    for (int t = 1; t <= horizon; ++t) {
        const auto& cdf = cdf_[p];
        double u = rng.next_double();
        int next = cdf.back().second;
        for (const auto& [cum, target] : cdf)
            if (u < cum) {
                next = target;
                break;
            }
        p = next;
        if (pm_->accepting[p]) return t;
    }
    return horizon + 1;
}

std::vector<long long> GoRollout::first_hit_counts(int p0, int horizon, long long trials,
                                                   std::uint64_t seed, int threads) const {
    std::vector<long long> hist(horizon + 2, 0);
    auto run_block = [&](long long lo, long long hi, std::vector<long long>& out) {
        for (long long i = lo; i < hi; ++i) {
            SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
            ++out[first_hit(p0, horizon, rng)];
        }
    };
    if (threads <= 1) {
        run_block(0, trials, hist);
    } else {
        std::vector<std::vector<long long>> parts(threads,
                                                  std::vector<long long>(horizon + 2, 0));
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) {
            long long lo = trials * w / threads, hi = trials * (w + 1) / threads;
            pool.emplace_back(run_block, lo, hi, std::ref(parts[w]));
        }
        for (auto& th : pool) th.join();
        for (const auto& part : parts)
            for (std::size_t i = 0; i < part.size(); ++i)
                hist[i] += part[i];
    }
    // prefix: hits within k steps
    std::vector<long long> counts(horizon + 1, 0);
    long long acc = 0;
    for (int k = 0; k <= horizon; ++k) {
        acc += hist[k];
        counts[k] = acc;
    }
    return counts;
}

McEstimate GoRollout::satisfaction(int p0, int horizon, long long trials, std::uint64_t seed,
                                   int threads) const {
    auto counts = first_hit_counts(p0, horizon, trials, seed, threads);
    McEstimate est;
    est.trials = trials;
    est.estimate = static_cast<double>(counts[horizon]) / static_cast<double>(trials);
    est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(trials));
    return est;
}

McEstimate mc_satisfaction(const LabeledMdp& sim, const ProductMdp& pm, const GoPolicy& pi,
                           int p0, int horizon, long long trials, std::uint64_t seed) {
    if (trials < 1) throw ReachabilityError("mc_satisfaction needs at least one trial");
    return GoRollout(sim, pm, pi).satisfaction(p0, horizon, trials, seed);
}

} // namespace tlswitch
