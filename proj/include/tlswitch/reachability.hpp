#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlswitch/model.hpp"
#include "tlswitch/product.hpp"

namespace tlswitch {

class ReachabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ── Distance to the accepting set ────────────────────────────────────────────
// Minimum number of likely (probability >= 1-epsilon) transitions from each
// product state to an accepting state; kInfinite where no such path exists.

struct DistanceTable {
    static constexpr int kInfinite = std::numeric_limits<int>::max();
    std::vector<int> d;

    bool finite(int p) const { return d[p] != kInfinite; }
};

DistanceTable distance_to_accepting(const ProductMdp& pm);

// ── Go policy ────────────────────────────────────────────────────────────────
// Stationary policy minimizing, per state, the best reachable distance among
// likely successors. Ties break to the first action in the fixed ordering;
// accepting and unreachable states take idle_action.

struct GoPolicy {
    std::vector<int> action;
};

GoPolicy compute_go_policy(const ProductMdp& pm, const DistanceTable& dist, int idle_action);

// ── Worst-case distance increase ─────────────────────────────────────────────
// Largest increase of the distance along any support transition, plus the
// transitions that jump from finite distance to infinity (each one breaks the
// premise of the closed-form bound).

struct DistanceJumpReport {
    int max_increase = 0;                              // over finite->finite transitions
    struct Jump {
        int from, action, to;
    };
    std::vector<Jump> infinite_jumps;                  // finite -> infinite

    bool closed_form_applicable() const { return infinite_jumps.empty(); }
};

DistanceJumpReport compute_max_distance_increase(const ProductMdp& pm, const DistanceTable& dist);

// ── Closed-form lower bound ──────────────────────────────────────────────────
// Probability lower bound for reaching the accepting set within k steps from
// a state at distance d, under the worst-case model where each step makes
// progress 1 with probability 1-eps and regresses by delta_max with
// probability eps. Requires 0 < d, k >= 0, eps in [0,1), delta_max >= 1.
//
// C(m, 0) is taken to be 1: the no-regression term must contribute
// (1-eps)^d or the bound would vanish as eps -> 0.
double closed_form_lb(int d, int k, double eps, int delta_max);

// Exact first-passage probability of the same +1 / -delta_max walk, computed
// by dynamic programming over (step, progress). Independent route used to
// cross-check closed_form_lb.
double walk_hit_probability(int d, int k, double eps, int delta_max);

// ── Worst-case one-step linear program ───────────────────────────────────────
// Minimizes sum(value_i * p_i) subject to sum(p_i) = 1, p in [1-eps, 1] for
// likely children and [0, 1] for the others (the open constraint p > 0 is
// relaxed to its closure; the infimum is still a valid lower bound).
// Infeasible when likely_values.size() * (1-eps) > 1.
double solve_worst_case_lp(const std::vector<double>& likely_values,
                           const std::vector<double>& other_values, double eps);

// ── Bound tables ─────────────────────────────────────────────────────────────

struct BoundTable {
    enum class Kind { Closed, Recursive };
    Kind kind = Kind::Recursive;
    int horizon = 0;
    double eps = 0.0;
    int delta_max = 1;          // closed-form tables only
    bool available = true;      // false when infinite jumps rule the closed form out
    int n = 0;
    std::vector<double> lb;     // (horizon+1) x n, row k first

    double at(int k, int p) const { return lb[static_cast<std::size_t>(k) * n + p]; }
};

// Lifts closed_form_lb to a per-state table using the measured worst-case
// distance increase (floored at 1). Marked unavailable when infinite jumps
// exist.
BoundTable closed_form_table(const ProductMdp& pm, const DistanceTable& dist, int horizon,
                             double eps, const DistanceJumpReport& jumps);

// Dynamic program over the step budget: each state's bound at budget k is the
// worst-case mixture of its go-policy successors' bounds at k-1.
BoundTable recursive_lb(const ProductMdp& pm, const DistanceTable& dist, const GoPolicy& pi,
                        int horizon, double eps);

// ── Monte-Carlo ground truth ─────────────────────────────────────────────────
// Rolls the true simulator under the go policy and reports the fraction of
// episodes reaching the accepting set within the step budget.

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    long long trials = 0;
};

// Precomputed sampler: per product state, the true successor distribution
// under the go policy, as a CDF over product states.
class GoRollout {
public:
    GoRollout(const LabeledMdp& sim, const ProductMdp& pm, const GoPolicy& pi);

    // first step index (1-based) at which an accepting state is entered, or
    // horizon+1 if never; 0 if p0 already accepts
    int first_hit(int p0, int horizon, SplitMix64& rng) const;

    // per-trial seeds are derived from (seed, trial), so estimates are
    // reproducible and independent of threading
    McEstimate satisfaction(int p0, int horizon, long long trials, std::uint64_t seed,
                            int threads = 1) const;

    // counts[k] = number of trials whose first hit is <= k, for k = 0..horizon
    std::vector<long long> first_hit_counts(int p0, int horizon, long long trials,
                                            std::uint64_t seed, int threads = 1) const;

private:
    const ProductMdp* pm_;
    std::vector<std::vector<std::pair<double, int>>> cdf_; // per pid under pi
};

McEstimate mc_satisfaction(const LabeledMdp& sim, const ProductMdp& pm, const GoPolicy& pi,
                           int p0, int horizon, long long trials, std::uint64_t seed);

} // namespace tlswitch
