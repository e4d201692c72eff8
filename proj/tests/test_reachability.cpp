#include "doctest.h"

#include <chrono>
#include <cmath>

#include "json.hpp"

#include "tlswitch/harness.hpp"
#include "tlswitch/reachability.hpp"
#include "tlswitch/twtl.hpp"

#include "lp_oracle.hpp"

using namespace tlswitch;

namespace {

// straight corridor: n cells, "fwd" walks right (deterministic), "idle" stays;
// the last cell carries the goal label
LabeledMdp corridor(int n) {
    LabeledMdp mdp;
    mdp.num_states = n;
    mdp.num_actions = 2;
    mdp.action_names = {"fwd", "idle"};
    mdp.ap = {"G"};
    mdp.label.assign(n, 0);
    mdp.label[n - 1] = 1;
    mdp.reward.assign(n, 0.0);
    mdp.trans.assign(n, std::vector<std::vector<std::pair<int, double>>>(2));
    for (int s = 0; s < n; ++s) {
        mdp.trans[s][0] = {{std::min(s + 1, n - 1), 1.0}};
        mdp.trans[s][1] = {{s, 1.0}};
    }
    mdp.validate();
    return mdp;
}

struct Built {
    LabeledMdp mdp;
    Fsa fsa;
    ProductMdp pm;
    DistanceTable dist;
    GoPolicy pi;
    DistanceJumpReport jumps;
};

Built build(LabeledMdp mdp, const std::string& formula, double eps, int idle_action) {
    Built b;
    b.mdp = std::move(mdp);
    b.fsa = translate_to_fsa(parse_twtl(formula));
    b.fsa.extend_ap(b.mdp.ap);
    b.pm = build_product(make_knowledge(b.mdp, eps), b.mdp, b.fsa);
    b.dist = distance_to_accepting(b.pm);
    b.pi = compute_go_policy(b.pm, b.dist, idle_action);
    b.jumps = compute_max_distance_increase(b.pm, b.dist);
    return b;
}

CaseContext case_study(double eps) {
    std::string path = std::string(TLSWITCH_CONFIGS_DIR) + "/grid8x8.json";
    GridConfig cfg = load_grid_config(nlohmann::json::parse(read_file(path)));
    cfg.epsilon_agent = eps;
    Fsa fsa = translate_to_fsa(parse_twtl(
        "[H^1 P]^[0,20] . ( [H^1 D1]^[0,20] | [H^1 D2]^[0,20] ) . [H^1 Base]^[0,20]"));
    return build_context(build_gridworld(cfg), fsa, 62);
}

} // namespace

// ── distance and go policy ───────────────────────────────────────────────────

TEST_CASE("distance: corridor BFS, accepting zero, unreachable infinite") {
    const int n = 6;
    Built b = build(corridor(n), "H^0 G", 0.1, 1);
    for (int s = 0; s < n; ++s) {
        int p = b.pm.pid(s, b.pm.fsa_initial);
        if (s == n - 1)
            CHECK(b.dist.d[b.pm.episode_start(s)] == 0); // starting on the goal accepts
        else
            CHECK(b.dist.d[p] == n - 1 - s);
    }
    for (int p = 0; p < b.pm.num_states(); ++p)
        if (b.pm.accepting[p]) CHECK(b.dist.d[p] == 0);

    // a formula about a proposition the corridor never emits is unreachable
    Built none = build(corridor(n), "H^0 Missing", 0.1, 1);
    for (int s = 0; s < n; ++s)
        CHECK_FALSE(none.dist.finite(none.pm.pid(s, none.pm.fsa_initial)));
}

TEST_CASE("go policy: corridor moves forward, goal and dead states idle") {
    const int n = 5;
    Built b = build(corridor(n), "H^0 G", 0.1, 1);
    for (int s = 0; s + 1 < n; ++s)
        CHECK(b.pi.action[b.pm.pid(s, b.pm.fsa_initial)] == 0);
    for (int p = 0; p < b.pm.num_states(); ++p)
        if (b.pm.accepting[p]) CHECK(b.pi.action[p] == 1);
    Built none = build(corridor(n), "H^0 Missing", 0.1, 1);
    for (int p = 0; p < none.pm.num_states(); ++p)
        CHECK(none.pi.action[p] == 1);
}

TEST_CASE("go policy: equal-distance actions resolve to the first in the ordering") {
    // two interchangeable forward actions
    LabeledMdp mdp = corridor(4);
    mdp.num_actions = 3;
    mdp.action_names = {"fwdA", "fwdB", "idle"};
    for (int s = 0; s < 4; ++s) {
        mdp.trans[s].push_back(mdp.trans[s][1]); // idle moves to slot 2
        mdp.trans[s][1] = mdp.trans[s][0];       // fwdB duplicates fwdA
    }
    mdp.validate();
    Built b = build(std::move(mdp), "H^0 G", 0.1, 2);
    for (int s = 0; s < 3; ++s)
        CHECK(b.pi.action[b.pm.pid(s, b.pm.fsa_initial)] == 0);
}

TEST_CASE("distance increase: deterministic corridor has none") {
    Built b = build(corridor(5), "H^0 G", 0.1, 1);
    CHECK(b.jumps.max_increase == 0);
    CHECK(b.jumps.infinite_jumps.empty());
    CHECK(b.jumps.closed_form_applicable());
}

TEST_CASE("distance increase: interrupting a long hold regresses by its length") {
    // cell 0 carries A, cell 1 does not; "hold" slips off A, "goA" re-enters it
    LabeledMdp mdp;
    mdp.num_states = 2;
    mdp.num_actions = 2;
    mdp.action_names = {"hold", "goA"};
    mdp.ap = {"A"};
    mdp.label = {1, 0};
    mdp.reward = {0.0, 0.0};
    mdp.trans.assign(2, std::vector<std::vector<std::pair<int, double>>>(2));
    mdp.trans[0][0] = {{0, 0.9}, {1, 0.1}};
    mdp.trans[0][1] = {{0, 1.0}};
    mdp.trans[1][0] = {{1, 1.0}};
    mdp.trans[1][1] = {{0, 1.0}};
    mdp.validate();

    Built b = build(std::move(mdp), "H^3 A", 0.1, 0);
    CHECK(b.jumps.max_increase >= 3);
    CHECK(b.jumps.infinite_jumps.empty());
}

TEST_CASE("distance increase: slipping into a trap is reported, not thrown") {
    // c0 -> goal c1, but a risky action can drop into an absorbing trap c2
    LabeledMdp mdp;
    mdp.num_states = 3;
    mdp.num_actions = 2;
    mdp.action_names = {"safe", "risky"};
    mdp.ap = {"G"};
    mdp.label = {0, 1, 0};
    mdp.reward = {0.0, 0.0, 0.0};
    mdp.trans.assign(3, std::vector<std::vector<std::pair<int, double>>>(2));
    mdp.trans[0][0] = {{1, 1.0}};
    mdp.trans[0][1] = {{1, 0.9}, {2, 0.1}};
    mdp.trans[1][0] = {{1, 1.0}};
    mdp.trans[1][1] = {{1, 1.0}};
    mdp.trans[2][0] = {{2, 1.0}};
    mdp.trans[2][1] = {{2, 1.0}};
    mdp.validate();

    Built b = build(std::move(mdp), "H^0 G", 0.1, 0);
    CHECK_FALSE(b.jumps.infinite_jumps.empty());
    CHECK_FALSE(b.jumps.closed_form_applicable());
    BoundTable closed = closed_form_table(b.pm, b.dist, 10, 0.1, b.jumps);
    CHECK_FALSE(closed.available);
}

// ── closed-form bound vs walk oracle ─────────────────────────────────────────

TEST_CASE("closed form: frozen examples") {
    CHECK(closed_form_lb(1, 1, 0.1, 1) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(closed_form_lb(1, 1, 0.1, 3) == doctest::Approx(0.9).epsilon(1e-12));
    // +1 w.p. 0.9 / -1 w.p. 0.1 walk from 0 to 2 within 4 steps:
    // P = 0.81 (two steps) + 0.1458 (four steps, one dip) = 0.9558
    CHECK(closed_form_lb(2, 4, 0.1, 1) == doctest::Approx(0.9558).epsilon(1e-9));
    CHECK(walk_hit_probability(2, 4, 0.1, 1) == doctest::Approx(0.9558).epsilon(1e-9));
}

TEST_CASE("closed form: eps = 0 degenerates to the deterministic walk") {
    for (int d = 1; d <= 5; ++d)
        for (int k = 0; k <= 8; ++k) {
            double expected = k >= d ? 1.0 : 0.0;
            CHECK(closed_form_lb(d, k, 0.0, 2) == doctest::Approx(expected).epsilon(1e-12));
        }
}

TEST_CASE("walk oracle: all-intended path when the budget equals the distance") {
    CHECK(walk_hit_probability(3, 3, 0.1, 2) == doctest::Approx(0.729).epsilon(1e-12));
    CHECK(closed_form_lb(3, 3, 0.1, 2) == doctest::Approx(0.729).epsilon(1e-12));
}

TEST_CASE("walk oracle: nondecreasing in the budget") {
    for (int d : {1, 3, 5})
        for (int delta : {1, 2, 3}) {
            double prev = 0.0;
            for (int k = 0; k <= 25; ++k) {
                double v = walk_hit_probability(d, k, 0.15, delta);
                CHECK(v >= prev - 1e-12);
                prev = v;
            }
        }
}

TEST_CASE("closed form: domain violations") {
    CHECK_THROWS_AS(closed_form_lb(0, 5, 0.1, 1), ReachabilityError);
    CHECK_THROWS_AS(closed_form_lb(2, -1, 0.1, 1), ReachabilityError);
    CHECK_THROWS_AS(closed_form_lb(2, 5, 1.0, 1), ReachabilityError);
    CHECK_THROWS_AS(closed_form_lb(2, 5, 0.1, 0), ReachabilityError);
}

TEST_CASE("closed form: equals the exact first-passage law over the whole grid") {
    for (int d = 1; d <= 6; ++d)
        for (int delta : {1, 2, 3})
            for (double eps : {0.0, 0.05, 0.1, 0.2})
                for (int k = 1; k <= 30; ++k) {
                    double a = closed_form_lb(d, k, eps, delta);
                    double b = walk_hit_probability(d, k, eps, delta);
                    CHECK(std::abs(a - b) <= 1e-9);
                }
}

// ── worst-case LP ────────────────────────────────────────────────────────────

TEST_CASE("worst-case LP: closed-form examples") {
    CHECK(solve_worst_case_lp({0.8}, {0.1}, 0.1) == doctest::Approx(0.73).epsilon(1e-12));
    // the likely child itself carries the smallest value: all residual goes to it
    CHECK(solve_worst_case_lp({0.2}, {0.9}, 0.1) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(solve_worst_case_lp({}, {0.5, 0.7}, 0.1) == doctest::Approx(0.5).epsilon(1e-12));
    // degenerate simplex: a single likely child is forced to probability one
    CHECK(solve_worst_case_lp({0.42}, {}, 0.1) == doctest::Approx(0.42).epsilon(1e-12));
    CHECK_THROWS_AS(solve_worst_case_lp({0.5, 0.6}, {}, 0.1), ReachabilityError);
    CHECK_THROWS_AS(solve_worst_case_lp({}, {}, 0.1), ReachabilityError);
}

TEST_CASE("worst-case LP: matches the grid-search oracle on random instances") {
    auto instances = testing::random_lp_instances(424242, 1000);
    CHECK(testing::lp_equivalence_max_diff(instances, 2) <= 1e-3);
}

// ── recursive bound ──────────────────────────────────────────────────────────

TEST_CASE("recursive bound: base rows and forced chains") {
    const int n = 5;
    Built b = build(corridor(n), "H^0 G", 0.0, 1); // deterministic knowledge
    BoundTable bt = recursive_lb(b.pm, b.dist, b.pi, 10, 0.0);
    for (int p = 0; p < b.pm.num_states(); ++p) {
        CHECK(bt.at(0, p) == (b.pm.accepting[p] ? 1.0 : 0.0));
        for (int k = 1; k <= 10; ++k) {
            if (b.pm.accepting[p]) CHECK(bt.at(k, p) == 1.0);
            if (b.dist.finite(p) && b.dist.d[p] > k) CHECK(bt.at(k, p) == 0.0);
        }
    }
    // single successor forced to probability one: value passes through
    for (int s = 0; s + 1 < n; ++s) {
        int p = b.pm.pid(s, b.pm.fsa_initial);
        int child = b.pm.support[p][0][0];
        for (int k = 1; k <= 10; ++k)
            CHECK(bt.at(k, p) == bt.at(k - 1, child));
    }
}

TEST_CASE("distance and go policy: minimizer structure on the case study") {
    for (double eps : {0.1, 0.2}) {
        CaseContext ctx = case_study(eps);
        auto best_reach = [&](int p, int a) {
            long long reach = std::numeric_limits<long long>::max();
            for (int t : ctx.pm.likely[p][a])
                reach = std::min<long long>(reach, ctx.dist.d[t]);
            return reach;
        };
        for (int p = 0; p < ctx.pm.num_states(); ++p) {
            if (!ctx.dist.finite(p) || ctx.dist.d[p] == 0) continue;
            long long best = std::numeric_limits<long long>::max();
            for (int a = 0; a < ctx.pm.num_actions; ++a)
                if (!ctx.pm.likely[p][a].empty()) best = std::min(best, best_reach(p, a));
            // some likely successor sits exactly one step closer, and the
            // policy's action attains that minimum
            CHECK(best == ctx.dist.d[p] - 1);
            CHECK(best_reach(p, ctx.pi.action[p]) == best);
        }
    }
}

TEST_CASE("recursive bound: corrupted knowledge with an infeasible box is named") {
    LabeledMdp mdp = corridor(3);
    KnowledgeModel km = make_knowledge(mdp, 0.1);
    km.likely[0][0] = {0, 1}; // two successors both 'likely' at eps = 0.1: impossible
    Fsa fsa = translate_to_fsa(parse_twtl("H^0 G"));
    fsa.extend_ap(mdp.ap);
    ProductMdp pm = build_product(km, mdp, fsa);
    DistanceTable dist = distance_to_accepting(pm);
    GoPolicy pi = compute_go_policy(pm, dist, 1);
    CHECK_THROWS_WITH_AS(recursive_lb(pm, dist, pi, 5, 0.1),
                         doctest::Contains("infeasible successor box"), ReachabilityError);
}

TEST_CASE("bound tables: monotone in the budget and inside [0,1] on the case study") {
    CaseContext ctx = case_study(0.1);
    BoundTable closed = closed_form_table(ctx.pm, ctx.dist, 62, 0.1, ctx.jumps);
    BoundTable rec = recursive_lb(ctx.pm, ctx.dist, ctx.pi, 62, 0.1);
    REQUIRE(closed.available);
    for (const BoundTable* bt : {&closed, &rec}) {
        for (int p = 0; p < bt->n; ++p) {
            double prev = 0.0;
            for (int k = 0; k <= 62; ++k) {
                double v = bt->at(k, p);
                CHECK(v >= -1e-15);
                CHECK(v <= 1.0 + 1e-15);
                CHECK(v >= prev - 1e-12);
                prev = v;
            }
            CHECK(bt->at(0, p) == (ctx.pm.accepting[p] ? 1.0 : 0.0));
        }
    }
}

// ── Monte-Carlo ground truth ─────────────────────────────────────────────────

TEST_CASE("mc: deterministic corridor reaches the goal with certainty") {
    const int n = 5;
    Built b = build(corridor(n), "H^0 G", 0.1, 1);
    int p0 = b.pm.pid(0, b.pm.fsa_initial);
    McEstimate est = mc_satisfaction(b.mdp, b.pm, b.pi, p0, n - 1, 2000, 99);
    CHECK(est.estimate == 1.0);
    McEstimate short_budget = mc_satisfaction(b.mdp, b.pm, b.pi, p0, n - 2, 2000, 99);
    CHECK(short_budget.estimate == 0.0);
}

TEST_CASE("mc: fixed seed reproduces the estimate bit-exactly") {
    CaseContext ctx = case_study(0.1);
    int p0 = ctx.pm.init_states.front();
    McEstimate a = mc_satisfaction(ctx.grid.mdp, ctx.pm, ctx.pi, p0, 20, 20000, 7);
    McEstimate b = mc_satisfaction(ctx.grid.mdp, ctx.pm, ctx.pi, p0, 20, 20000, 7);
    CHECK(a.estimate == b.estimate);
    GoRollout roll(ctx.grid.mdp, ctx.pm, ctx.pi);
    McEstimate threaded = roll.satisfaction(p0, 20, 20000, 7, 2);
    CHECK(threaded.estimate == a.estimate); // threading cannot change the result
}

TEST_CASE("mc: both bounds are valid for every product state and budget on the case study") {
    CaseContext ctx = case_study(0.1);
    const int horizon = 62;
    const long long trials = 100000;
    BoundTable closed = closed_form_table(ctx.pm, ctx.dist, horizon, 0.1, ctx.jumps);
    BoundTable rec = recursive_lb(ctx.pm, ctx.dist, ctx.pi, horizon, 0.1);
    REQUIRE(closed.available);

    GoRollout roll(ctx.grid.mdp, ctx.pm, ctx.pi);
    int worst_violations = 0;
    for (int p = 0; p < ctx.pm.num_states(); ++p) {
        auto counts = roll.first_hit_counts(p, horizon, trials, derive_seed(31337, p), 2);
        for (int k = 0; k <= horizon; ++k) {
            double est = counts[k] / static_cast<double>(trials);
            double se = std::sqrt(est * (1.0 - est) / trials);
            if (est < closed.at(k, p) - 3.0 * se) ++worst_violations;
            if (est < rec.at(k, p) - 3.0 * se) ++worst_violations;
        }
    }
    CHECK(worst_violations == 0);
}
