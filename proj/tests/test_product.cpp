#include "doctest.h"

#include <set>

#include "json.hpp"

#include "tlswitch/harness.hpp"
#include "tlswitch/product.hpp"
#include "tlswitch/twtl.hpp"

using namespace tlswitch;

namespace {

// three-state errand MDP: s0 the store, s1 home, s2 a charging station
LabeledMdp errand_mdp() {
    LabeledMdp mdp;
    mdp.num_states = 3;
    mdp.num_actions = 2;
    mdp.action_names = {"Move", "Stay"};
    mdp.ap = {"Store", "Home", "Charging"};
    mdp.label = {1ULL << 0, 1ULL << 1, 1ULL << 2};
    mdp.reward = {0.0, 1.0, 0.0};
    mdp.trans.assign(3, std::vector<std::vector<std::pair<int, double>>>(2));
    mdp.trans[0][0] = {{1, 0.8}, {2, 0.2}};
    mdp.trans[0][1] = {{0, 1.0}};
    mdp.trans[1][0] = {{0, 0.9}, {2, 0.1}};
    mdp.trans[1][1] = {{1, 1.0}};
    mdp.trans[2][0] = {{1, 1.0}};
    mdp.trans[2][1] = {{2, 1.0}};
    mdp.validate();
    return mdp;
}

GridModel case_grid(double eps) {
    std::string path = std::string(TLSWITCH_CONFIGS_DIR) + "/grid8x8.json";
    GridConfig cfg = load_grid_config(nlohmann::json::parse(read_file(path)));
    cfg.epsilon_agent = eps;
    return build_gridworld(cfg);
}

const char* kCaseStudyFormula =
    "[H^1 P]^[0,20] . ( [H^1 D1]^[0,20] | [H^1 D2]^[0,20] ) . [H^1 Base]^[0,20]";

} // namespace

TEST_CASE("product: initial state consuming an immediately-satisfying label accepts") {
    LabeledMdp mdp = errand_mdp();
    KnowledgeModel km = make_knowledge(mdp, 0.2);
    Fsa fsa = translate_to_fsa(parse_twtl("H^0 Store"));
    fsa.extend_ap(mdp.ap);
    ProductMdp pm = build_product(km, mdp, fsa);

    CHECK(pm.num_states() == mdp.num_states * fsa.num_states());
    int p0 = pm.episode_start(0); // starting at the store satisfies at once
    CHECK(pm.accepting[p0]);
    CHECK(std::find(pm.init_states.begin(), pm.init_states.end(), p0) != pm.init_states.end());
    int p1 = pm.episode_start(1);
    CHECK_FALSE(pm.accepting[p1]);
}

TEST_CASE("product: unknown label proposition is rejected") {
    LabeledMdp mdp = errand_mdp();
    KnowledgeModel km = make_knowledge(mdp, 0.2);
    Fsa fsa = translate_to_fsa(parse_twtl("H^0 Store")); // alphabet lacks Home/Charging
    CHECK_THROWS_WITH_AS(build_product(km, mdp, fsa), doctest::Contains("unknown proposition"),
                         FsaError);
}

TEST_CASE("product: reward view and likely lifting") {
    LabeledMdp mdp = errand_mdp();
    KnowledgeModel km = make_knowledge(mdp, 0.2);
    Fsa fsa = translate_to_fsa(parse_twtl("H^1 Home"));
    fsa.extend_ap(mdp.ap);
    ProductMdp pm = build_product(km, mdp, fsa);

    for (int p = 0; p < pm.num_states(); ++p)
        CHECK(pm.reward[p] == mdp.reward[pm.mdp_of(p)]);

    // each likely MDP successor maps to exactly one product state
    for (int p = 0; p < pm.num_states(); ++p)
        for (int a = 0; a < pm.num_actions; ++a) {
            CHECK(pm.likely[p][a].size() == km.likely[pm.mdp_of(p)][a].size());
            CHECK(pm.support[p][a].size() == km.support[pm.mdp_of(p)][a].size());
            std::set<int> unique(pm.support[p][a].begin(), pm.support[p][a].end());
            CHECK(unique.size() == pm.support[p][a].size());
        }
}

TEST_CASE("product: advance rejects states with two matching guards") {
    Fsa fsa;
    fsa.ap = {"A"};
    fsa.state_names = {"q0", "q1"};
    fsa.accepting = {0, 1};
    fsa.transitions.resize(2);
    fsa.transitions[0].push_back({Guard{1, 0}, 1}); // requires A
    fsa.transitions[0].push_back({Guard{0, 0}, 0}); // catch-all, overlaps
    CHECK_THROWS_WITH_AS(advance(fsa, 0, 1), doctest::Contains("nondeterministic"), FsaError);
    CHECK(advance(fsa, 0, 0) == 0); // only the catch-all matches
    CHECK_THROWS_AS(validate_fsa(fsa), FsaError);
}

TEST_CASE("product: advance is absorbing at acceptance and steps the hold chain") {
    Fsa fsa = translate_to_fsa(parse_twtl("H^1 A"));
    std::uint64_t a = fsa.obs_mask({"A"});
    int q0 = fsa.initial;
    int q1 = advance(fsa, q0, a);
    int q2 = advance(fsa, q1, a);
    CHECK(fsa.accepting[q2]);
    CHECK(advance(fsa, q1, 0) == q0);        // reset on interruption
    CHECK(advance(fsa, q2, 0) == q2);        // absorbing
    CHECK(advance(fsa, q2, a) == q2);
}

TEST_CASE("product: simulated episodes stay inside the declared support sets") {
    GridModel g = case_grid(0.1);
    Fsa fsa = translate_to_fsa(parse_twtl(kCaseStudyFormula));
    fsa.extend_ap(g.mdp.ap);
    ProductMdp pm = build_product(g.knowledge, g.mdp, fsa);

    SplitMix64 rng(77);
    int violations = 0;
    for (int episode = 0; episode < 10000; ++episode) {
        int s = rng.next_index(g.mdp.num_states);
        int p = pm.episode_start(s);
        for (int t = 0; t < 10; ++t) {
            int a = rng.next_index(g.mdp.num_actions);
            auto [s2, r] = g.mdp.step(s, a, rng);
            int p2 = pm.successor(p, s2);
            const auto& supp = pm.support[p][a];
            if (std::find(supp.begin(), supp.end(), p2) == supp.end()) ++violations;
            p = p2;
            s = s2;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("product: case-study sizes and warnings") {
    GridModel g = case_grid(0.1);
    Fsa fsa = translate_to_fsa(parse_twtl(kCaseStudyFormula));
    fsa.extend_ap(g.mdp.ap);
    ProductMdp pm = build_product(g.knowledge, g.mdp, fsa);

    CHECK(pm.num_states() == g.mdp.num_states * fsa.num_states());
    CHECK(pm.init_states.size() == static_cast<std::size_t>(g.mdp.num_states));
    int reachable = 0;
    for (int p = 0; p < pm.num_states(); ++p)
        reachable += pm.reachable[p];
    CHECK(reachable <= pm.num_states());
    CHECK(reachable >= static_cast<int>(pm.init_states.size()));
}
