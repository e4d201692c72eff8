#include "doctest.h"

#include "tlswitch/fsa.hpp"
#include "tlswitch/rng.hpp"
#include "tlswitch/twtl.hpp"

#include "formula_gen.hpp"
#include "semantic_oracle.hpp"

using namespace tlswitch;
using tlswitch::testing::Word;

namespace {

const char* kCaseStudyFormula =
    "[H^1 P]^[0,20] . ( [H^1 D1]^[0,20] | [H^1 D2]^[0,20] ) . [H^1 Base]^[0,20]";
const char* kTableFormula = "[H^1 P]^[0,8] . [H^1 D1]^[0,8]";

} // namespace

TEST_CASE("parse: case-study formula shape") {
    TwtlAst ast = parse_twtl(kCaseStudyFormula);
    const TwtlNode& root = *ast.root;
    REQUIRE(root.kind == TwtlKind::Concat);
    // left associative: ((P-block . or-block) . base-block)
    REQUIRE(root.left->kind == TwtlKind::Concat);
    CHECK(root.left->left->kind == TwtlKind::Within);
    CHECK(root.left->right->kind == TwtlKind::Or);
    CHECK(root.left->right->left->kind == TwtlKind::Within);
    CHECK(root.right->kind == TwtlKind::Within);
    CHECK(root.right->left->kind == TwtlKind::Hold);
    CHECK(root.right->left->prop == "Base");
    CHECK(root.right->window_hi == 20);
}

TEST_CASE("parse: single leaf") {
    TwtlAst ast = parse_twtl("H^0 A");
    CHECK(ast.root->kind == TwtlKind::Hold);
    CHECK(ast.root->hold_duration == 0);
    CHECK(ast.root->prop == "A");
    CHECK_FALSE(ast.root->negated);
}

TEST_CASE("parse: two-window concat") {
    TwtlAst ast = parse_twtl(kTableFormula);
    REQUIRE(ast.root->kind == TwtlKind::Concat);
    CHECK(ast.root->left->kind == TwtlKind::Within);
    CHECK(ast.root->left->left->prop == "P");
    CHECK(ast.root->right->left->prop == "D1");
}

TEST_CASE("parse: negations") {
    TwtlAst inner = parse_twtl("H^2 !A");
    CHECK(inner.root->kind == TwtlKind::Hold);
    CHECK(inner.root->negated);

    TwtlAst outer = parse_twtl("!H^2 A");
    CHECK(outer.root->kind == TwtlKind::Not);
    CHECK(outer.root->left->kind == TwtlKind::Hold);
}

TEST_CASE("parse: errors carry positions") {
    CHECK_THROWS_AS(parse_twtl("H^1"), ParseError);
    CHECK_THROWS_AS(parse_twtl("[H^1 A]^[5,2]"), ParseError);     // a > b
    CHECK_THROWS_AS(parse_twtl("[H^5 A]^[0,2]"), ParseError);     // window too short
    CHECK_THROWS_AS(parse_twtl("!(H^0 A . H^0 B)"), ParseError);  // '!' over composite
    CHECK_THROWS_AS(parse_twtl("H^1 A ."), ParseError);
    CHECK_THROWS_AS(parse_twtl("H^^1 A"), ParseError);
    try {
        parse_twtl("H^1 A @ B");
    } catch (const ParseError& e) {
        CHECK(e.position() == 6);
    }
}

TEST_CASE("time_bound: paper formulas and basics") {
    CHECK(time_bound(parse_twtl(kCaseStudyFormula)) == 62);
    CHECK(time_bound(parse_twtl(kTableFormula)) == 17);
    CHECK(time_bound(parse_twtl("H^3 A")) == 3);
    CHECK(time_bound(parse_twtl("H^2 A & H^4 B")) == 4);
    CHECK(time_bound(parse_twtl("!H^2 A")) == 2);
}

TEST_CASE("translate: smallest hold") {
    Fsa fsa = translate_to_fsa(parse_twtl("H^0 A"));
    REQUIRE(fsa.num_states() == 2);
    std::uint64_t a = fsa.obs_mask({"A"});
    int q0 = fsa.initial;
    CHECK_FALSE(fsa.accepting[q0]);
    int hit = advance(fsa, q0, a);
    CHECK(fsa.accepting[hit]);
    CHECK(advance(fsa, q0, 0) == q0);
    CHECK(advance(fsa, hit, 0) == hit); // absorbing
}

TEST_CASE("translate: hold with reset, checked against brute force") {
    TwtlAst ast = parse_twtl("H^1 A");
    Fsa fsa = translate_to_fsa(ast);
    REQUIRE(fsa.num_states() == 3);
    std::vector<std::string> ap{"A"};
    // all words of length <= 4 over {A}
    for (int len = 0; len <= 4; ++len) {
        for (int bits = 0; bits < (1 << len); ++bits) {
            Word w(len);
            for (int i = 0; i < len; ++i)
                w[i] = (bits >> i) & 1;
            CHECK(testing::fsa_accepts(fsa, w) == testing::oracle_accepts(*ast.root, w, ap));
        }
    }
    // interrupting the hold resets progress instead of rejecting
    std::uint64_t a = fsa.obs_mask({"A"});
    int q = advance(fsa, fsa.initial, a);
    CHECK(q != fsa.initial);
    CHECK(advance(fsa, q, 0) == fsa.initial);
    CHECK(fsa.accepting[advance(fsa, q, a)]);
}

TEST_CASE("translate: concat merges left acceptance into right start") {
    Fsa left = translate_to_fsa(parse_twtl("H^2 A"));
    Fsa right = translate_to_fsa(parse_twtl("H^1 B"));
    Fsa both = translate_to_fsa(parse_twtl("H^2 A . H^1 B"));
    CHECK(both.num_states() == left.num_states() + right.num_states() - 1);
}

TEST_CASE("translate: constructed automata satisfy the structural invariants") {
    for (const char* f : {kCaseStudyFormula, kTableFormula, "H^0 A", "!H^1 A",
                          "H^1 !A & H^0 B", "[H^1 A]^[2,6] . (H^0 B | H^0 A)"}) {
        Fsa fsa = translate_to_fsa(parse_twtl(f));
        CHECK_NOTHROW(validate_fsa(fsa));
        int n_acc = 0;
        for (int q = 0; q < fsa.num_states(); ++q)
            n_acc += fsa.accepting[q];
        CHECK(n_acc == 1);
    }
}

TEST_CASE("translate: state cap guard") {
    CHECK_THROWS_AS(translate_to_fsa(parse_twtl(kCaseStudyFormula), 3), FsaError);
}

TEST_CASE("fsa json: round trip is structural identity") {
    Fsa fsa = translate_to_fsa(parse_twtl("H^0 A . H^1 B"));
    Fsa back = load_fsa(save_fsa(fsa));
    REQUIRE(back.num_states() == fsa.num_states());
    CHECK(back.initial == fsa.initial);
    CHECK(back.ap == fsa.ap);
    for (int q = 0; q < fsa.num_states(); ++q) {
        CHECK(back.accepting[q] == fsa.accepting[q]);
        REQUIRE(back.transitions[q].size() == fsa.transitions[q].size());
        for (std::size_t i = 0; i < fsa.transitions[q].size(); ++i) {
            CHECK(back.transitions[q][i].guard == fsa.transitions[q][i].guard);
            CHECK(back.transitions[q][i].to == fsa.transitions[q][i].to);
        }
    }
}

TEST_CASE("fsa json: rejects nondeterminism and dangling references") {
    nlohmann::json doc = save_fsa(translate_to_fsa(parse_twtl("H^0 A")));
    nlohmann::json bad = doc;
    // duplicate of the same (state, guard)
    bad["transitions"].push_back(bad["transitions"][0]);
    CHECK_THROWS_WITH_AS(load_fsa(bad), doctest::Contains("nondeterminism"), FsaError);

    bad = doc;
    bad["transitions"][0]["to"] = "nowhere";
    CHECK_THROWS_WITH_AS(load_fsa(bad), doctest::Contains("dangling"), FsaError);
}

TEST_CASE("fsa json: accepting state without a self-loop is completed with a warning") {
    Fsa fsa = translate_to_fsa(parse_twtl("H^0 A"));
    nlohmann::json doc = save_fsa(fsa);
    // find the accepting state's name and strip its transitions
    std::string acc = doc["accepting"][0].get<std::string>();
    nlohmann::json pruned = nlohmann::json::array();
    for (const auto& t : doc["transitions"])
        if (t["from"].get<std::string>() != acc) pruned.push_back(t);
    doc["transitions"] = pruned;

    std::vector<std::string> warnings;
    Fsa fixed = load_fsa(doc, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK_NOTHROW(validate_fsa(fixed));

    // acceptance of extended words is unchanged
    std::uint64_t a = fixed.obs_mask({"A"});
    for (Word w : {Word{a}, Word{a, 0}, Word{a, 0, a}, Word{0, a, a}})
        CHECK(testing::fsa_accepts(fixed, w) == testing::fsa_accepts(fsa, w));
}

// ── Random-formula semantic equivalence ──────────────────────────────────────

TEST_CASE("translate: 1000 random formulas agree with the semantic oracle on all short words") {
    SplitMix64 rng(20240817);
    int checked_words = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::unique_ptr<TwtlNode> root = testing::random_bounded_formula(rng, 8);

        Fsa fsa = translate_to_fsa(*root);
        validate_fsa(fsa);
        std::vector<std::string> ap = collect_props(*root);
        REQUIRE(fsa.ap == ap);

        const int base = 1 << ap.size();
        const int max_len = time_bound(*root) + 1;
        Word w;
        for (int len = 0; len <= max_len; ++len) {
            w.assign(len, 0);
            long long total = 1;
            for (int i = 0; i < len; ++i)
                total *= base;
            for (long long code = 0; code < total; ++code) {
                long long c = code;
                for (int i = 0; i < len; ++i) {
                    w[i] = static_cast<std::uint64_t>(c % base);
                    c /= base;
                }
                bool by_fsa = testing::fsa_accepts(fsa, w);
                bool by_oracle = testing::oracle_accepts(*root, w, ap);
                if (by_fsa != by_oracle) {
                    CAPTURE(to_string(*root));
                    REQUIRE(by_fsa == by_oracle);
                }
                ++checked_words;
            }
        }
    }
    CHECK(checked_words > 1000000); // sanity: the sweep actually enumerated words
}
