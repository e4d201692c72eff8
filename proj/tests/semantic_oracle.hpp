#pragma once

// Test-only oracle: evaluates the relaxed task semantics directly on the
// formula tree, with no automaton involved. A formula "completes" on a word
// at the earliest index where its task structure is finished:
//
//   hold        earliest t_e >= t+d whose d+1 trailing observations all
//               satisfy the (possibly negated) proposition
//   !hold       earliest t_e >= t+d whose d+1 trailing observations contain
//               at least one failing observation
//   and / or    max / min of the children's completions
//   concat      left completes at e, right evaluated from e+1
//   within      child evaluated from t+a (upper deadlines are relaxed; the
//               episode horizon enforces them)
//
// Earliest-split concatenation is exact here because completions are
// monotone in the start index: starting earlier never hurts.

#include <cstdint>
#include <vector>

#include "tlswitch/fsa.hpp"
#include "tlswitch/twtl.hpp"

namespace tlswitch::testing {

using Word = std::vector<std::uint64_t>; // observation masks, bit i = ap[i]

// earliest completion index in [t, |word|-1], or -1 when the word is too
// short to complete the formula
inline int earliest_completion(const TwtlNode& node, const Word& word,
                               const std::vector<std::string>& ap, int t) {
    const int n = static_cast<int>(word.size());
    if (t >= n) return -1;

    auto bit_of = [&](const std::string& prop) {
        for (std::size_t i = 0; i < ap.size(); ++i)
            if (ap[i] == prop) return std::uint64_t{1} << i;
        return std::uint64_t{0};
    };

    switch (node.kind) {
    case TwtlKind::Hold: {
        const std::uint64_t bit = bit_of(node.prop);
        for (int te = t + node.hold_duration; te < n; ++te) {
            bool all = true;
            for (int j = te - node.hold_duration; j <= te; ++j) {
                bool present = (word[j] & bit) != 0;
                if (present == node.negated) {
                    all = false;
                    break;
                }
            }
            if (all) return te;
        }
        return -1;
    }
    case TwtlKind::Not: {
        const TwtlNode& h = *node.left;
        const std::uint64_t bit = bit_of(h.prop);
        for (int te = t + h.hold_duration; te < n; ++te) {
            for (int j = te - h.hold_duration; j <= te; ++j) {
                bool present = (word[j] & bit) != 0;
                if (present == h.negated) return te; // one failing observation suffices
            }
        }
        return -1;
    }
    case TwtlKind::And: {
        int a = earliest_completion(*node.left, word, ap, t);
        int b = earliest_completion(*node.right, word, ap, t);
        return (a < 0 || b < 0) ? -1 : std::max(a, b);
    }
    case TwtlKind::Or: {
        int a = earliest_completion(*node.left, word, ap, t);
        int b = earliest_completion(*node.right, word, ap, t);
        if (a < 0) return b;
        if (b < 0) return a;
        return std::min(a, b);
    }
    case TwtlKind::Concat: {
        int a = earliest_completion(*node.left, word, ap, t);
        if (a < 0) return -1;
        return earliest_completion(*node.right, word, ap, a + 1);
    }
    case TwtlKind::Within:
        return earliest_completion(*node.left, word, ap, t + node.window_lo);
    }
    return -1;
}

inline bool oracle_accepts(const TwtlNode& root, const Word& word,
                           const std::vector<std::string>& ap) {
    return earliest_completion(root, word, ap, 0) >= 0;
}

// acceptance by running the automaton over the word
inline bool fsa_accepts(const Fsa& fsa, const Word& word) {
    int q = fsa.initial;
    for (std::uint64_t obs : word) {
        q = advance(fsa, q, obs);
        if (fsa.accepting[q]) return true;
    }
    return false;
}

} // namespace tlswitch::testing
