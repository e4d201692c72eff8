#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "tlswitch/twtl.hpp"

namespace tlswitch {

// ── Deterministic finite-state automaton over observation sets ──────────────
//
// Transitions carry require/forbid guards instead of an explicit 2^AP
// enumeration: a guard matches an observation set iff every required
// proposition is present and no forbidden one is. At most 64 propositions.

struct Guard {
    std::uint64_t require = 0;
    std::uint64_t forbid = 0;

    bool matches(std::uint64_t obs) const {
        return (require & ~obs) == 0 && (forbid & obs) == 0;
    }
    // two guards overlap iff some observation satisfies both
    bool overlaps(const Guard& o) const {
        return ((require | o.require) & (forbid | o.forbid)) == 0;
    }
    bool operator==(const Guard& o) const { return require == o.require && forbid == o.forbid; }
};

struct FsaTransition {
    Guard guard;
    int to = 0;
};

struct Fsa {
    std::vector<std::string> ap;          // proposition names; index = guard bit
    std::vector<std::string> state_names;
    std::vector<std::vector<FsaTransition>> transitions; // outgoing, per state
    std::vector<char> accepting;          // per state
    int initial = 0;

    int num_states() const { return static_cast<int>(state_names.size()); }

    int find_ap(const std::string& name) const;

    // Adds propositions to the alphabet without touching any guard. Used to
    // align an automaton with an environment that labels more propositions
    // than the formula mentions.
    void extend_ap(const std::vector<std::string>& names);

    // Observation mask for a set of proposition names (unknown name -> throw).
    std::uint64_t obs_mask(const std::vector<std::string>& props) const;
};

class FsaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Transition function. Returns the unique matching successor, or q itself
// when no guard matches (progress stall). Two matching guards indicate a
// broken automaton and throw.
int advance(const Fsa& fsa, int q, std::uint64_t obs);

// Checks determinism (pairwise non-overlapping guards per state) and that
// accepting states are absorbing. Throws FsaError on violation.
void validate_fsa(const Fsa& fsa);

// Translates a formula of the supported fragment into an FSA. The automaton
// tracks task progress only; window deadlines are left to the episode
// horizon. Accepting states are absorbing. Throws FsaError if the
// construction exceeds max_states.
Fsa translate_to_fsa(const TwtlNode& root, std::size_t max_states = 1000000);
inline Fsa translate_to_fsa(const TwtlAst& ast, std::size_t max_states = 1000000) {
    return translate_to_fsa(*ast.root, max_states);
}

// JSON document round trip. load_fsa validates the schema, rejects
// nondeterminism and dangling state references, and makes accepting states
// absorbing (appending a note to *warnings when it had to).
Fsa load_fsa(const nlohmann::json& doc, std::vector<std::string>* warnings = nullptr);
nlohmann::json save_fsa(const Fsa& fsa);

// Graphviz rendering for --dot output.
std::string to_dot(const Fsa& fsa);

} // namespace tlswitch
