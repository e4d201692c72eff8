#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlswitch {

// ── TWTL fragment AST ───────────────────────────────────────────────────────
//
// Supported operators:
//   Hold    H^d s / H^d !s : proposition (or its negation) holds for d+1
//                            consecutive observations
//   Not     !phi           : only over Hold leaves in this fragment
//   And/Or  phi & psi, phi | psi
//   Concat  phi . psi      : psi starts on the observation after phi finishes
//   Within  [phi]^[a,b]    : phi starts no earlier than a steps in; the upper
//                            deadline b contributes to the time bound only
//                            (deadlines are enforced by the episode horizon)

enum class TwtlKind { Hold, And, Or, Not, Concat, Within };

struct TwtlNode {
    TwtlKind kind;

    // Hold leaves
    int hold_duration = 0;
    std::string prop;
    bool negated = false;

    // Within windows
    int window_lo = 0;
    int window_hi = 0;

    std::unique_ptr<TwtlNode> left;  // also the sole child of Not/Within
    std::unique_ptr<TwtlNode> right;
};

struct TwtlAst {
    std::unique_ptr<TwtlNode> root;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t position);
    std::size_t position() const noexcept { return pos_; }

private:
    std::size_t pos_;
};

// Parses the concrete syntax. Tokens: `H^d`, `[ ... ]^[a,b]`, `.`, `|`, `&`,
// `!`, parentheses, proposition identifiers. Precedence, tightest first:
// `!`, hold, `&`/`|` (one level, left associative), `.`.
TwtlAst parse_twtl(const std::string& text);

// Maximum number of steps needed to satisfy the formula:
// hold -> d, within -> b, and/or -> max, not -> child, concat -> l + r + 1.
int time_bound(const TwtlNode& node);
inline int time_bound(const TwtlAst& ast) { return time_bound(*ast.root); }

std::string to_string(const TwtlNode& node);
inline std::string to_string(const TwtlAst& ast) { return to_string(*ast.root); }

// Atomic propositions used by the formula, sorted and deduplicated.
std::vector<std::string> collect_props(const TwtlNode& node);

} // namespace tlswitch
