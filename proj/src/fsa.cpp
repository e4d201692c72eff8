#include "tlswitch/fsa.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

namespace tlswitch {

int Fsa::find_ap(const std::string& name) const {
    for (std::size_t i = 0; i < ap.size(); ++i)
        if (ap[i] == name) return static_cast<int>(i);
    return -1;
}

void Fsa::extend_ap(const std::vector<std::string>& names) {
    for (const auto& n : names) {
        if (find_ap(n) >= 0) continue;
        if (ap.size() >= 64)
            throw FsaError("alphabet limit exceeded (64 propositions)");
        ap.push_back(n);
    }
}

std::uint64_t Fsa::obs_mask(const std::vector<std::string>& props) const {
    std::uint64_t m = 0;
    for (const auto& p : props) {
        int i = find_ap(p);
        if (i < 0) throw FsaError("unknown proposition: " + p);
        m |= (std::uint64_t{1} << i);
    }
    return m;
}

int advance(const Fsa& fsa, int q, std::uint64_t obs) {
    int target = q;
    int matches = 0;
    for (const auto& t : fsa.transitions[q]) {
        if (t.guard.matches(obs)) {
            ++matches;
            target = t.to;
        }
    }
    if (matches > 1)
        throw FsaError("nondeterministic automaton: state " + fsa.state_names[q] +
                       " has multiple matching guards");
    return target;
}

void validate_fsa(const Fsa& fsa) {
    for (int q = 0; q < fsa.num_states(); ++q) {
        const auto& ts = fsa.transitions[q];
        for (std::size_t i = 0; i < ts.size(); ++i)
            for (std::size_t j = i + 1; j < ts.size(); ++j)
                if (ts[i].guard.overlaps(ts[j].guard))
                    throw FsaError("nondeterminism: overlapping guards from state " +
                                   fsa.state_names[q]);
        if (fsa.accepting[q])
            for (const auto& t : ts)
                if (t.to != q)
                    throw FsaError("accepting state " + fsa.state_names[q] +
                                   " is not absorbing");
    }
}

// ── Translation ──────────────────────────────────────────────────────────────

namespace {

// Intermediate automaton. Exactly one accepting state, always the last id,
// with no stored outgoing transitions (it behaves as a catch-all self-loop
// during composition). The initial state is never the accepting one: every
// fragment formula consumes at least one observation.
struct Builder {
    std::vector<std::vector<FsaTransition>> trans;
    int init = 0;
    int acc = 0;

    int size() const { return static_cast<int>(trans.size()); }
};

void check_cap(std::size_t n, std::size_t cap) {
    if (n > cap)
        throw FsaError("automaton construction exceeded the state cap (" +
                       std::to_string(cap) + ")");
}

// H^d s (or H^d !s): d+1 chain states counting consecutive satisfying
// observations; a failing observation resets the chain.
Builder make_hold(int d, std::uint64_t bit, bool negated) {
    Guard sat{negated ? 0 : bit, negated ? bit : 0};
    Guard viol{sat.forbid, sat.require};
    Builder b;
    b.trans.resize(d + 2);
    b.init = 0;
    b.acc = d + 1;
    for (int i = 0; i <= d; ++i) {
        b.trans[i].push_back({sat, i < d ? i + 1 : b.acc});
        b.trans[i].push_back({viol, 0});
    }
    return b;
}

// !(H^d s): complete after consuming at least d+1 observations of which at
// least one fails the hold condition.
Builder make_not_hold(int d, std::uint64_t bit, bool negated) {
    Guard sat{negated ? 0 : bit, negated ? bit : 0};
    Guard viol{sat.forbid, sat.require};
    Builder b;
    // ids: 0..d count violation-free observations (saturating at d),
    // d+1..2d count observations after a violation, 2d+1 accepts.
    b.trans.resize(2 * d + 2);
    b.init = 0;
    b.acc = 2 * d + 1;
    for (int c = 0; c <= d; ++c) {
        b.trans[c].push_back({sat, std::min(c + 1, d)});
        b.trans[c].push_back({viol, c == d ? b.acc : d + c + 1});
    }
    for (int c = 1; c <= d; ++c)
        b.trans[d + c].push_back({Guard{}, c == d ? b.acc : d + c + 1});
    return b;
}

// phi . psi: the left accepting state is merged into the right initial state,
// so the right part starts consuming on the observation after the left part
// completes.
Builder make_concat(const Builder& l, const Builder& r, std::size_t cap) {
    check_cap(static_cast<std::size_t>(l.size()) + r.size() - 1, cap);
    Builder b;
    int offset = l.size() - 1; // left acc (last id) is dropped
    b.trans.resize(offset + r.size());
    b.init = l.init;
    b.acc = offset + r.acc;
    for (int s = 0; s < l.size() - 1; ++s)
        for (const auto& t : l.trans[s])
            b.trans[s].push_back({t.guard, t.to == l.acc ? offset + r.init : t.to});
    for (int s = 0; s < r.size(); ++s)
        for (const auto& t : r.trans[s])
            b.trans[offset + s].push_back({t.guard, offset + t.to});
    return b;
}

// phi | psi (or phi & psi): synchronous product; a pair accepts when either
// (or both) component accepts. Accepting pairs collapse into one state.
// stand-in outgoing edge for an accepting component: absorbs every observation
const std::vector<FsaTransition> kAbsorbingSide{{Guard{}, -2}};

Builder make_bool(const Builder& l, const Builder& r, bool is_or, std::size_t cap) {
    auto outgoing = [&](const Builder& b, int s) -> const std::vector<FsaTransition>& {
        return s == b.acc ? kAbsorbingSide : b.trans[s];
    };
    auto accepts = [&](int sl, int sr) {
        return is_or ? (sl == l.acc || sr == r.acc) : (sl == l.acc && sr == r.acc);
    };

    std::unordered_map<long long, int> ids;
    auto key = [&](int sl, int sr) { return static_cast<long long>(sl) * r.size() + sr; };
    std::deque<std::pair<int, int>> queue;
    std::vector<std::vector<FsaTransition>> trans;

    ids[key(l.init, r.init)] = 0;
    queue.push_back({l.init, r.init});
    trans.emplace_back();

    while (!queue.empty()) {
        auto [sl, sr] = queue.front();
        queue.pop_front();
        int from = ids[key(sl, sr)];
        for (const auto& tl : outgoing(l, sl)) {
            for (const auto& tr : outgoing(r, sr)) {
                Guard g{tl.guard.require | tr.guard.require,
                        tl.guard.forbid | tr.guard.forbid};
                if ((g.require & g.forbid) != 0) continue; // unsatisfiable combination
                int nl = tl.to == -2 ? sl : tl.to;
                int nr = tr.to == -2 ? sr : tr.to;
                int to;
                if (accepts(nl, nr)) {
                    to = -1; // patched to the accepting id below
                } else {
                    auto [it, fresh] = ids.try_emplace(key(nl, nr), static_cast<int>(trans.size()));
                    if (fresh) {
                        check_cap(trans.size() + 2, cap);
                        trans.emplace_back();
                        queue.push_back({nl, nr});
                    }
                    to = it->second;
                }
                trans[from].push_back({g, to});
            }
        }
    }

    Builder b;
    b.acc = static_cast<int>(trans.size());
    trans.emplace_back();
    for (auto& ts : trans)
        for (auto& t : ts)
            if (t.to == -1) t.to = b.acc;
    b.trans = std::move(trans);
    b.init = 0;
    return b;
}

// [phi]^[a,b]: a leading delay states postpone the child's start by a
// observations; the upper deadline is tracked by the time bound only.
Builder make_within(Builder child, int lo, std::size_t cap) {
    if (lo == 0) return child;
    check_cap(static_cast<std::size_t>(child.size()) + lo, cap);
    Builder b;
    b.trans.resize(child.size() + lo);
    b.init = 0;
    b.acc = lo + child.acc;
    for (int i = 0; i < lo; ++i)
        b.trans[i].push_back({Guard{}, i + 1 < lo ? i + 1 : lo + child.init});
    for (int s = 0; s < child.size(); ++s)
        for (const auto& t : child.trans[s])
            b.trans[lo + s].push_back({t.guard, lo + t.to});
    return b;
}

Builder build_rec(const TwtlNode& node, const std::vector<std::string>& ap, std::size_t cap) {
    auto bit_of = [&](const std::string& prop) {
        auto it = std::find(ap.begin(), ap.end(), prop);
        return std::uint64_t{1} << (it - ap.begin());
    };
    switch (node.kind) {
    case TwtlKind::Hold:
        return make_hold(node.hold_duration, bit_of(node.prop), node.negated);
    case TwtlKind::Not: {
        const TwtlNode& h = *node.left;
        if (h.kind != TwtlKind::Hold)
            throw FsaError("fragment violation: '!' over a composite formula");
        return make_not_hold(h.hold_duration, bit_of(h.prop), h.negated);
    }
    case TwtlKind::And:
    case TwtlKind::Or:
        return make_bool(build_rec(*node.left, ap, cap), build_rec(*node.right, ap, cap),
                         node.kind == TwtlKind::Or, cap);
    case TwtlKind::Concat:
        return make_concat(build_rec(*node.left, ap, cap), build_rec(*node.right, ap, cap), cap);
    case TwtlKind::Within:
        return make_within(build_rec(*node.left, ap, cap), node.window_lo, cap);
    }
    throw FsaError("unreachable");
}

} // namespace

Fsa translate_to_fsa(const TwtlNode& root, std::size_t max_states) {
    std::vector<std::string> ap = collect_props(root);
    if (ap.size() > 64)
        throw FsaError("alphabet limit exceeded (64 propositions)");

    Builder b = build_rec(root, ap, max_states);

    // make the accepting state explicit and absorbing
    b.trans[b.acc].push_back({Guard{}, b.acc});

    // keep reachable states only, numbered in discovery order from the start
    std::vector<int> remap(b.trans.size(), -1);
    std::deque<int> queue{b.init};
    remap[b.init] = 0;
    int count = 1;
    while (!queue.empty()) {
        int s = queue.front();
        queue.pop_front();
        for (const auto& t : b.trans[s]) {
            if (remap[t.to] < 0) {
                remap[t.to] = count++;
                queue.push_back(t.to);
            }
        }
    }

    Fsa fsa;
    fsa.ap = std::move(ap);
    fsa.state_names.resize(count);
    fsa.transitions.resize(count);
    fsa.accepting.assign(count, 0);
    fsa.initial = 0;
    for (int s = 0; s < b.size(); ++s) {
        if (remap[s] < 0) continue;
        fsa.state_names[remap[s]] = "q" + std::to_string(remap[s]);
        for (const auto& t : b.trans[s])
            fsa.transitions[remap[s]].push_back({t.guard, remap[t.to]});
    }
    if (remap[b.acc] >= 0) fsa.accepting[remap[b.acc]] = 1;
    return fsa;
}

// ── JSON round trip ──────────────────────────────────────────────────────────

namespace {

std::vector<std::string> mask_to_names(const Fsa& fsa, std::uint64_t mask) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < fsa.ap.size(); ++i)
        if (mask & (std::uint64_t{1} << i)) out.push_back(fsa.ap[i]);
    return out;
}

} // namespace

nlohmann::json save_fsa(const Fsa& fsa) {
    nlohmann::json doc;
    doc["states"] = fsa.state_names;
    doc["initial"] = fsa.state_names[fsa.initial];
    nlohmann::json acc = nlohmann::json::array();
    for (int q = 0; q < fsa.num_states(); ++q)
        if (fsa.accepting[q]) acc.push_back(fsa.state_names[q]);
    doc["accepting"] = std::move(acc);
    doc["ap"] = fsa.ap;
    nlohmann::json trans = nlohmann::json::array();
    for (int q = 0; q < fsa.num_states(); ++q) {
        for (const auto& t : fsa.transitions[q]) {
            trans.push_back({{"from", fsa.state_names[q]},
                             {"require", mask_to_names(fsa, t.guard.require)},
                             {"forbid", mask_to_names(fsa, t.guard.forbid)},
                             {"to", fsa.state_names[t.to]}});
        }
    }
    doc["transitions"] = std::move(trans);
    return doc;
}

Fsa load_fsa(const nlohmann::json& doc, std::vector<std::string>* warnings) {
    auto fail = [](const std::string& msg) -> void { throw FsaError("fsa schema: " + msg); };

    for (const char* field : {"states", "initial", "accepting", "ap", "transitions"})
        if (!doc.contains(field)) fail(std::string("missing field '") + field + "'");

    Fsa fsa;
    std::unordered_map<std::string, int> id_of;
    for (const auto& s : doc["states"]) {
        std::string name = s.get<std::string>();
        if (!id_of.try_emplace(name, fsa.num_states()).second)
            fail("duplicate state id '" + name + "'");
        fsa.state_names.push_back(name);
    }
    fsa.transitions.resize(fsa.num_states());
    fsa.accepting.assign(fsa.num_states(), 0);

    auto state_id = [&](const std::string& name) {
        auto it = id_of.find(name);
        if (it == id_of.end())
            throw FsaError("fsa schema: dangling state reference '" + name + "'");
        return it->second;
    };

    fsa.initial = state_id(doc["initial"].get<std::string>());
    for (const auto& s : doc["accepting"])
        fsa.accepting[state_id(s.get<std::string>())] = 1;

    for (const auto& p : doc["ap"]) {
        std::string name = p.get<std::string>();
        if (fsa.find_ap(name) >= 0) fail("duplicate proposition '" + name + "'");
        fsa.ap.push_back(name);
    }
    if (fsa.ap.size() > 64) fail("alphabet limit exceeded (64 propositions)");

    auto mask = [&](const nlohmann::json& arr) {
        std::uint64_t m = 0;
        for (const auto& p : arr) {
            int i = fsa.find_ap(p.get<std::string>());
            if (i < 0) fail("transition references unknown proposition '" +
                            p.get<std::string>() + "'");
            m |= (std::uint64_t{1} << i);
        }
        return m;
    };

    for (const auto& t : doc["transitions"]) {
        int from = state_id(t.at("from").get<std::string>());
        int to = state_id(t.at("to").get<std::string>());
        Guard g{mask(t.at("require")), mask(t.at("forbid"))};
        if ((g.require & g.forbid) != 0)
            fail("transition guard requires and forbids the same proposition");
        fsa.transitions[from].push_back({g, to});
    }

    // determinism
    for (int q = 0; q < fsa.num_states(); ++q) {
        const auto& ts = fsa.transitions[q];
        for (std::size_t i = 0; i < ts.size(); ++i)
            for (std::size_t j = i + 1; j < ts.size(); ++j)
                if (ts[i].guard.overlaps(ts[j].guard))
                    throw FsaError("nondeterminism: overlapping guards from state " +
                                   fsa.state_names[q]);
    }

    // accepting states must be absorbing under a catch-all self-loop
    for (int q = 0; q < fsa.num_states(); ++q) {
        if (!fsa.accepting[q]) continue;
        auto& ts = fsa.transitions[q];
        bool has_catch_all_self =
            ts.size() == 1 && ts[0].to == q && ts[0].guard == Guard{};
        if (!has_catch_all_self) {
            ts.assign(1, {Guard{}, q});
            if (warnings)
                warnings->push_back("accepting state " + fsa.state_names[q] +
                                    " made absorbing with a catch-all self-loop");
        }
    }
    return fsa;
}

std::string to_dot(const Fsa& fsa) {
    std::string out = "digraph fsa {\n  rankdir=LR;\n  node [shape=circle];\n";
    out += "  __start [shape=point];\n  __start -> s" + std::to_string(fsa.initial) + ";\n";
    for (int q = 0; q < fsa.num_states(); ++q) {
        out += "  s" + std::to_string(q) + " [label=\"" + fsa.state_names[q] + "\"" +
               (fsa.accepting[q] ? ", shape=doublecircle" : "") + "];\n";
    }
    for (int q = 0; q < fsa.num_states(); ++q) {
        for (const auto& t : fsa.transitions[q]) {
            std::string label;
            for (const auto& name : mask_to_names(fsa, t.guard.require))
                label += (label.empty() ? "" : " ") + name;
            for (const auto& name : mask_to_names(fsa, t.guard.forbid))
                label += (label.empty() ? "!" : " !") + name;
            if (label.empty()) label = "*";
            out += "  s" + std::to_string(q) + " -> s" + std::to_string(t.to) +
                   " [label=\"" + label + "\"];\n";
        }
    }
    out += "}\n";
    return out;
}

} // namespace tlswitch
