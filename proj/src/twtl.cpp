#include "tlswitch/twtl.hpp"

#include <algorithm>
#include <cctype>

namespace tlswitch {

ParseError::ParseError(const std::string& msg, std::size_t position)
    : std::runtime_error(msg + " (at position " + std::to_string(position) + ")"),
      pos_(position) {}

namespace {

std::unique_ptr<TwtlNode> make_node(TwtlKind kind) {
    auto n = std::make_unique<TwtlNode>();
    n->kind = kind;
    return n;
}

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    std::unique_ptr<TwtlNode> parse() {
        auto node = parse_concat();
        skip_ws();
        if (pos_ != text_.size())
            throw ParseError("unexpected trailing input", pos_);
        validate(*node);
        return node;
    }

private:
    const std::string& text_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool peek_char(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    bool accept_char(char c) {
        if (peek_char(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect_char(char c) {
        if (!accept_char(c))
            throw ParseError(std::string("expected '") + c + "'", pos_);
    }

    int parse_nat() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        if (pos_ == start)
            throw ParseError("expected a nonnegative integer", pos_);
        long long v = 0;
        for (std::size_t i = start; i < pos_; ++i) {
            v = v * 10 + (text_[i] - '0');
            if (v > 1000000000LL)
                throw ParseError("integer literal too large", start);
        }
        return static_cast<int>(v);
    }

    std::string parse_ident() {
        skip_ws();
        std::size_t start = pos_;
        auto head = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
        auto body = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
        if (pos_ >= text_.size() || !head(text_[pos_]))
            throw ParseError("expected a proposition identifier", pos_);
        ++pos_;
        while (pos_ < text_.size() && body(text_[pos_]))
            ++pos_;
        return text_.substr(start, pos_ - start);
    }

    // concat := boolexpr ('.' boolexpr)*
    std::unique_ptr<TwtlNode> parse_concat() {
        auto node = parse_bool();
        while (accept_char('.')) {
            auto n = make_node(TwtlKind::Concat);
            n->left = std::move(node);
            n->right = parse_bool();
            node = std::move(n);
        }
        return node;
    }

    // boolexpr := unary (('|' | '&') unary)*   — single precedence level
    std::unique_ptr<TwtlNode> parse_bool() {
        auto node = parse_unary();
        for (;;) {
            if (accept_char('|')) {
                auto n = make_node(TwtlKind::Or);
                n->left = std::move(node);
                n->right = parse_unary();
                node = std::move(n);
            } else if (accept_char('&')) {
                auto n = make_node(TwtlKind::And);
                n->left = std::move(node);
                n->right = parse_unary();
                node = std::move(n);
            } else {
                return node;
            }
        }
    }

    std::unique_ptr<TwtlNode> parse_unary() {
        if (accept_char('!')) {
            std::size_t at = pos_ - 1;
            auto n = make_node(TwtlKind::Not);
            n->left = parse_unary();
            if (n->left->kind != TwtlKind::Hold)
                throw ParseError("fragment violation: '!' may only negate a hold", at);
            return n;
        }
        return parse_primary();
    }

    std::unique_ptr<TwtlNode> parse_primary() {
        skip_ws();
        if (pos_ >= text_.size())
            throw ParseError("unexpected end of input", pos_);
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            auto node = parse_concat();
            expect_char(')');
            return node;
        }
        if (c == '[')
            return parse_within();
        if (c == 'H' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '^')
            return parse_hold();
        throw ParseError("expected a hold, a within block, or '('", pos_);
    }

    // hold := 'H' '^' nat '!'? ident
    std::unique_ptr<TwtlNode> parse_hold() {
        pos_ += 2; // consume "H^"
        auto n = make_node(TwtlKind::Hold);
        n->hold_duration = parse_nat();
        if (accept_char('!'))
            n->negated = true;
        n->prop = parse_ident();
        return n;
    }

    // within := '[' concat ']' '^' '[' nat ',' nat ']'
    std::unique_ptr<TwtlNode> parse_within() {
        expect_char('[');
        auto n = make_node(TwtlKind::Within);
        n->left = parse_concat();
        expect_char(']');
        expect_char('^');
        std::size_t win_at = pos_;
        expect_char('[');
        n->window_lo = parse_nat();
        expect_char(',');
        n->window_hi = parse_nat();
        expect_char(']');
        if (n->window_lo > n->window_hi)
            throw ParseError("window requires a <= b", win_at);
        if (time_bound(*n->left) > n->window_hi)
            throw ParseError("window too short: child needs " +
                                 std::to_string(time_bound(*n->left)) + " steps but b = " +
                                 std::to_string(n->window_hi),
                             win_at);
        return n;
    }

    void validate(const TwtlNode& node) {
        if (node.kind == TwtlKind::Not && node.left->kind != TwtlKind::Hold)
            throw ParseError("fragment violation: '!' may only negate a hold", 0);
        if (node.left) validate(*node.left);
        if (node.right) validate(*node.right);
    }
};

} // namespace

TwtlAst parse_twtl(const std::string& text) {
    Parser p(text);
    return TwtlAst{p.parse()};
}

int time_bound(const TwtlNode& node) {
    switch (node.kind) {
    case TwtlKind::Hold:
        return node.hold_duration;
    case TwtlKind::Not:
        return time_bound(*node.left);
    case TwtlKind::And:
    case TwtlKind::Or:
        return std::max(time_bound(*node.left), time_bound(*node.right));
    case TwtlKind::Concat:
        return time_bound(*node.left) + time_bound(*node.right) + 1;
    case TwtlKind::Within:
        return node.window_hi;
    }
    return 0;
}

std::string to_string(const TwtlNode& node) {
    switch (node.kind) {
    case TwtlKind::Hold:
        return "H^" + std::to_string(node.hold_duration) + " " + (node.negated ? "!" : "") +
               node.prop;
    case TwtlKind::Not:
        return "!(" + to_string(*node.left) + ")";
    case TwtlKind::And:
        return "(" + to_string(*node.left) + " & " + to_string(*node.right) + ")";
    case TwtlKind::Or:
        return "(" + to_string(*node.left) + " | " + to_string(*node.right) + ")";
    case TwtlKind::Concat:
        return "(" + to_string(*node.left) + " . " + to_string(*node.right) + ")";
    case TwtlKind::Within:
        return "[" + to_string(*node.left) + "]^[" + std::to_string(node.window_lo) + "," +
               std::to_string(node.window_hi) + "]";
    }
    return "";
}

namespace {
void collect_props_rec(const TwtlNode& node, std::vector<std::string>& out) {
    if (node.kind == TwtlKind::Hold)
        out.push_back(node.prop);
    if (node.left) collect_props_rec(*node.left, out);
    if (node.right) collect_props_rec(*node.right, out);
}
} // namespace

std::vector<std::string> collect_props(const TwtlNode& node) {
    std::vector<std::string> out;
    collect_props_rec(node, out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace tlswitch
