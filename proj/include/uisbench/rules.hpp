#pragma once

// Propositional rule sets: propositions, Boolean formulas over them,
// probability rules P(F) = v and P(F | G) = v, plus the textual format
// used by rule files and evidence files.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace uisbench {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, int line, int column)
        : Error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                ": " + message),
          line_(line),
          column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

enum class Severity { Error, PropagationOnly };

struct Diagnostic {
    std::string code;
    std::string message;
    Severity severity = Severity::Error;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Diagnostic> diagnostics)
        : Error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    static std::string join(const std::vector<Diagnostic>& ds) {
        std::string out;
        for (const auto& d : ds) {
            if (!out.empty()) out += "; ";
            out += "[" + d.code + "] " + d.message;
        }
        return out.empty() ? std::string("validation failed") : out;
    }

    std::vector<Diagnostic> diagnostics_;
};

// Kinds partition the rule graph: leaves carry evidence and never appear as a
// rule consequent, goals are final conclusions and never appear in an
// antecedent, mids may do both.
enum class PropKind { Leaf, Mid, Goal };

inline const char* prop_kind_name(PropKind k) {
    switch (k) {
        case PropKind::Leaf: return "leaf";
        case PropKind::Mid: return "mid";
        case PropKind::Goal: return "goal";
    }
    return "?";
}

struct Proposition {
    std::string name;
    PropKind kind = PropKind::Leaf;
    bool kind_declared = false;
};

struct Literal {
    int prop = -1;
    bool negated = false;
};

// Boolean formula over proposition indices.  Events are truth assignments
// encoded as bit masks: bit j of an event is the truth value of proposition j.
class Formula {
public:
    enum class Kind { True, Var, Not, And, Or, ExactlyK };

    Formula() : kind_(Kind::True) {}

    static Formula truth() { return Formula(); }

    static Formula var(int prop) {
        Formula f;
        f.kind_ = Kind::Var;
        f.var_ = prop;
        return f;
    }

    static Formula negation(Formula operand) {
        Formula f;
        f.kind_ = Kind::Not;
        f.children_.push_back(std::move(operand));
        return f;
    }

    static Formula conj(Formula a, Formula b) {
        Formula f;
        f.kind_ = Kind::And;
        f.children_.push_back(std::move(a));
        f.children_.push_back(std::move(b));
        return f;
    }

    static Formula disj(Formula a, Formula b) {
        Formula f;
        f.kind_ = Kind::Or;
        f.children_.push_back(std::move(a));
        f.children_.push_back(std::move(b));
        return f;
    }

    static Formula exactly(int k, std::vector<int> group) {
        Formula f;
        f.kind_ = Kind::ExactlyK;
        f.k_ = k;
        f.group_ = std::move(group);
        return f;
    }

    Kind kind() const noexcept { return kind_; }
    int var() const noexcept { return var_; }
    int exact_count() const noexcept { return k_; }
    const std::vector<int>& group() const noexcept { return group_; }
    const std::vector<Formula>& children() const noexcept { return children_; }

    bool is_true() const noexcept { return kind_ == Kind::True; }

    bool eval(std::uint32_t event) const {
        switch (kind_) {
            case Kind::True:
                return true;
            case Kind::Var:
                return (event >> var_) & 1u;
            case Kind::Not:
                return !children_[0].eval(event);
            case Kind::And:
                return children_[0].eval(event) && children_[1].eval(event);
            case Kind::Or:
                return children_[0].eval(event) || children_[1].eval(event);
            case Kind::ExactlyK: {
                int n = 0;
                for (int p : group_) n += static_cast<int>((event >> p) & 1u);
                return n == k_;
            }
        }
        return false;
    }

    // Index of the single positive proposition this formula names, if any.
    std::optional<int> single_prop() const {
        if (kind_ == Kind::Var) return var_;
        return std::nullopt;
    }

    // Literal list when the formula is a pure conjunction of (possibly
    // negated) propositions; empty optional otherwise.
    std::optional<std::vector<Literal>> conjunctive_literals() const {
        std::vector<Literal> out;
        if (collect_literals(out)) return out;
        return std::nullopt;
    }

    void referenced_props(std::set<int>& into) const {
        switch (kind_) {
            case Kind::True:
                break;
            case Kind::Var:
                into.insert(var_);
                break;
            case Kind::ExactlyK:
                into.insert(group_.begin(), group_.end());
                break;
            default:
                for (const auto& c : children_) c.referenced_props(into);
        }
    }

    int max_prop_index() const {
        std::set<int> props;
        referenced_props(props);
        return props.empty() ? -1 : *props.rbegin();
    }

    bool operator==(const Formula& o) const {
        if (kind_ != o.kind_) return false;
        switch (kind_) {
            case Kind::True:
                return true;
            case Kind::Var:
                return var_ == o.var_;
            case Kind::ExactlyK:
                return k_ == o.k_ && group_ == o.group_;
            default:
                return children_ == o.children_;
        }
    }

    bool operator!=(const Formula& o) const { return !(*this == o); }

private:
    bool collect_literals(std::vector<Literal>& out) const {
        switch (kind_) {
            case Kind::Var:
                out.push_back({var_, false});
                return true;
            case Kind::Not:
                if (auto p = children_[0].single_prop()) {
                    out.push_back({*p, true});
                    return true;
                }
                return false;
            case Kind::And:
                return children_[0].collect_literals(out) && children_[1].collect_literals(out);
            default:
                return false;
        }
    }

    Kind kind_;
    int var_ = -1;
    int k_ = 0;
    std::vector<int> group_;
    std::vector<Formula> children_;
};

// A probability statement.  An antecedent of TRUE encodes an unconditional
// statement P(consequent) = strength; otherwise P(consequent | antecedent).
struct Rule {
    Formula consequent;
    Formula antecedent;
    double strength = 0.0;
    int source_line = 0;

    bool unconditional() const { return antecedent.is_true(); }

    bool operator==(const Rule& o) const {
        return consequent == o.consequent && antecedent == o.antecedent &&
               strength == o.strength;
    }
};

struct RuleSet {
    std::vector<Proposition> props;
    std::vector<Rule> rules;
    std::map<int, double> priors;  // unconditional single-proposition statements

    int prop_index(const std::string& name) const {
        for (std::size_t i = 0; i < props.size(); ++i)
            if (props[i].name == name) return static_cast<int>(i);
        return -1;
    }

    const std::string& prop_name(int i) const { return props.at(i).name; }

    bool operator==(const RuleSet& o) const {
        if (props.size() != o.props.size() || rules.size() != o.rules.size()) return false;
        for (std::size_t i = 0; i < props.size(); ++i)
            if (props[i].name != o.props[i].name || props[i].kind != o.props[i].kind)
                return false;
        return rules == o.rules && priors == o.priors;
    }
};

struct Evidence {
    std::map<int, double> values;  // leaf proposition index -> probability
};

// ---------------------------------------------------------------------------
// Kind resolution.

// A rule takes part in propagation when it is conditional, concludes a single
// positive proposition, and its antecedent is a conjunction of literals.
inline bool propagation_shaped(const Rule& r) {
    return !r.unconditional() && r.consequent.single_prop().has_value() &&
           r.antecedent.conjunctive_literals().has_value();
}

inline std::vector<PropKind> infer_kinds(const RuleSet& rs) {
    const int n = static_cast<int>(rs.props.size());
    std::vector<bool> is_consequent(rs.props.size(), false);
    std::vector<bool> in_antecedent(rs.props.size(), false);
    for (const auto& r : rs.rules) {
        if (!propagation_shaped(r)) continue;
        int c = *r.consequent.single_prop();
        if (c >= 0 && c < n) is_consequent[static_cast<std::size_t>(c)] = true;
        auto lits = r.antecedent.conjunctive_literals();
        for (const auto& lit : *lits)
            if (lit.prop >= 0 && lit.prop < n)
                in_antecedent[static_cast<std::size_t>(lit.prop)] = true;
    }
    std::vector<PropKind> kinds(rs.props.size(), PropKind::Leaf);
    for (std::size_t i = 0; i < rs.props.size(); ++i) {
        if (is_consequent[i])
            kinds[i] = in_antecedent[i] ? PropKind::Mid : PropKind::Goal;
        else
            kinds[i] = PropKind::Leaf;
    }
    return kinds;
}

// Fill in undeclared kinds from the rule topology.  Declared kinds win;
// validate() reports the cases where a declaration contradicts the topology.
inline void resolve_kinds(RuleSet& rs) {
    auto inferred = infer_kinds(rs);
    for (std::size_t i = 0; i < rs.props.size(); ++i)
        if (!rs.props[i].kind_declared) rs.props[i].kind = inferred[i];
}

// ---------------------------------------------------------------------------
// Cycle detection over the propagation-shaped rules.

// Returns one cycle (as prop indices, first element repeated at the end is
// omitted), rotated so it starts at the smallest-named proposition.
inline std::optional<std::vector<int>> find_propagation_cycle(const RuleSet& rs) {
    const int n = static_cast<int>(rs.props.size());
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const auto& r : rs.rules) {
        if (!propagation_shaped(r)) continue;
        int c = *r.consequent.single_prop();
        if (c < 0 || c >= n) continue;
        auto lits = r.antecedent.conjunctive_literals();
        for (const auto& lit : *lits)
            if (lit.prop >= 0 && lit.prop < n)
                adj[static_cast<std::size_t>(lit.prop)].push_back(c);
    }
    std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 new, 1 open, 2 done
    std::vector<int> stack;
    std::optional<std::vector<int>> found;

    auto dfs = [&](auto&& self, int u) -> bool {
        state[static_cast<std::size_t>(u)] = 1;
        stack.push_back(u);
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (found) return true;
            if (state[static_cast<std::size_t>(v)] == 1) {
                auto it = std::find(stack.begin(), stack.end(), v);
                found = std::vector<int>(it, stack.end());
                return true;
            }
            if (state[static_cast<std::size_t>(v)] == 0 && self(self, v)) return true;
        }
        stack.pop_back();
        state[static_cast<std::size_t>(u)] = 2;
        return false;
    };
    for (int u = 0; u < n && !found; ++u)
        if (state[static_cast<std::size_t>(u)] == 0) dfs(dfs, u);

    if (!found) return std::nullopt;
    // Canonical rotation: start at the lexicographically smallest name so the
    // diagnostic does not depend on rule order.
    auto& cyc = *found;
    std::size_t best = 0;
    for (std::size_t i = 1; i < cyc.size(); ++i)
        if (rs.props[static_cast<std::size_t>(cyc[i])].name <
            rs.props[static_cast<std::size_t>(cyc[best])].name)
            best = i;
    std::rotate(cyc.begin(), cyc.begin() + static_cast<std::ptrdiff_t>(best), cyc.end());
    return found;
}

// ---------------------------------------------------------------------------
// Validation.

inline std::vector<Diagnostic> validate(const RuleSet& rs) {
    std::vector<Diagnostic> out;
    const int n = static_cast<int>(rs.props.size());

    {
        std::set<std::string> seen;
        for (const auto& p : rs.props)
            if (!seen.insert(p.name).second)
                out.push_back({"duplicate-proposition",
                               "proposition '" + p.name + "' declared more than once",
                               Severity::Error});
    }

    auto check_range = [&](double v, const std::string& what) {
        if (!(v >= 0.0 && v <= 1.0))
            out.push_back({"probability-out-of-range",
                           what + " = " + std::to_string(v) + " is outside [0, 1]",
                           Severity::Error});
    };

    std::map<int, int> prior_count;
    for (std::size_t ri = 0; ri < rs.rules.size(); ++ri) {
        const Rule& r = rs.rules[ri];
        std::set<int> used;
        r.consequent.referenced_props(used);
        r.antecedent.referenced_props(used);
        for (int p : used)
            if (p < 0 || p >= n)
                out.push_back({"unknown-proposition",
                               "rule " + std::to_string(ri) + " references proposition index " +
                                   std::to_string(p) + " outside the declared set",
                               Severity::Error});
        check_range(r.strength, "rule " + std::to_string(ri) + " probability");
        if (r.unconditional())
            if (auto p = r.consequent.single_prop(); p && *p >= 0 && *p < n)
                ++prior_count[*p];

        // exactly-k groups must be well formed wherever they appear
        auto check_exactly = [&](auto&& self, const Formula& f) -> void {
            if (f.kind() == Formula::Kind::ExactlyK) {
                std::set<int> distinct(f.group().begin(), f.group().end());
                if (f.group().empty() || distinct.size() != f.group().size() ||
                    f.exact_count() < 0 ||
                    f.exact_count() > static_cast<int>(f.group().size()))
                    out.push_back({"exactly-k-range",
                                   "rule " + std::to_string(ri) +
                                       " has a malformed exactly-k group",
                                   Severity::Error});
            }
            for (const auto& c : f.children()) self(self, c);
        };
        check_exactly(check_exactly, r.consequent);
        check_exactly(check_exactly, r.antecedent);
    }
    for (const auto& [p, cnt] : prior_count)
        if (cnt > 1 && p >= 0 && p < n)
            out.push_back({"duplicate-prior",
                           "proposition '" + rs.props[static_cast<std::size_t>(p)].name +
                               "' has more than one unconditional probability",
                           Severity::Error});
    for (const auto& [p, v] : rs.priors) {
        if (p < 0 || p >= n) continue;
        check_range(v, "prior of '" + rs.props[static_cast<std::size_t>(p)].name + "'");
    }

    // Declared kinds against topology: a leaf is never concluded, a goal is
    // never used as evidence for something else.
    for (const auto& r : rs.rules) {
        if (!propagation_shaped(r)) continue;
        int c = *r.consequent.single_prop();
        if (c >= 0 && c < n && rs.props[static_cast<std::size_t>(c)].kind_declared &&
            rs.props[static_cast<std::size_t>(c)].kind == PropKind::Leaf)
            out.push_back({"kind-mismatch",
                           "proposition '" + rs.props[static_cast<std::size_t>(c)].name +
                               "' is declared leaf but appears as a rule consequent",
                           Severity::Error});
        auto lits = r.antecedent.conjunctive_literals();
        for (const auto& lit : *lits) {
            int a = lit.prop;
            if (a >= 0 && a < n && rs.props[static_cast<std::size_t>(a)].kind_declared &&
                rs.props[static_cast<std::size_t>(a)].kind == PropKind::Goal)
                out.push_back({"kind-mismatch",
                               "proposition '" + rs.props[static_cast<std::size_t>(a)].name +
                                   "' is declared goal but appears in an antecedent",
                               Severity::Error});
        }
    }

    if (auto cyc = find_propagation_cycle(rs)) {
        std::string path;
        for (int p : *cyc) {
            if (!path.empty()) path += " -> ";
            path += rs.props[static_cast<std::size_t>(p)].name;
        }
        path += " -> " + rs.props[static_cast<std::size_t>((*cyc)[0])].name;
        out.push_back({"cycle",
                       "rule graph contains the cycle " + path +
                           "; usable by the exact reference only, not by propagation engines",
                       Severity::PropagationOnly});
    }

    std::sort(out.begin(), out.end(), [](const Diagnostic& a, const Diagnostic& b) {
        return std::tie(a.code, a.message) < std::tie(b.code, b.message);
    });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const Diagnostic& a, const Diagnostic& b) {
                              return a.code == b.code && a.message == b.message;
                          }),
              out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Rendering.  render(parse(text)) produces a structurally equal rule set.

inline std::string format_number(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string render_formula(const RuleSet& rs, const Formula& f) {
    using K = Formula::Kind;
    // Parenthesize a child when its binding is not strictly tighter than the
    // parent's; right operands also get parens at equal precedence so that
    // arbitrary tree shapes survive a render/parse round trip.
    auto prec = [](K k) {
        switch (k) {
            case K::Or: return 1;
            case K::And: return 2;
            default: return 3;
        }
    };
    auto render = [&](auto&& self, const Formula& g) -> std::string {
        switch (g.kind()) {
            case K::True:
                return "true";  // never produced by the parser; programmatic only
            case K::Var:
                return rs.prop_name(g.var());
            case K::Not: {
                const Formula& c = g.children()[0];
                std::string body = self(self, c);
                if (prec(c.kind()) < 3) body = "(" + body + ")";
                return "~" + body;
            }
            case K::And:
            case K::Or: {
                const char* op = g.kind() == K::And ? " & " : " or ";
                const Formula& l = g.children()[0];
                const Formula& r = g.children()[1];
                std::string ls = self(self, l);
                std::string rr = self(self, r);
                if (prec(l.kind()) < prec(g.kind())) ls = "(" + ls + ")";
                if (prec(r.kind()) <= prec(g.kind())) rr = "(" + rr + ")";
                return ls + op + rr;
            }
            case K::ExactlyK: {
                std::string body = "exactly " + std::to_string(g.exact_count()) + " of {";
                for (std::size_t i = 0; i < g.group().size(); ++i) {
                    if (i) body += ", ";
                    body += rs.prop_name(g.group()[i]);
                }
                return body + "}";
            }
        }
        return "?";
    };
    return render(render, f);
}

inline std::string render_rule(const RuleSet& rs, const Rule& r) {
    std::string out = "P(" + render_formula(rs, r.consequent);
    if (!r.unconditional()) out += " | " + render_formula(rs, r.antecedent);
    return out + ") = " + format_number(r.strength);
}

inline std::string render_ruleset(const RuleSet& rs) {
    std::string out;
    for (const auto& p : rs.props)
        out += "prop " + p.name + " " + prop_kind_name(p.kind) + "\n";
    for (const auto& r : rs.rules) out += render_rule(rs, r) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

struct Token {
    enum class Type {
        Ident,
        Number,
        LParen,
        RParen,
        LBrace,
        RBrace,
        Comma,
        Bar,
        Amp,
        Tilde,
        Equals,
        Separator,  // ';' or newline
        DotDot,
        End
    };
    Type type = Type::End;
    std::string text;
    double number = 0.0;
    int line = 0;
    int column = 0;
};

class Lexer {
public:
    explicit Lexer(const std::string& text) : text_(text) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
                continue;
            }
            if (c == '\n') {
                push(out, Token::Type::Separator, "\n");
                advance();
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r') {
                advance();
                continue;
            }
            if (c == ';') {
                push(out, Token::Type::Separator, ";");
                advance();
                continue;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                lex_ident(out);
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && pos_ + 1 < text_.size() &&
                 std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
                lex_number(out);
                continue;
            }
            switch (c) {
                case '(': push(out, Token::Type::LParen, "("); break;
                case ')': push(out, Token::Type::RParen, ")"); break;
                case '{': push(out, Token::Type::LBrace, "{"); break;
                case '}': push(out, Token::Type::RBrace, "}"); break;
                case ',': push(out, Token::Type::Comma, ","); break;
                case '|': push(out, Token::Type::Bar, "|"); break;
                case '&': push(out, Token::Type::Amp, "&"); break;
                case '~': push(out, Token::Type::Tilde, "~"); break;
                case '=': push(out, Token::Type::Equals, "="); break;
                case '.':
                    if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '.') {
                        push(out, Token::Type::DotDot, "..");
                        advance();
                        break;
                    }
                    throw ParseError("unexpected character '.'", line_, col_);
                default:
                    throw ParseError(std::string("unexpected character '") + c + "'", line_,
                                     col_);
            }
            advance();
        }
        Token end;
        end.type = Token::Type::End;
        end.line = line_;
        end.column = col_;
        out.push_back(end);
        return out;
    }

private:
    void push(std::vector<Token>& out, Token::Type t, std::string text) {
        Token tok;
        tok.type = t;
        tok.text = std::move(text);
        tok.line = line_;
        tok.column = col_;
        out.push_back(std::move(tok));
    }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void lex_ident(std::vector<Token>& out) {
        int line = line_, col = col_;
        std::string s;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            s += text_[pos_];
            advance();
        }
        Token tok;
        tok.type = Token::Type::Ident;
        tok.text = std::move(s);
        tok.line = line;
        tok.column = col;
        out.push_back(std::move(tok));
    }

    void lex_number(std::vector<Token>& out) {
        int line = line_, col = col_;
        std::string s;
        bool dot = false;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c))) {
                s += c;
                advance();
            } else if (c == '.' && !dot && pos_ + 1 < text_.size() && text_[pos_ + 1] != '.') {
                dot = true;
                s += c;
                advance();
            } else {
                break;
            }
        }
        double value = 0.0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), value);
        if (res.ec != std::errc())
            throw ParseError("malformed number '" + s + "'", line, col);
        if (pos_ < text_.size() && text_[pos_] == '%') {
            value /= 100.0;
            advance();
        }
        Token tok;
        tok.type = Token::Type::Number;
        tok.text = std::move(s);
        tok.number = value;
        tok.line = line;
        tok.column = col;
        out.push_back(std::move(tok));
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class RuleParser {
public:
    explicit RuleParser(const std::string& text) : tokens_(Lexer(text).run()) {}

    RuleSet run() {
        RuleSet rs;
        skip_separators();
        while (!at(Token::Type::End)) {
            statement(rs);
            if (!at(Token::Type::End)) expect_separator();
            skip_separators();
        }
        resolve_kinds(rs);
        std::vector<Diagnostic> hard;
        for (auto& d : validate(rs))
            if (d.severity == Severity::Error) hard.push_back(std::move(d));
        if (!hard.empty()) throw ValidationError(std::move(hard));
        return rs;
    }

private:
    const Token& cur() const { return tokens_[pos_]; }

    bool at(Token::Type t) const { return cur().type == t; }

    const Token& take() { return tokens_[pos_++]; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, cur().line, cur().column);
    }

    void expect_separator() {
        if (!at(Token::Type::Separator)) fail("expected end of statement");
        take();
    }

    void skip_separators() {
        while (at(Token::Type::Separator)) take();
    }

    void statement(RuleSet& rs) {
        if (!at(Token::Type::Ident)) fail("expected 'prop' or 'P('");
        if (cur().text == "prop") {
            take();
            prop_statement(rs);
        } else if (cur().text == "P") {
            take();
            rule_statement(rs);
        } else {
            fail("expected 'prop' or 'P(', got '" + cur().text + "'");
        }
    }

    void declare(RuleSet& rs, const std::string& name, std::optional<PropKind> kind,
                 const Token& where) {
        if (rs.prop_index(name) >= 0)
            throw ParseError("proposition '" + name + "' declared more than once",
                             where.line, where.column);
        Proposition p;
        p.name = name;
        if (kind) {
            p.kind = *kind;
            p.kind_declared = true;
        }
        rs.props.push_back(std::move(p));
    }

    void prop_statement(RuleSet& rs) {
        if (!at(Token::Type::Ident)) fail("expected proposition name");
        Token first = take();
        std::vector<std::string> names;
        if (at(Token::Type::DotDot)) {
            take();
            if (!at(Token::Type::Ident)) fail("expected range end name");
            Token last = take();
            // Range sugar covers single-letter runs: prop A..D
            if (first.text.size() != 1 || last.text.size() != 1 ||
                last.text[0] < first.text[0])
                throw ParseError("range must run between single letters in order",
                                 first.line, first.column);
            for (char c = first.text[0]; c <= last.text[0]; ++c)
                names.emplace_back(1, c);
        } else {
            names.push_back(first.text);
        }
        std::optional<PropKind> kind;
        if (at(Token::Type::Ident)) {
            const std::string& k = cur().text;
            if (k == "leaf")
                kind = PropKind::Leaf;
            else if (k == "mid")
                kind = PropKind::Mid;
            else if (k == "goal")
                kind = PropKind::Goal;
            else
                fail("expected kind 'leaf', 'mid' or 'goal', got '" + k + "'");
            take();
        }
        for (const auto& n : names) declare(rs, n, kind, first);
    }

    void rule_statement(RuleSet& rs) {
        if (!at(Token::Type::LParen)) fail("expected '(' after P");
        take();
        Rule r;
        r.source_line = cur().line;
        r.consequent = formula(rs);
        if (at(Token::Type::Bar)) {
            take();
            r.antecedent = formula(rs);
        } else {
            r.antecedent = Formula::truth();
        }
        if (!at(Token::Type::RParen)) fail("expected ')'");
        take();
        if (!at(Token::Type::Equals)) fail("expected '='");
        take();
        if (!at(Token::Type::Number)) fail("expected probability value");
        Token num = take();
        if (!(num.number >= 0.0 && num.number <= 1.0))
            throw ParseError("probability " + num.text + " is outside [0, 1]", num.line,
                             num.column);
        r.strength = num.number;
        if (r.unconditional()) {
            if (auto p = r.consequent.single_prop()) {
                if (rs.priors.count(*p))
                    throw ParseError("duplicate prior for proposition '" + rs.prop_name(*p) +
                                         "'",
                                     num.line, num.column);
                rs.priors[*p] = r.strength;
            }
        }
        rs.rules.push_back(std::move(r));
    }

    Formula formula(RuleSet& rs) { return or_expr(rs); }

    Formula or_expr(RuleSet& rs) {
        Formula f = and_expr(rs);
        while (at(Token::Type::Ident) && cur().text == "or") {
            take();
            f = Formula::disj(std::move(f), and_expr(rs));
        }
        return f;
    }

    Formula and_expr(RuleSet& rs) {
        Formula f = unary(rs);
        while (at(Token::Type::Amp)) {
            take();
            f = Formula::conj(std::move(f), unary(rs));
        }
        return f;
    }

    Formula unary(RuleSet& rs) {
        if (at(Token::Type::Tilde)) {
            take();
            return Formula::negation(unary(rs));
        }
        return atom(rs);
    }

    int prop_ref(RuleSet& rs) {
        if (!at(Token::Type::Ident)) fail("expected proposition name");
        Token t = take();
        int idx = rs.prop_index(t.text);
        if (idx < 0)
            throw ParseError("unknown proposition '" + t.text + "'", t.line, t.column);
        return idx;
    }

    Formula atom(RuleSet& rs) {
        if (at(Token::Type::LParen)) {
            take();
            Formula f = or_expr(rs);
            if (!at(Token::Type::RParen)) fail("expected ')'");
            take();
            return f;
        }
        if (at(Token::Type::Ident) && cur().text == "exactly") {
            Token kw = take();
            if (!at(Token::Type::Number)) fail("expected count after 'exactly'");
            Token num = take();
            int k = static_cast<int>(num.number);
            if (num.text.find('.') != std::string::npos || k < 0)
                throw ParseError("count must be a non-negative integer", num.line,
                                 num.column);
            if (!at(Token::Type::Ident) || cur().text != "of") fail("expected 'of'");
            take();
            if (!at(Token::Type::LBrace)) fail("expected '{'");
            take();
            std::vector<int> group;
            group.push_back(prop_ref(rs));
            while (at(Token::Type::Comma)) {
                take();
                group.push_back(prop_ref(rs));
            }
            if (!at(Token::Type::RBrace)) fail("expected '}'");
            take();
            std::set<int> distinct(group.begin(), group.end());
            if (distinct.size() != group.size() || k > static_cast<int>(group.size()))
                throw ParseError("malformed exactly-k group", kw.line, kw.column);
            return Formula::exactly(k, std::move(group));
        }
        return Formula::var(prop_ref(rs));
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline RuleSet parse_ruleset(const std::string& text) {
    return detail::RuleParser(text).run();
}

inline Evidence parse_evidence(const std::string& text, const RuleSet& rs) {
    using detail::Token;
    auto tokens = detail::Lexer(text).run();
    Evidence ev;
    std::size_t pos = 0;
    auto at = [&](Token::Type t) { return tokens[pos].type == t; };
    auto skip = [&] {
        while (at(Token::Type::Separator)) ++pos;
    };
    skip();
    while (!at(Token::Type::End)) {
        const Token& name = tokens[pos];
        if (name.type != Token::Type::Ident)
            throw ParseError("expected leaf proposition name", name.line, name.column);
        ++pos;
        int idx = rs.prop_index(name.text);
        if (idx < 0)
            throw ParseError("unknown proposition '" + name.text + "'", name.line,
                             name.column);
        if (rs.props[static_cast<std::size_t>(idx)].kind != PropKind::Leaf)
            throw ParseError("proposition '" + name.text + "' is not a leaf", name.line,
                             name.column);
        if (!at(Token::Type::Equals))
            throw ParseError("expected '='", tokens[pos].line, tokens[pos].column);
        ++pos;
        if (!at(Token::Type::Number))
            throw ParseError("expected probability value", tokens[pos].line,
                             tokens[pos].column);
        const Token& num = tokens[pos];
        ++pos;
        if (!(num.number >= 0.0 && num.number <= 1.0))
            throw ParseError("probability " + num.text + " is outside [0, 1]", num.line,
                             num.column);
        if (ev.values.count(idx))
            throw ParseError("duplicate evidence for '" + name.text + "'", name.line,
                             name.column);
        ev.values[idx] = num.number;
        if (!at(Token::Type::End)) {
            if (!at(Token::Type::Separator))
                throw ParseError("expected end of statement", tokens[pos].line,
                                 tokens[pos].column);
            skip();
        }
    }
    return ev;
}

inline std::string render_evidence(const RuleSet& rs, const Evidence& ev) {
    std::string out;
    for (const auto& [p, v] : ev.values)
        out += rs.prop_name(p) + " = " + format_number(v) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Propagation view: the subset of rules usable by stepwise engines, plus the
// processing order.  Rules outside that subset (global constraints, complex
// consequents) are listed as notices; the exact reference still uses them.

struct PropagationView {
    std::vector<int> usable_rules;                // indices into rs.rules
    std::vector<std::vector<int>> rules_for_prop; // usable rules per consequent
    std::vector<int> order;                       // non-leaf props, dependency order
    std::vector<std::string> notices;
};

inline PropagationView make_propagation_view(const RuleSet& rs) {
    PropagationView view;
    view.rules_for_prop.resize(rs.props.size());
    for (std::size_t ri = 0; ri < rs.rules.size(); ++ri) {
        const Rule& r = rs.rules[ri];
        if (r.unconditional()) {
            if (!r.consequent.single_prop())
                view.notices.push_back("rule '" + render_rule(rs, r) +
                                       "' constrains several propositions at once; used by "
                                       "the exact reference only");
            continue;  // single-prop unconditionals are priors, not steps
        }
        if (!propagation_shaped(r)) {
            view.notices.push_back("rule '" + render_rule(rs, r) +
                                   "' is not a literal-conjunction rule with a single "
                                   "consequent; used by the exact reference only");
            continue;
        }
        view.usable_rules.push_back(static_cast<int>(ri));
        view.rules_for_prop[static_cast<std::size_t>(*r.consequent.single_prop())]
            .push_back(static_cast<int>(ri));
    }

    if (auto cyc = find_propagation_cycle(rs)) {
        std::string path;
        for (int p : *cyc) {
            if (!path.empty()) path += " -> ";
            path += rs.prop_name(p);
        }
        throw ValidationError({{"cycle",
                                "propagation requires an acyclic rule graph (cycle: " +
                                    path + ")",
                                Severity::Error}});
    }

    // Kahn ordering restricted to props that are rule consequents.
    const int n = static_cast<int>(rs.props.size());
    std::vector<int> indegree(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<int>> deps(static_cast<std::size_t>(n));
    for (int ri : view.usable_rules) {
        const Rule& r = rs.rules[static_cast<std::size_t>(ri)];
        int c = *r.consequent.single_prop();
        auto lits = r.antecedent.conjunctive_literals();
        for (const auto& lit : *lits)
            deps[static_cast<std::size_t>(lit.prop)].push_back(c);
    }
    std::vector<bool> is_node(static_cast<std::size_t>(n), false);
    for (int p = 0; p < n; ++p)
        is_node[static_cast<std::size_t>(p)] =
            rs.props[static_cast<std::size_t>(p)].kind != PropKind::Leaf;
    for (int p = 0; p < n; ++p)
        for (int c : deps[static_cast<std::size_t>(p)])
            if (is_node[static_cast<std::size_t>(p)])
                ++indegree[static_cast<std::size_t>(c)];
    std::vector<int> ready;
    for (int p = 0; p < n; ++p)
        if (is_node[static_cast<std::size_t>(p)] && indegree[static_cast<std::size_t>(p)] == 0)
            ready.push_back(p);
    while (!ready.empty()) {
        int p = ready.front();
        ready.erase(ready.begin());
        view.order.push_back(p);
        for (int c : deps[static_cast<std::size_t>(p)])
            if (--indegree[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
    }
    return view;
}

}  // namespace uisbench
