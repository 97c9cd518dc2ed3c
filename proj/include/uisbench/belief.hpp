#pragma once

// Belief functions over finite frames.
//
// A frame is an ordered list of basic events; subsets are bitmasks over it.
// Belief arises two ways: directly from a mass assignment, or induced across
// a compatibility relation from a probability distribution on a source frame.
// The relation route is the interesting one: it is where the all-or-nothing
// character of compatibility produces the discontinuity demonstrated by
// pathology_sweep.

#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "rules.hpp"

namespace uisbench {

class Frame {
public:
    static constexpr int max_events = 16;

    explicit Frame(std::vector<std::string> labels) : labels_(std::move(labels)) {
        if (labels_.empty()) throw Error("a frame needs at least one basic event");
        if (static_cast<int>(labels_.size()) > max_events)
            throw Error("frame exceeds the cap of " + std::to_string(max_events) +
                        " basic events");
        for (std::size_t i = 0; i < labels_.size(); ++i)
            for (std::size_t j = i + 1; j < labels_.size(); ++j)
                if (labels_[i] == labels_[j])
                    throw Error("duplicate basic event '" + labels_[i] + "'");
    }

    int size() const noexcept { return static_cast<int>(labels_.size()); }
    std::uint32_t full_mask() const noexcept {
        return (std::uint32_t{1} << labels_.size()) - 1;
    }
    const std::string& label(int i) const { return labels_.at(static_cast<std::size_t>(i)); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    int index(const std::string& label) const {
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] == label) return static_cast<int>(i);
        throw Error("unknown basic event '" + label + "'");
    }

    std::string subset_name(std::uint32_t mask) const {
        std::string out = "{";
        bool first = true;
        for (int i = 0; i < size(); ++i)
            if (mask & (std::uint32_t{1} << i)) {
                if (!first) out += ", ";
                out += labels_[static_cast<std::size_t>(i)];
                first = false;
            }
        return out + "}";
    }

    bool operator==(const Frame& o) const { return labels_ == o.labels_; }

private:
    std::vector<std::string> labels_;
};

// Mass assignment over a frame's subsets: nonnegative, sums to one, none on
// the empty set.
class MassFunction {
public:
    MassFunction(Frame frame, std::map<std::uint32_t, double> masses)
        : frame_(std::move(frame)), masses_(std::move(masses)) {
        double sum = 0.0;
        for (const auto& [mask, m] : masses_) {
            if (mask > frame_.full_mask()) throw Error("mass on a subset outside the frame");
            if (!(m >= 0.0 && m <= 1.0))
                throw Error("mass must lie in [0, 1], got " + format_number(m));
            if (mask == 0 && m != 0.0) throw Error("mass on the empty set");
            sum += m;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw Error("masses sum to " + format_number(sum) + ", expected 1");
    }

    const Frame& frame() const noexcept { return frame_; }
    const std::map<std::uint32_t, double>& masses() const noexcept { return masses_; }

private:
    Frame frame_;
    std::map<std::uint32_t, double> masses_;
};

class SourceDistribution {
public:
    SourceDistribution(Frame frame, std::vector<double> p)
        : frame_(std::move(frame)), p_(std::move(p)) {
        if (p_.size() != static_cast<std::size_t>(frame_.size()))
            throw Error("source distribution length does not match its frame");
        double sum = 0.0;
        for (double x : p_) {
            if (!(x >= 0.0 && x <= 1.0))
                throw Error("source probability out of range: " + format_number(x));
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw Error("source probabilities sum to " + format_number(sum) + ", expected 1");
    }

    const Frame& frame() const noexcept { return frame_; }
    double p(int s) const { return p_.at(static_cast<std::size_t>(s)); }
    const std::vector<double>& probs() const noexcept { return p_; }

private:
    Frame frame_;
    std::vector<double> p_;
};

// Crisp relation between two frames: compatible_with(s) is the bitmask of
// target events that can co-occur with source event s.  Every source event
// must be possible somewhere.
class CompatibilityRelation {
public:
    CompatibilityRelation(Frame source, Frame target, std::vector<std::uint32_t> compatible)
        : source_(std::move(source)),
          target_(std::move(target)),
          compatible_(std::move(compatible)) {
        if (compatible_.size() != static_cast<std::size_t>(source_.size()))
            throw Error("compatibility table length does not match the source frame");
        for (std::size_t s = 0; s < compatible_.size(); ++s) {
            if (compatible_[s] == 0)
                throw Error("source event '" + source_.label(static_cast<int>(s)) +
                            "' is compatible with nothing");
            if (compatible_[s] > target_.full_mask())
                throw Error("compatibility row outside the target frame");
        }
    }

    const Frame& source() const noexcept { return source_; }
    const Frame& target() const noexcept { return target_; }
    std::uint32_t compatible_with(int s) const {
        return compatible_.at(static_cast<std::size_t>(s));
    }

private:
    Frame source_;
    Frame target_;
    std::vector<std::uint32_t> compatible_;
};

inline double bel_from_masses(const MassFunction& m, std::uint32_t tau) {
    if (tau > m.frame().full_mask()) throw Error("subset outside the frame");
    double bel = 0.0;
    for (const auto& [mask, mass] : m.masses())
        if ((mask & ~tau) == 0) bel += mass;
    return bel;
}

// Belief in tau is the source probability of the events that cannot avoid
// tau: those whose every compatible target lies inside it.
inline double bel_from_compatibility(const SourceDistribution& ps,
                                     const CompatibilityRelation& c, std::uint32_t tau) {
    if (!(ps.frame() == c.source())) throw Error("distribution frame does not match relation");
    if (tau > c.target().full_mask()) throw Error("subset outside the target frame");
    double bel = 0.0;
    for (int s = 0; s < ps.frame().size(); ++s)
        if ((c.compatible_with(s) & ~tau) == 0) bel += ps.p(s);
    return bel;
}

// Equivalent formulation as a maximum over source subsets whose combined
// compatible targets stay inside tau.  The probability-mass objective is
// monotone in the subset, so this agrees with bel_from_compatibility; both
// are kept so the agreement itself can be tested.
inline double bel_from_compatibility_maxform(const SourceDistribution& ps,
                                             const CompatibilityRelation& c,
                                             std::uint32_t tau) {
    if (!(ps.frame() == c.source())) throw Error("distribution frame does not match relation");
    if (tau > c.target().full_mask()) throw Error("subset outside the target frame");
    const int n = ps.frame().size();
    double best = 0.0;
    for (std::uint32_t sigma = 0; sigma < (std::uint32_t{1} << n); ++sigma) {
        double mass = 0.0;
        bool ok = true;
        for (int s = 0; s < n && ok; ++s) {
            if (!(sigma & (std::uint32_t{1} << s))) continue;
            if ((c.compatible_with(s) & ~tau) != 0) ok = false;
            else mass += ps.p(s);
        }
        if (ok && mass > best) best = mass;
    }
    return best;
}

struct BeliefInterval {
    double support = 0.0;
    double plausibility = 1.0;

    BeliefInterval() = default;
    BeliefInterval(double a, double b) : support(a), plausibility(b) {
        if (!(a >= 0.0 && b <= 1.0 && a <= b + 1e-12))
            throw Error("belief interval [" + format_number(a) + ", " + format_number(b) +
                        "] is not ordered within [0, 1]");
        if (plausibility < support) plausibility = support;
    }
};

inline BeliefInterval interval(const SourceDistribution& ps, const CompatibilityRelation& c,
                               std::uint32_t tau) {
    double a = bel_from_compatibility(ps, c, tau);
    double b = 1.0 - bel_from_compatibility(ps, c, c.target().full_mask() & ~tau);
    return BeliefInterval(a, b);
}

// The icy-roads demonstration.  With beta = 0 the first source event commits
// to t1 and carries its 0.8 straight over.  Any beta > 0 makes both source
// events compatible with both targets, and every proper subset's belief
// collapses to zero while Bel(T) stays exactly one.
struct PathologyRow {
    double beta = 0.0;
    double bel_t1 = 0.0;
    double bel_t2 = 0.0;
};

inline std::vector<PathologyRow> pathology_sweep(const std::vector<double>& betas) {
    Frame source({"s1", "s2"});
    Frame target({"t1", "t2"});
    SourceDistribution ps(source, {0.8, 0.2});
    std::vector<PathologyRow> rows;
    for (double beta : betas) {
        if (!(beta >= 0.0 && beta <= 0.2))
            throw Error("beta must lie in [0, 0.2], got " + format_number(beta));
        std::vector<std::uint32_t> compat =
            beta > 0.0 ? std::vector<std::uint32_t>{0b11, 0b11}
                       : std::vector<std::uint32_t>{0b01, 0b11};
        CompatibilityRelation c(source, target, compat);
        PathologyRow row;
        row.beta = beta;
        row.bel_t1 = bel_from_compatibility(ps, c, 0b01);
        row.bel_t2 = bel_from_compatibility(ps, c, 0b10);
        rows.push_back(row);
    }
    return rows;
}

inline void write_pathology_csv(std::ostream& os, const std::vector<PathologyRow>& rows) {
    os << "beta,bel_t1,bel_t2\n";
    for (const auto& r : rows)
        os << format_number(r.beta) << ',' << format_number(r.bel_t1) << ','
           << format_number(r.bel_t2) << '\n';
}

// Text form for belief problems, one statement per line:
//   target t1 t2
//   source s1 s2
//   p(s1) = 0.8
//   mass {t1} = 0.8
//   compat s1 ~ {t1, t2}
struct BeliefSetup {
    std::vector<std::string> source_labels;
    std::vector<std::string> target_labels;
    std::vector<double> source_probs;             // by source event, defaults 0
    std::map<std::uint32_t, double> masses;       // over the target frame
    std::vector<std::uint32_t> compatible;        // by source event, defaults 0

    Frame source_frame() const { return Frame(source_labels); }
    Frame target_frame() const { return Frame(target_labels); }
    SourceDistribution source_distribution() const {
        return SourceDistribution(source_frame(), source_probs);
    }
    CompatibilityRelation relation() const {
        return CompatibilityRelation(source_frame(), target_frame(), compatible);
    }
    MassFunction mass_function() const { return MassFunction(target_frame(), masses); }
};

inline BeliefSetup parse_belief(const std::string& text) {
    using T = detail::Token;
    auto tokens = detail::Lexer(text).run();
    std::size_t pos = 0;
    auto peek = [&]() -> const T& { return tokens[pos]; };
    auto next = [&]() -> const T& { return tokens[pos++]; };
    auto expect = [&](T::Type type, const char* what) -> const T& {
        const T& t = next();
        if (t.type != type)
            throw ParseError(std::string("expected ") + what + ", got '" + t.text + "'",
                             t.line, t.column);
        return t;
    };
    BeliefSetup setup;
    auto target_index = [&](const T& t) {
        for (std::size_t i = 0; i < setup.target_labels.size(); ++i)
            if (setup.target_labels[i] == t.text) return static_cast<int>(i);
        throw ParseError("unknown target event '" + t.text + "'", t.line, t.column);
    };
    auto source_index = [&](const T& t) {
        for (std::size_t i = 0; i < setup.source_labels.size(); ++i)
            if (setup.source_labels[i] == t.text) return static_cast<int>(i);
        throw ParseError("unknown source event '" + t.text + "'", t.line, t.column);
    };
    auto target_set = [&]() {
        expect(T::Type::LBrace, "'{'");
        std::uint32_t mask = 0;
        while (true) {
            const T& t = expect(T::Type::Ident, "an event name");
            mask |= std::uint32_t{1} << target_index(t);
            if (peek().type != T::Type::Comma) break;
            ++pos;
        }
        expect(T::Type::RBrace, "'}'");
        return mask;
    };

    while (peek().type != T::Type::End) {
        if (peek().type == T::Type::Separator) {
            ++pos;
            continue;
        }
        const T& head = expect(T::Type::Ident, "a statement");
        if (head.text == "target" || head.text == "source") {
            auto& labels = head.text == "target" ? setup.target_labels : setup.source_labels;
            if (!labels.empty())
                throw ParseError("duplicate '" + head.text + "' declaration", head.line,
                                 head.column);
            while (peek().type == T::Type::Ident) labels.push_back(next().text);
            if (labels.empty())
                throw ParseError("'" + head.text + "' needs at least one event", head.line,
                                 head.column);
            if (head.text == "source") {
                setup.source_probs.assign(labels.size(), 0.0);
                setup.compatible.assign(labels.size(), 0);
            }
        } else if (head.text == "p") {
            expect(T::Type::LParen, "'('");
            int s = source_index(expect(T::Type::Ident, "a source event"));
            expect(T::Type::RParen, "')'");
            expect(T::Type::Equals, "'='");
            const T& num = expect(T::Type::Number, "a probability");
            setup.source_probs[static_cast<std::size_t>(s)] = num.number;
        } else if (head.text == "mass") {
            std::uint32_t mask = target_set();
            expect(T::Type::Equals, "'='");
            const T& num = expect(T::Type::Number, "a mass");
            if (setup.masses.count(mask))
                throw ParseError("duplicate mass for the same subset", num.line, num.column);
            setup.masses[mask] = num.number;
        } else if (head.text == "compat") {
            int s = source_index(expect(T::Type::Ident, "a source event"));
            expect(T::Type::Tilde, "'~'");
            setup.compatible[static_cast<std::size_t>(s)] |= target_set();
        } else {
            throw ParseError("unknown statement '" + head.text + "'", head.line, head.column);
        }
        if (peek().type != T::Type::End) expect(T::Type::Separator, "end of statement");
    }
    return setup;
}

}  // namespace uisbench
