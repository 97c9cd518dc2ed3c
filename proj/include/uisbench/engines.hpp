#pragma once

// The approximate inference engines.
//
// Four point-valued calculi (maxc, fst, minc, ind) share the probabilistic
// combinator interface; fst is maxc under a membership-as-probability reading
// and the two never differ numerically.  The certainty-factor engine (mycin)
// works on a [-1, 1] scale anchored at each proposition's prior and needs
// those priors to convert in and out.  The belief-interval engine (dst) has
// no point combinators at all; its propagation tracks which propositions are
// settled definitively and leaves everything else at the vacuous interval.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rules.hpp"

namespace uisbench {

enum class EngineKind { MaxC, Fst, MinC, Ind, Mycin, Dst };

inline const char* engine_name(EngineKind kind) {
    switch (kind) {
        case EngineKind::MaxC: return "maxc";
        case EngineKind::Fst: return "fst";
        case EngineKind::MinC: return "minc";
        case EngineKind::Ind: return "ind";
        case EngineKind::Mycin: return "mycin";
        case EngineKind::Dst: return "dst";
    }
    return "?";
}

inline EngineKind parse_engine_kind(std::string name) {
    for (char& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (name == "maxc") return EngineKind::MaxC;
    if (name == "fst") return EngineKind::Fst;
    if (name == "minc") return EngineKind::MinC;
    if (name == "ind") return EngineKind::Ind;
    if (name == "mycin" || name == "myc") return EngineKind::Mycin;
    if (name == "dst") return EngineKind::Dst;
    throw Error("unknown engine '" + name + "' (expected fst, maxc, minc, ind, mycin, or dst)");
}

namespace detail {
inline void check_unit(double x, const char* what) {
    if (!(x >= 0.0 && x <= 1.0))
        throw Error(std::string(what) + " must lie in [0, 1], got " + format_number(x));
}
inline void check_point_engine(EngineKind kind) {
    if (kind == EngineKind::Mycin)
        throw Error("the certainty-factor engine has no probability combinators; work in cf space");
    if (kind == EngineKind::Dst)
        throw Error("the belief-interval engine has no point combinators");
}
}  // namespace detail

inline double conj(EngineKind kind, double pa, double pb) {
    detail::check_point_engine(kind);
    detail::check_unit(pa, "conj operand");
    detail::check_unit(pb, "conj operand");
    switch (kind) {
        case EngineKind::MaxC:
        case EngineKind::Fst: return std::min(pa, pb);
        case EngineKind::MinC: return std::max(0.0, pa + pb - 1.0);
        default: return pa * pb;
    }
}

inline double disj(EngineKind kind, double pa, double pb) {
    detail::check_point_engine(kind);
    detail::check_unit(pa, "disj operand");
    detail::check_unit(pb, "disj operand");
    switch (kind) {
        case EngineKind::MaxC:
        case EngineKind::Fst: return std::max(pa, pb);
        case EngineKind::MinC: return std::min(1.0, pa + pb);
        default: return pa + pb - pa * pb;
    }
}

// Certainty factor: 0 is the prior, +1 certain truth, -1 certain falsity.
class CertaintyFactor {
public:
    CertaintyFactor() = default;
    explicit CertaintyFactor(double value) : value_(value) {
        if (!(value >= -1.0 && value <= 1.0))
            throw Error("certainty factor must lie in [-1, 1], got " + format_number(value));
    }
    double value() const noexcept { return value_; }
    CertaintyFactor operator-() const { return CertaintyFactor(-value_); }

private:
    double value_ = 0.0;
};

// Piecewise-linear bridge between probabilities and certainty factors,
// anchored at (0, -1), (prior, 0), (1, +1).
inline CertaintyFactor cf_from_prob(double p, double prior) {
    detail::check_unit(p, "probability");
    if (!(prior > 0.0 && prior < 1.0))
        throw Error("certainty-factor conversion needs a prior strictly inside (0, 1), got " +
                    format_number(prior));
    if (p >= prior) return CertaintyFactor((p - prior) / (1.0 - prior));
    return CertaintyFactor((p - prior) / prior);
}

inline double prob_from_cf(CertaintyFactor cf, double prior) {
    if (!(prior > 0.0 && prior < 1.0))
        throw Error("certainty-factor conversion needs a prior strictly inside (0, 1), got " +
                    format_number(prior));
    double c = cf.value();
    if (c >= 0.0) return prior + c * (1.0 - prior);
    return prior + c * prior;
}

inline CertaintyFactor mycin_combine(CertaintyFactor cfx, CertaintyFactor cfy) {
    double x = cfx.value(), y = cfy.value();
    if ((x == 1.0 && y == -1.0) || (x == -1.0 && y == 1.0))
        throw Error("cannot combine certain truth with certain falsity");
    if (x >= 0.0 && y >= 0.0) return CertaintyFactor(x + y * (1.0 - x));
    if (x <= 0.0 && y <= 0.0) return CertaintyFactor(x + y * (1.0 + x));
    return CertaintyFactor((x + y) / (1.0 - std::min(std::abs(x), std::abs(y))));
}

inline CertaintyFactor cf_conj(CertaintyFactor a, CertaintyFactor b) {
    return CertaintyFactor(std::min(a.value(), b.value()));
}
inline CertaintyFactor cf_disj(CertaintyFactor a, CertaintyFactor b) {
    return CertaintyFactor(std::max(a.value(), b.value()));
}

// Probabilistic modus ponens: P(B) from P(A) and the rule strength P(B|A).
// Each engine fills in P(B|not A) per its correlation assumption; the cf
// engine instead attenuates the rule's cf by the antecedent's cf, so that
// certain antecedents yield the strength and absent evidence yields the
// prior.
inline double modus_ponens(EngineKind kind, double pa, double strength,
                           std::optional<double> prior_b = std::nullopt) {
    detail::check_unit(pa, "antecedent probability");
    detail::check_unit(strength, "rule strength");
    switch (kind) {
        case EngineKind::MaxC:
        case EngineKind::Fst: return strength * pa;
        case EngineKind::MinC: return strength * pa + 1.0 - pa;
        case EngineKind::Ind: return strength * pa + (1.0 - pa) / 2.0;
        case EngineKind::Mycin: {
            if (!prior_b) throw Error("the certainty-factor engine needs the consequent's prior");
            CertaintyFactor cf_rule = cf_from_prob(strength, *prior_b);
            CertaintyFactor cf_a = cf_from_prob(pa, *prior_b);
            return prob_from_cf(CertaintyFactor(cf_rule.value() * cf_a.value()), *prior_b);
        }
        case EngineKind::Dst:
            throw Error("the belief-interval engine has no point modus ponens");
    }
    throw Error("unreachable engine kind");
}

struct Interval {
    double lower = 0.0;
    double upper = 1.0;
};

struct NodeVerdict {
    int prop = -1;
    std::optional<double> point;
    std::optional<Interval> interval;
};

// One rule application at a node.  Values are in the engine's native scale:
// probabilities for the point engines, certainty factors for mycin.
struct RuleFiring {
    int rule_index = -1;
    double antecedent = 0.0;
    double contribution = 0.0;
};

struct NodeTrace {
    int prop = -1;
    std::vector<RuleFiring> firings;
    double combined = 0.0;  // native scale, after parallel combination
    NodeVerdict verdict;
};

struct PropagationTrace {
    EngineKind kind = EngineKind::Ind;
    std::vector<NodeVerdict> leaves;  // evidence or defaults, in prop order
    std::vector<NodeTrace> nodes;     // derived props, topological order
    std::vector<std::string> notices;

    const NodeVerdict* verdict_for(int prop) const {
        for (const auto& v : leaves)
            if (v.prop == prop) return &v;
        for (const auto& n : nodes)
            if (n.prop == prop) return &n.verdict;
        return nullptr;
    }
};

enum class MissingLeafPolicy {
    PriorMarginal,  // unobserved leaf sits at its prior (cf 0)
    Ignorance,      // unobserved leaf sits at 0.5 (cf 0)
    Reject,         // unobserved leaf is an error
};

struct PropagationOptions {
    MissingLeafPolicy missing_leaf = MissingLeafPolicy::PriorMarginal;
};

namespace detail {

inline double leaf_probability(int prop, const RuleSet& rs, const Evidence& ev,
                               const std::vector<double>& priors, MissingLeafPolicy policy) {
    auto it = ev.values.find(prop);
    if (it != ev.values.end()) return it->second;
    switch (policy) {
        case MissingLeafPolicy::PriorMarginal:
            if (prop < 0 || prop >= static_cast<int>(priors.size()))
                throw Error("no prior available for unobserved leaf '" + rs.prop_name(prop) + "'");
            return priors[static_cast<std::size_t>(prop)];
        case MissingLeafPolicy::Ignorance: return 0.5;
        case MissingLeafPolicy::Reject:
            throw Error("no evidence for leaf '" + rs.prop_name(prop) + "'");
    }
    throw Error("unreachable policy");
}

}  // namespace detail

// Leaf-to-root evaluation over the propagation-shaped rules.  Antecedents
// combine with the engine's conjunction, rules apply via modus ponens, and
// rules sharing a consequent pool through the engine's disjunction (the cf
// engine pools through mycin_combine instead).  Nodes no usable rule
// concludes stay at their default.
inline PropagationTrace propagate(EngineKind kind, const RuleSet& rs, const Evidence& ev,
                                  const std::vector<double>& priors,
                                  PropagationOptions opts = {}) {
    if (kind == EngineKind::Dst)
        throw Error("use dst_propagate for the belief-interval engine");
    const bool cf_scale = kind == EngineKind::Mycin;
    PropagationView view = make_propagation_view(rs);
    PropagationTrace trace;
    trace.kind = kind;
    trace.notices = view.notices;

    const int n = static_cast<int>(rs.props.size());
    std::vector<double> value(static_cast<std::size_t>(n), 0.0);  // native scale
    auto prior_of = [&](int prop) {
        if (prop < 0 || prop >= static_cast<int>(priors.size()))
            throw Error("no prior available for '" + rs.prop_name(prop) + "'");
        return priors[static_cast<std::size_t>(prop)];
    };

    for (int j = 0; j < n; ++j) {
        if (rs.props[static_cast<std::size_t>(j)].kind != PropKind::Leaf) continue;
        double p = detail::leaf_probability(j, rs, ev, priors, opts.missing_leaf);
        value[static_cast<std::size_t>(j)] = cf_scale ? cf_from_prob(p, prior_of(j)).value() : p;
        NodeVerdict v;
        v.prop = j;
        v.point = p;
        trace.leaves.push_back(v);
    }

    for (int node : view.order) {
        NodeTrace nt;
        nt.prop = node;
        bool have = false;
        double pooled = 0.0;
        for (int ri : view.rules_for_prop[static_cast<std::size_t>(node)]) {
            const Rule& rule = rs.rules[static_cast<std::size_t>(ri)];
            auto literals = rule.antecedent.conjunctive_literals();
            RuleFiring firing;
            firing.rule_index = ri;
            double contribution;
            if (cf_scale) {
                double ante = 1.0;
                bool first = true;
                for (const Literal& lit : *literals) {
                    double c = value[static_cast<std::size_t>(lit.prop)];
                    if (lit.negated) c = -c;
                    ante = first ? c : std::min(ante, c);
                    first = false;
                }
                double cf_rule = cf_from_prob(rule.strength, prior_of(node)).value();
                contribution = cf_rule * ante;
                firing.antecedent = ante;
            } else {
                double ante = 1.0;
                bool first = true;
                for (const Literal& lit : *literals) {
                    double p = value[static_cast<std::size_t>(lit.prop)];
                    if (lit.negated) p = 1.0 - p;
                    ante = first ? p : conj(kind, ante, p);
                    first = false;
                }
                contribution = modus_ponens(kind, ante, rule.strength);
                firing.antecedent = ante;
            }
            firing.contribution = contribution;
            pooled = have ? (cf_scale ? mycin_combine(CertaintyFactor(pooled),
                                                      CertaintyFactor(contribution))
                                            .value()
                                      : disj(kind, pooled, contribution))
                          : contribution;
            have = true;
            nt.firings.push_back(firing);
        }
        if (!have) {
            // No usable rule concludes this node; it keeps its default.
            pooled = cf_scale ? 0.0
                              : detail::leaf_probability(node, rs, Evidence{}, priors,
                                                         opts.missing_leaf == MissingLeafPolicy::Reject
                                                             ? MissingLeafPolicy::PriorMarginal
                                                             : opts.missing_leaf);
        }
        value[static_cast<std::size_t>(node)] = pooled;
        nt.combined = pooled;
        nt.verdict.prop = node;
        nt.verdict.point =
            cf_scale ? prob_from_cf(CertaintyFactor(pooled), prior_of(node)) : pooled;
        trace.nodes.push_back(std::move(nt));
    }
    return trace;
}

// Belief-interval propagation.  A rule with strength strictly inside (0, 1)
// excludes no joint outcome, so definite support flows only along strength-1
// (or strength-0) rules from evidence that is exactly 1 (or 0).  Everything
// else gets the vacuous interval [0, 1].
inline PropagationTrace dst_propagate(const RuleSet& rs, const Evidence& ev,
                                      PropagationOptions opts = {}) {
    PropagationView view = make_propagation_view(rs);
    PropagationTrace trace;
    trace.kind = EngineKind::Dst;
    trace.notices = view.notices;

    const int n = static_cast<int>(rs.props.size());
    std::vector<char> definitely_true(static_cast<std::size_t>(n), 0);
    std::vector<char> definitely_false(static_cast<std::size_t>(n), 0);

    auto interval_of = [&](int j) {
        Interval iv;
        if (definitely_true[static_cast<std::size_t>(j)]) iv = {1.0, 1.0};
        else if (definitely_false[static_cast<std::size_t>(j)]) iv = {0.0, 0.0};
        else iv = {0.0, 1.0};
        return iv;
    };

    for (int j = 0; j < n; ++j) {
        if (rs.props[static_cast<std::size_t>(j)].kind != PropKind::Leaf) continue;
        auto it = ev.values.find(j);
        if (it == ev.values.end()) {
            if (opts.missing_leaf == MissingLeafPolicy::Reject)
                throw Error("no evidence for leaf '" + rs.prop_name(j) + "'");
        } else if (it->second == 1.0) {
            definitely_true[static_cast<std::size_t>(j)] = 1;
        } else if (it->second == 0.0) {
            definitely_false[static_cast<std::size_t>(j)] = 1;
        }
        NodeVerdict v;
        v.prop = j;
        v.interval = interval_of(j);
        trace.leaves.push_back(v);
    }

    for (int node : view.order) {
        NodeTrace nt;
        nt.prop = node;
        for (int ri : view.rules_for_prop[static_cast<std::size_t>(node)]) {
            const Rule& rule = rs.rules[static_cast<std::size_t>(ri)];
            if (rule.strength != 0.0 && rule.strength != 1.0) continue;
            bool antecedent_definite = true;
            auto lits = rule.antecedent.conjunctive_literals();
            for (const Literal& lit : *lits) {
                bool holds = lit.negated ? definitely_false[static_cast<std::size_t>(lit.prop)]
                                         : definitely_true[static_cast<std::size_t>(lit.prop)];
                if (!holds) {
                    antecedent_definite = false;
                    break;
                }
            }
            if (!antecedent_definite) continue;
            RuleFiring firing;
            firing.rule_index = ri;
            firing.antecedent = 1.0;
            firing.contribution = rule.strength;
            nt.firings.push_back(firing);
            if (rule.strength == 1.0) definitely_true[static_cast<std::size_t>(node)] = 1;
            else definitely_false[static_cast<std::size_t>(node)] = 1;
        }
        if (definitely_true[static_cast<std::size_t>(node)] &&
            definitely_false[static_cast<std::size_t>(node)])
            throw Error("definitive rules contradict each other at '" + rs.prop_name(node) + "'");
        Interval iv = interval_of(node);
        nt.combined = iv.lower;
        nt.verdict.prop = node;
        nt.verdict.interval = iv;
        trace.nodes.push_back(std::move(nt));
    }
    return trace;
}

inline std::string trace_to_json(const PropagationTrace& trace, const RuleSet& rs) {
    nlohmann::json root;
    root["engine"] = engine_name(trace.kind);
    auto verdict_json = [&](const NodeVerdict& v) {
        nlohmann::json j;
        j["node"] = rs.prop_name(v.prop);
        if (v.point) j["point"] = *v.point;
        if (v.interval) j["interval"] = {v.interval->lower, v.interval->upper};
        return j;
    };
    root["leaves"] = nlohmann::json::array();
    for (const auto& v : trace.leaves) root["leaves"].push_back(verdict_json(v));
    root["nodes"] = nlohmann::json::array();
    for (const auto& nt : trace.nodes) {
        nlohmann::json j;
        j["node"] = rs.prop_name(nt.prop);
        j["combined"] = nt.combined;
        j["verdict"] = verdict_json(nt.verdict);
        j["firings"] = nlohmann::json::array();
        for (const auto& f : nt.firings) {
            nlohmann::json fj;
            fj["rule"] = render_rule(rs, rs.rules[static_cast<std::size_t>(f.rule_index)]);
            fj["antecedent"] = f.antecedent;
            fj["contribution"] = f.contribution;
            j["firings"].push_back(fj);
        }
        root["nodes"].push_back(j);
    }
    if (!trace.notices.empty()) root["notices"] = trace.notices;
    return root.dump(2);
}

// One row per recorded quantity: node,engine,stage,value.  Stages are the
// verdict, the pooled native-scale value, and each firing's antecedent and
// contribution keyed by rule position.
inline void write_trace_csv(std::ostream& os, const PropagationTrace& trace,
                            const RuleSet& rs) {
    os << "node,engine,stage,value\n";
    const char* engine = engine_name(trace.kind);
    auto emit = [&](int prop, const std::string& stage, double v) {
        os << rs.prop_name(prop) << ',' << engine << ',' << stage << ',' << format_number(v)
           << '\n';
    };
    auto emit_verdict = [&](const NodeVerdict& v) {
        if (v.point) emit(v.prop, "point", *v.point);
        if (v.interval) {
            emit(v.prop, "lower", v.interval->lower);
            emit(v.prop, "upper", v.interval->upper);
        }
    };
    for (const auto& v : trace.leaves) emit_verdict(v);
    for (const auto& nt : trace.nodes) {
        for (const auto& f : nt.firings) {
            std::string key = "rule" + std::to_string(f.rule_index);
            emit(nt.prop, key + "_antecedent", f.antecedent);
            emit(nt.prop, key + "_contribution", f.contribution);
        }
        emit(nt.prop, "combined", nt.combined);
        emit_verdict(nt.verdict);
    }
}

}  // namespace uisbench
