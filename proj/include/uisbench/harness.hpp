#pragma once

// Experiment drivers.
//
// The central design: fit the rule set alone into a maximum-entropy joint
// (the prior), then for each evidence case update that prior by minimum
// cross-entropy.  The update is deliberately two-stage; folding rules and
// evidence into one fit gives different (and sometimes infeasible) answers,
// because evidence asserts new margins rather than new structural knowledge.
// Engine verdicts are scored per node against the updated joint's marginals.
//
// Also here: the single-rule sensitivity sweeps behind the numbered figure
// presets, and the reactor diagnosis benchmark over a bundled rule file.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "engines.hpp"
#include "maxent.hpp"
#include "metrics.hpp"

namespace uisbench {

struct Experiment {
    RuleSet rules;
    std::vector<Evidence> cases;
    std::vector<EngineKind> engines;
    SolverOptions solver;
    PropagationOptions propagation;
};

struct CaseResult {
    Evidence evidence;
    JointDistribution posterior;
    SolverReport posterior_report;
    std::vector<PropagationTrace> traces;  // one per engine that succeeded
    std::vector<ErrorSample> samples;
    std::optional<ComparisonReport> report;
    std::vector<std::string> notices;
};

struct PipelineResult {
    JointDistribution prior;
    SolverReport prior_report;
    std::vector<double> prior_marginals;  // by proposition
    std::vector<CaseResult> cases;
    std::optional<ComparisonReport> pooled;
    std::vector<std::string> notices;
};

inline PipelineResult run_pipeline(const Experiment& exp) {
    const RuleSet& rs = exp.rules;
    std::vector<std::string> names;
    for (const auto& p : rs.props) names.push_back(p.name);
    auto prior_fit = max_entropy(std::move(names), compile_constraints(rs), exp.solver);
    PipelineResult result{std::move(prior_fit.joint), prior_fit.report, {}, {}, {}, {}};
    const int n = static_cast<int>(rs.props.size());
    for (int j = 0; j < n; ++j) result.prior_marginals.push_back(result.prior.marginal(j));

    std::vector<ErrorSample> pooled_samples;
    for (const Evidence& ev : exp.cases) {
        auto posterior_fit =
            min_cross_entropy(result.prior, compile_evidence(rs, ev), exp.solver);
        CaseResult cr{ev,          std::move(posterior_fit.joint), posterior_fit.report,
                      {},          {},
                      std::nullopt, {}};
        for (EngineKind kind : exp.engines) {
            PropagationTrace trace;
            try {
                trace = kind == EngineKind::Dst
                            ? dst_propagate(rs, ev, exp.propagation)
                            : propagate(kind, rs, ev, result.prior_marginals, exp.propagation);
            } catch (const Error& e) {
                cr.notices.push_back(std::string("engine ") + engine_name(kind) +
                                     " skipped: " + e.what());
                continue;
            }
            for (const auto& note : trace.notices)
                cr.notices.push_back(std::string(engine_name(kind)) + ": " + note);
            for (const auto& nt : trace.nodes) {
                PropKind pk = rs.props[static_cast<std::size_t>(nt.prop)].kind;
                SampleClass cls = pk == PropKind::Goal ? SampleClass::Conclusion
                                                       : SampleClass::Intermediate;
                std::optional<double> anchor;
                if (kind == EngineKind::Mycin)
                    anchor = result.prior_marginals[static_cast<std::size_t>(nt.prop)];
                cr.samples.push_back(make_sample(rs.prop_name(nt.prop), kind, cls, nt.verdict,
                                                 cr.posterior.marginal(nt.prop), anchor));
            }
            cr.traces.push_back(std::move(trace));
        }
        if (!cr.samples.empty()) cr.report = aggregate(cr.samples);
        else cr.notices.push_back("no engine produced verdicts for this case");
        pooled_samples.insert(pooled_samples.end(), cr.samples.begin(), cr.samples.end());
        result.cases.push_back(std::move(cr));
    }
    if (!pooled_samples.empty()) result.pooled = aggregate(pooled_samples);
    for (const auto& cr : result.cases)
        for (const auto& note : cr.notices) result.notices.push_back(note);
    return result;
}

// Sensitivity sweeps over a single combinator or a single rule.
//
// Conj/Disj sweep the pairwise combinators directly; ModusPonens sweeps the
// one-antecedent rule, optionally adding cf-engine curves at fixed priors;
// TwoAntecedentRule runs the full pipeline on P(c | a & b) = strength with
// evidence on both leaves, optionally including the exact reference curve.
enum class SweepOp { Conj, Disj, ModusPonens, TwoAntecedentRule };
enum class SweepVar { PA, PB, Strength };

struct SweepSpec {
    SweepOp op = SweepOp::Disj;
    SweepVar x = SweepVar::PA;
    double pa = 0.0;
    double pb = 0.0;
    double strength = 0.0;
    double start = 0.0;
    double stop = 1.0;
    double step = 0.01;
    std::vector<EngineKind> engines;
    std::vector<double> cf_priors;   // extra cf-engine curves (ModusPonens only)
    bool include_reference = false;  // exact-joint curve (TwoAntecedentRule only)
    SolverOptions solver;
};

struct CurvePoint {
    double x = 0.0;
    std::string engine;
    double value = 0.0;
};

struct CurveTable {
    std::vector<CurvePoint> rows;
};

namespace detail {

inline std::string cf_prior_label(double prior) {
    std::string s = format_number(prior);
    if (s.size() > 1 && s[0] == '0' && s[1] == '.') s.erase(0, 1);
    return "myc" + s;
}

inline RuleSet two_antecedent_ruleset(double strength) {
    RuleSet rs;
    rs.props.push_back({"a", PropKind::Leaf, false});
    rs.props.push_back({"b", PropKind::Leaf, false});
    rs.props.push_back({"c", PropKind::Goal, false});
    Rule r;
    r.consequent = Formula::var(2);
    r.antecedent = Formula::conj(Formula::var(0), Formula::var(1));
    r.strength = strength;
    rs.rules.push_back(std::move(r));
    return rs;
}

}  // namespace detail

inline CurveTable sweep(const SweepSpec& spec) {
    if (!(spec.step > 0.0)) throw Error("sweep step must be positive");
    if (!(spec.start >= 0.0 && spec.stop <= 1.0 && spec.start <= spec.stop))
        throw Error("sweep grid must stay inside [0, 1]");
    CurveTable table;
    const int steps = static_cast<int>(std::round((spec.stop - spec.start) / spec.step));
    for (int i = 0; i <= steps; ++i) {
        double x = std::min(spec.start + spec.step * static_cast<double>(i), spec.stop);
        double pa = spec.x == SweepVar::PA ? x : spec.pa;
        double pb = spec.x == SweepVar::PB ? x : spec.pb;
        double strength = spec.x == SweepVar::Strength ? x : spec.strength;
        switch (spec.op) {
            case SweepOp::Conj:
            case SweepOp::Disj: {
                for (EngineKind kind : spec.engines) {
                    double v = spec.op == SweepOp::Conj ? conj(kind, pa, pb)
                                                        : disj(kind, pa, pb);
                    table.rows.push_back({x, engine_name(kind), v});
                }
                break;
            }
            case SweepOp::ModusPonens: {
                for (EngineKind kind : spec.engines) {
                    if (kind == EngineKind::Mycin)
                        throw Error("give the cf engine its priors via cf_priors");
                    table.rows.push_back(
                        {x, engine_name(kind), modus_ponens(kind, pa, strength)});
                }
                for (double prior : spec.cf_priors)
                    table.rows.push_back(
                        {x, detail::cf_prior_label(prior),
                         modus_ponens(EngineKind::Mycin, pa, strength, prior)});
                break;
            }
            case SweepOp::TwoAntecedentRule: {
                RuleSet rs = detail::two_antecedent_ruleset(strength);
                Evidence ev;
                ev.values[0] = pa;
                ev.values[1] = pb;
                Experiment exp{rs, {ev}, spec.engines, spec.solver, {}};
                PipelineResult pr = run_pipeline(exp);
                const CaseResult& cr = pr.cases.front();
                for (const auto& trace : cr.traces) {
                    const NodeVerdict* v = trace.verdict_for(2);
                    if (v && v->point)
                        table.rows.push_back({x, engine_name(trace.kind), *v->point});
                }
                if (spec.include_reference)
                    table.rows.push_back({x, "mep", cr.posterior.marginal(2)});
                break;
            }
        }
    }
    return table;
}

// The numbered presets fix the constants used throughout the write-ups:
//   1 disjunction, p(b)=0.4            2 conjunction, p(b)=0.6
//   3 one-antecedent rule, p(a)=0.4    4 one-antecedent rule, strength 0.3
//   5 two-antecedent rule, p(a)=0.8, p(b)=0.7, sweeping strength
//   6 same but p(a)=0.3, p(b)=0.8      7 strength 0.3, p(b)=0.6, sweeping p(a)
inline SweepSpec figure_preset(int figure) {
    SweepSpec spec;
    const std::vector<EngineKind> point3 = {EngineKind::MaxC, EngineKind::Ind,
                                            EngineKind::MinC};
    const std::vector<EngineKind> rule4 = {EngineKind::Fst, EngineKind::Mycin,
                                           EngineKind::Ind, EngineKind::MinC};
    switch (figure) {
        case 1:
            spec.op = SweepOp::Disj;
            spec.x = SweepVar::PA;
            spec.pb = 0.4;
            spec.engines = point3;
            break;
        case 2:
            spec.op = SweepOp::Conj;
            spec.x = SweepVar::PA;
            spec.pb = 0.6;
            spec.engines = point3;
            break;
        case 3:
            spec.op = SweepOp::ModusPonens;
            spec.x = SweepVar::Strength;
            spec.pa = 0.4;
            spec.engines = point3;
            spec.cf_priors = {0.1, 0.3, 0.5};
            break;
        case 4:
            spec.op = SweepOp::ModusPonens;
            spec.x = SweepVar::PA;
            spec.strength = 0.3;
            spec.engines = point3;
            spec.cf_priors = {0.1, 0.3, 0.5};
            break;
        case 5:
            spec.op = SweepOp::TwoAntecedentRule;
            spec.x = SweepVar::Strength;
            spec.pa = 0.8;
            spec.pb = 0.7;
            spec.engines = rule4;
            spec.include_reference = true;
            break;
        case 6:
            spec.op = SweepOp::TwoAntecedentRule;
            spec.x = SweepVar::Strength;
            spec.pa = 0.3;
            spec.pb = 0.8;
            spec.engines = rule4;
            spec.include_reference = true;
            break;
        case 7:
            spec.op = SweepOp::TwoAntecedentRule;
            spec.x = SweepVar::PA;
            spec.strength = 0.3;
            spec.pb = 0.6;
            spec.engines = rule4;
            spec.include_reference = true;
            break;
        default:
            throw Error("no preset numbered " + std::to_string(figure));
    }
    return spec;
}

inline void write_curve_csv(std::ostream& os, const CurveTable& table) {
    os << "x,engine,value\n";
    for (const auto& row : table.rows)
        os << format_number(row.x) << ',' << row.engine << ',' << format_number(row.value)
           << '\n';
}

// Reactor diagnosis benchmark: one case per goal.  A case raises the leaves
// that can reach its goal through the rule graph to the supporter level and
// drops every other leaf to the background level.
struct ReactorOptions {
    std::vector<EngineKind> engines = {EngineKind::Fst, EngineKind::Mycin, EngineKind::Dst,
                                       EngineKind::Ind};
    SolverOptions solver;
    PropagationOptions propagation;
    double supporter_level = 0.95;
    double background_level = 0.05;
};

struct ReactorResult {
    std::vector<std::string> case_names;  // goal per case, pipeline order
    PipelineResult pipeline;
};

inline ReactorResult reactor_benchmark(const RuleSet& rs, ReactorOptions opts = {}) {
    PropagationView view = make_propagation_view(rs);
    const int n = static_cast<int>(rs.props.size());
    std::vector<std::string> case_names;
    Experiment exp;
    exp.rules = rs;
    exp.engines = opts.engines;
    exp.solver = opts.solver;
    exp.propagation = opts.propagation;
    for (int g = 0; g < n; ++g) {
        if (rs.props[static_cast<std::size_t>(g)].kind != PropKind::Goal) continue;
        std::set<int> supporters;
        std::vector<int> frontier = {g};
        while (!frontier.empty()) {
            int node = frontier.back();
            frontier.pop_back();
            for (int ri : view.rules_for_prop[static_cast<std::size_t>(node)]) {
                auto lits = rs.rules[static_cast<std::size_t>(ri)].antecedent.conjunctive_literals();
                for (const auto& lit : *lits) {
                    if (rs.props[static_cast<std::size_t>(lit.prop)].kind == PropKind::Leaf)
                        supporters.insert(lit.prop);
                    else if (supporters.insert(lit.prop).second)
                        frontier.push_back(lit.prop);
                }
            }
        }
        Evidence ev;
        for (int j = 0; j < n; ++j) {
            if (rs.props[static_cast<std::size_t>(j)].kind != PropKind::Leaf) continue;
            ev.values[j] =
                supporters.count(j) ? opts.supporter_level : opts.background_level;
        }
        case_names.push_back(rs.prop_name(g));
        exp.cases.push_back(std::move(ev));
    }
    if (exp.cases.empty()) throw Error("the rule set has no goal propositions");
    return ReactorResult{std::move(case_names), run_pipeline(exp)};
}

}  // namespace uisbench
