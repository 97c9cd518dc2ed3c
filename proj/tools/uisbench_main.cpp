// Command-line front end.  Subcommands wrap the library a piece at a time:
// maxent and infer expose the two halves of the pipeline, compare runs it
// end to end, sweep/reactor/dst-pathology regenerate the standard studies,
// verify-baselines cross-checks the closed-form guessing baselines by
// simulation.  Data goes to stdout (or --out), diagnostics to stderr.
//
// Exit codes: 0 success, 1 bad input (parse, validation, usage), 2 the
// constraints are unsatisfiable, 3 the solver ran out of iterations.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <uisbench/uisbench.hpp>

namespace {

using namespace uisbench;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Relative --out paths land in UISBENCH_OUT_DIR when it is set.
std::string resolve_out(const std::string& path) {
    if (path.empty() || path.front() == '/') return path;
    const char* dir = std::getenv("UISBENCH_OUT_DIR");
    if (!dir || !*dir) return path;
    return std::string(dir) + "/" + path;
}

class OutStream {
public:
    explicit OutStream(const std::string& path) {
        if (path.empty()) return;
        resolved_ = resolve_out(path);
        file_.open(resolved_, std::ios::binary);
        if (!file_) throw Error("cannot write '" + resolved_ + "'");
    }
    std::ostream& get() { return file_.is_open() ? file_ : std::cout; }
    bool to_file() const { return file_.is_open(); }
    const std::string& path() const { return resolved_; }

private:
    std::ofstream file_;
    std::string resolved_;
};

std::vector<EngineKind> parse_engine_list(const std::string& csv) {
    std::vector<EngineKind> out;
    std::string item;
    std::istringstream in(csv);
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        out.push_back(parse_engine_kind(item));
    }
    if (out.empty()) throw Error("no engines given");
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(csv);
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

std::string default_data_path(const char* name) {
#ifdef UISBENCH_DATA_DIR
    return std::string(UISBENCH_DATA_DIR) + "/" + name;
#else
    return name;
#endif
}

// Priors file: `name = value` lines, any proposition.  Unlisted props sit
// at 0.5.
std::vector<double> parse_priors_file(const std::string& text, const RuleSet& rs) {
    std::vector<double> priors(rs.props.size(), 0.5);
    auto tokens = uisbench::detail::Lexer(text).run();
    using T = uisbench::detail::Token;
    std::size_t pos = 0;
    while (tokens[pos].type != T::Type::End) {
        if (tokens[pos].type == T::Type::Separator) {
            ++pos;
            continue;
        }
        const T& name = tokens[pos];
        if (name.type != T::Type::Ident)
            throw ParseError("expected proposition name", name.line, name.column);
        int idx = rs.prop_index(name.text);
        if (idx < 0)
            throw ParseError("unknown proposition '" + name.text + "'", name.line, name.column);
        ++pos;
        if (tokens[pos].type != T::Type::Equals)
            throw ParseError("expected '='", tokens[pos].line, tokens[pos].column);
        ++pos;
        if (tokens[pos].type != T::Type::Number)
            throw ParseError("expected value", tokens[pos].line, tokens[pos].column);
        double v = tokens[pos].number;
        if (!(v >= 0.0 && v <= 1.0))
            throw ParseError("prior outside [0, 1]", tokens[pos].line, tokens[pos].column);
        priors[static_cast<std::size_t>(idx)] = v;
        ++pos;
        if (tokens[pos].type == T::Type::Separator) ++pos;
    }
    return priors;
}

void print_solver_summary(const char* label, const SolverReport& report) {
    std::cerr << label << ": " << report.iterations << " cycles, residual "
              << format_number(report.max_residual) << ", objective "
              << format_number(report.objective_nats) << " nats, support "
              << report.support_events << " events\n";
}

std::string verdict_text(const NodeVerdict& v) {
    if (v.point) return format_number(*v.point);
    if (v.interval)
        return "[" + format_number(v.interval->lower) + ", " +
               format_number(v.interval->upper) + "]";
    return "-";
}

struct SolverFlags {
    double tol = 1e-8;
    int max_iter = 10000;
    SolverOptions options() const {
        SolverOptions so;
        so.tolerance = tol;
        so.max_iterations = max_iter;
        return so;
    }
    void attach(CLI::App* cmd) {
        cmd->add_option("--tol", tol, "solver convergence tolerance");
        cmd->add_option("--max-iter", max_iter, "solver cycle cap");
    }
};

int run_maxent(const std::string& rules_path, const std::string& out_path,
               const SolverFlags& flags) {
    RuleSet rs = parse_ruleset(read_file(rules_path));
    std::vector<std::string> names;
    for (const auto& p : rs.props) names.push_back(p.name);
    auto fit = max_entropy(names, compile_constraints(rs), flags.options());
    OutStream out(out_path);
    write_joint_csv(fit.joint, out.get());
    print_solver_summary("maxent", fit.report);
    for (std::size_t j = 0; j < rs.props.size(); ++j)
        std::cerr << "  p(" << rs.props[j].name << ") = "
                  << format_number(fit.joint.marginal(static_cast<int>(j))) << "\n";
    return 0;
}

int run_infer(const std::string& rules_path, const std::string& ev_path,
              const std::string& engines_csv, const std::string& priors_src,
              const std::string& format, const std::string& out_path,
              const std::string& json_path, const SolverFlags& flags) {
    RuleSet rs = parse_ruleset(read_file(rules_path));
    Evidence ev = parse_evidence(read_file(ev_path), rs);
    auto engines = parse_engine_list(engines_csv);

    std::vector<double> priors;
    if (priors_src == "maxent") {
        std::vector<std::string> names;
        for (const auto& p : rs.props) names.push_back(p.name);
        auto fit = max_entropy(names, compile_constraints(rs), flags.options());
        for (int j = 0; j < static_cast<int>(rs.props.size()); ++j)
            priors.push_back(fit.joint.marginal(j));
    } else {
        priors = parse_priors_file(read_file(priors_src), rs);
    }

    std::vector<PropagationTrace> traces;
    for (EngineKind kind : engines)
        traces.push_back(kind == EngineKind::Dst ? dst_propagate(rs, ev)
                                                 : propagate(kind, rs, ev, priors));

    OutStream out(out_path);
    if (format == "csv") {
        out.get() << "engine,node,point,lower,upper\n";
        for (const auto& trace : traces)
            for (const auto& nt : trace.nodes) {
                const NodeVerdict& v = nt.verdict;
                out.get() << engine_name(trace.kind) << ',' << rs.prop_name(nt.prop) << ',';
                out.get() << (v.point ? format_number(*v.point) : std::string()) << ',';
                out.get() << (v.interval ? format_number(v.interval->lower) : std::string())
                          << ',';
                out.get() << (v.interval ? format_number(v.interval->upper) : std::string())
                          << '\n';
            }
    } else {
        out.get() << std::left << std::setw(10) << "engine" << std::setw(18) << "node"
                  << "verdict\n";
        for (const auto& trace : traces)
            for (const auto& nt : trace.nodes)
                out.get() << std::left << std::setw(10) << engine_name(trace.kind)
                          << std::setw(18) << rs.prop_name(nt.prop)
                          << verdict_text(nt.verdict) << '\n';
    }
    for (const auto& trace : traces)
        for (const auto& note : trace.notices)
            std::cerr << engine_name(trace.kind) << ": " << note << "\n";

    if (!json_path.empty()) {
        OutStream jout(json_path);
        jout.get() << "[\n";
        for (std::size_t i = 0; i < traces.size(); ++i)
            jout.get() << trace_to_json(traces[i], rs) << (i + 1 < traces.size() ? ",\n" : "\n");
        jout.get() << "]\n";
    }
    return 0;
}

void print_pipeline_reports(const PipelineResult& result,
                            const std::vector<std::string>& case_labels,
                            const std::string& format, std::ostream& os) {
    bool csv = format == "csv";
    if (result.cases.size() > 1) {
        for (std::size_t k = 0; k < result.cases.size(); ++k) {
            const auto& cr = result.cases[k];
            if (!cr.report) continue;
            os << (csv ? "# case " : "case ") << case_labels[k] << "\n";
            if (csv) write_report_csv(os, *cr.report);
            else write_report_table(os, *cr.report);
            os << "\n";
        }
        os << (csv ? "# pooled\n" : "pooled over all cases\n");
    }
    if (result.pooled) {
        if (csv) write_report_csv(os, *result.pooled);
        else write_report_table(os, *result.pooled);
    }
}

int run_compare(const std::string& rules_path, const std::vector<std::string>& case_paths,
                const std::string& engines_csv, const std::string& format,
                const std::string& out_path, const SolverFlags& flags) {
    Experiment exp;
    exp.rules = parse_ruleset(read_file(rules_path));
    for (const auto& path : case_paths)
        exp.cases.push_back(parse_evidence(read_file(path), exp.rules));
    exp.engines = parse_engine_list(engines_csv);
    exp.solver = flags.options();

    PipelineResult result = run_pipeline(exp);
    print_solver_summary("prior fit", result.prior_report);
    for (const auto& note : result.notices) std::cerr << "note: " << note << "\n";

    print_pipeline_reports(result, case_paths, format, std::cout);
    if (!out_path.empty()) {
        OutStream out(out_path);
        if (result.pooled) write_report_csv(out.get(), *result.pooled);
    }
    return result.pooled ? 0 : 1;
}

int run_sweep(int figure, const std::string& op_name, const std::string& x_name, double pa,
              double pb, double strength, const std::string& engines_csv,
              const std::string& cf_priors_csv, bool reference, double grid_step,
              const std::string& out_path, const SolverFlags& flags) {
    SweepSpec spec;
    if (figure > 0) {
        spec = figure_preset(figure);
    } else {
        if (op_name == "conj") spec.op = SweepOp::Conj;
        else if (op_name == "disj") spec.op = SweepOp::Disj;
        else if (op_name == "mp") spec.op = SweepOp::ModusPonens;
        else if (op_name == "rule2") spec.op = SweepOp::TwoAntecedentRule;
        else throw Error("unknown --op '" + op_name + "' (conj, disj, mp, rule2)");
        if (x_name == "pa") spec.x = SweepVar::PA;
        else if (x_name == "pb") spec.x = SweepVar::PB;
        else if (x_name == "strength") spec.x = SweepVar::Strength;
        else throw Error("unknown --x '" + x_name + "' (pa, pb, strength)");
        spec.pa = pa;
        spec.pb = pb;
        spec.strength = strength;
        spec.engines = parse_engine_list(engines_csv);
        spec.cf_priors = parse_double_list(cf_priors_csv);
        spec.include_reference = reference;
    }
    spec.step = grid_step;
    spec.solver = flags.options();
    CurveTable table = sweep(spec);
    OutStream out(out_path);
    write_curve_csv(out.get(), table);
    return 0;
}

int run_reactor(const std::string& rules_path, const std::string& engines_csv,
                const std::string& format, const std::string& out_path,
                const SolverFlags& flags) {
    RuleSet rs = parse_ruleset(read_file(rules_path));
    ReactorOptions opts;
    opts.engines = parse_engine_list(engines_csv);
    opts.solver = flags.options();
    ReactorResult result = reactor_benchmark(rs, opts);
    print_solver_summary("prior fit", result.pipeline.prior_report);
    for (const auto& note : result.pipeline.notices) std::cerr << "note: " << note << "\n";
    print_pipeline_reports(result.pipeline, result.case_names, format, std::cout);
    if (!out_path.empty()) {
        OutStream out(out_path);
        if (result.pipeline.pooled) write_report_csv(out.get(), *result.pipeline.pooled);
    }
    return 0;
}

int run_dst_pathology(const std::string& out_path) {
    std::vector<double> betas;
    for (int k = 1; k <= 9; ++k) betas.push_back(std::pow(10.0, -k));
    auto rows = pathology_sweep(betas);
    OutStream out(out_path);
    write_pathology_csv(out.get(), rows);
    return 0;
}

int run_verify_baselines(std::size_t samples, std::uint64_t seed) {
    const double gate = 2e-3;
    const std::vector<double> ps = {0.05, 0.3, 0.5, 0.7, 0.95};
    const std::vector<double> p0s = {0.1, 0.3, 0.5};
    bool ok = true;
    std::cout << "engine,p,p0,closed_abs,mc_abs,closed_sq,mc_sq,asserted\n";
    auto row = [&](EngineKind kind, double p, std::optional<double> p0, bool assert_abs,
                   bool assert_sq) {
        ErrorPair closed = random_guess_baseline(kind, p, p0);
        ErrorPair mc = mc_baseline(kind, p, p0, samples, seed);
        bool pass = true;
        if (assert_abs && std::abs(closed.abs - mc.abs) > gate) pass = false;
        if (assert_sq && std::abs(closed.sq - mc.sq) > gate) pass = false;
        if (!pass) ok = false;
        std::cout << engine_name(kind) << ',' << format_number(p) << ','
                  << (p0 ? format_number(*p0) : std::string()) << ','
                  << format_number(closed.abs) << ',' << format_number(mc.abs) << ','
                  << format_number(closed.sq) << ',' << format_number(mc.sq) << ','
                  << (assert_abs || assert_sq ? (pass ? "yes" : "FAIL") : "report-only")
                  << '\n';
    };
    for (double p : ps) row(EngineKind::Fst, p, std::nullopt, true, true);
    for (double p0 : p0s)
        for (double p : ps) row(EngineKind::Mycin, p, p0, false, true);
    for (double p : ps) row(EngineKind::Dst, p, std::nullopt, false, true);
    std::cerr << (ok ? "all asserted baselines within " : "baseline mismatch beyond ")
              << format_number(gate) << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"workbench for uncertain inference systems"};
    app.require_subcommand(1);
    std::function<int()> action;

    // maxent
    auto* maxent_cmd =
        app.add_subcommand("maxent", "fit the maximum-entropy joint for a rule file");
    static std::string mx_rules, mx_out;
    static SolverFlags mx_flags;
    maxent_cmd->add_option("ruleset", mx_rules, "rule file")->required();
    maxent_cmd->add_option("--out", mx_out, "joint CSV destination (default stdout)");
    mx_flags.attach(maxent_cmd);
    maxent_cmd->callback([&] { action = [&] { return run_maxent(mx_rules, mx_out, mx_flags); }; });

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "propagate one evidence case through engines");
    static std::string in_rules, in_ev, in_engines = "fst,mycin,dst,ind", in_priors = "maxent";
    static std::string in_format = "table", in_out, in_json;
    static SolverFlags in_flags;
    infer_cmd->add_option("ruleset", in_rules, "rule file")->required();
    infer_cmd->add_option("evidence", in_ev, "evidence file")->required();
    infer_cmd->add_option("--engines", in_engines, "comma-separated engine list");
    infer_cmd->add_option("--priors", in_priors, "'maxent' or a priors file");
    infer_cmd->add_option("--format", in_format, "table or csv")
        ->check(CLI::IsMember({"table", "csv"}));
    infer_cmd->add_option("--out", in_out, "verdict destination (default stdout)");
    infer_cmd->add_option("--json", in_json, "also write full traces as JSON here");
    in_flags.attach(infer_cmd);
    infer_cmd->callback([&] {
        action = [&] {
            return run_infer(in_rules, in_ev, in_engines, in_priors, in_format, in_out,
                             in_json, in_flags);
        };
    });

    // compare
    auto* compare_cmd =
        app.add_subcommand("compare", "run the full pipeline and score engines");
    static std::string cp_rules, cp_engines = "fst,mycin,dst,ind", cp_format = "table", cp_out;
    static std::vector<std::string> cp_cases;
    static SolverFlags cp_flags;
    compare_cmd->add_option("ruleset", cp_rules, "rule file")->required();
    compare_cmd->add_option("evidence", cp_cases, "evidence files")->required();
    compare_cmd->add_option("--engines", cp_engines, "comma-separated engine list");
    compare_cmd->add_option("--format", cp_format, "table or csv")
        ->check(CLI::IsMember({"table", "csv"}));
    compare_cmd->add_option("--out", cp_out, "also write pooled report CSV here");
    cp_flags.attach(compare_cmd);
    compare_cmd->callback([&] {
        action = [&] {
            return run_compare(cp_rules, cp_cases, cp_engines, cp_format, cp_out, cp_flags);
        };
    });

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "sensitivity curves over a grid");
    static int sw_figure = 0;
    static std::string sw_op = "disj", sw_x = "pa", sw_engines = "maxc,ind,minc";
    static std::string sw_cf_priors, sw_out;
    static double sw_pa = 0.0, sw_pb = 0.0, sw_strength = 0.0, sw_step = 0.01;
    static bool sw_reference = false;
    static SolverFlags sw_flags;
    sweep_cmd->add_option("--figure", sw_figure, "preset number 1..7")
        ->check(CLI::Range(1, 7));
    sweep_cmd->add_option("--op", sw_op, "conj, disj, mp, or rule2");
    sweep_cmd->add_option("--x", sw_x, "swept variable: pa, pb, or strength");
    sweep_cmd->add_option("--pa", sw_pa, "fixed p(a)");
    sweep_cmd->add_option("--pb", sw_pb, "fixed p(b)");
    sweep_cmd->add_option("--strength", sw_strength, "fixed rule strength");
    sweep_cmd->add_option("--engines", sw_engines, "comma-separated engine list");
    sweep_cmd->add_option("--cf-priors", sw_cf_priors,
                          "cf-engine prior list for mp sweeps, e.g. 0.1,0.3,0.5");
    sweep_cmd->add_flag("--reference", sw_reference, "include the exact-joint curve (rule2)");
    sweep_cmd->add_option("--grid-step", sw_step, "grid step (default 0.01)");
    sweep_cmd->add_option("--out", sw_out, "curve CSV destination (default stdout)");
    sw_flags.attach(sweep_cmd);
    sweep_cmd->callback([&] {
        action = [&] {
            return run_sweep(sw_figure, sw_op, sw_x, sw_pa, sw_pb, sw_strength, sw_engines,
                             sw_cf_priors, sw_reference, sw_step, sw_out, sw_flags);
        };
    });

    // reactor
    auto* reactor_cmd = app.add_subcommand("reactor", "run the reactor diagnosis benchmark");
    static std::string rc_rules = default_data_path("reactor.rules");
    static std::string rc_engines = "fst,mycin,dst,ind", rc_format = "table", rc_out;
    static SolverFlags rc_flags;
    reactor_cmd->add_option("--rules", rc_rules, "alternative rule file");
    reactor_cmd->add_option("--engines", rc_engines, "comma-separated engine list");
    reactor_cmd->add_option("--format", rc_format, "table or csv")
        ->check(CLI::IsMember({"table", "csv"}));
    reactor_cmd->add_option("--out", rc_out, "also write pooled report CSV here");
    rc_flags.attach(reactor_cmd);
    reactor_cmd->callback([&] {
        action = [&] {
            return run_reactor(rc_rules, rc_engines, rc_format, rc_out, rc_flags);
        };
    });

    // dst-pathology
    auto* path_cmd =
        app.add_subcommand("dst-pathology", "belief discontinuity table over tiny beta");
    static std::string pt_out;
    path_cmd->add_option("--out", pt_out, "CSV destination (default stdout)");
    path_cmd->callback([&] { action = [&] { return run_dst_pathology(pt_out); }; });

    // verify-baselines
    auto* verify_cmd = app.add_subcommand(
        "verify-baselines", "Monte-Carlo check of the closed-form guessing baselines");
    static std::size_t vb_samples = 1000000;
    static std::uint64_t vb_seed = 12345;
    verify_cmd->add_option("--samples", vb_samples, "samples per point (default 1e6)");
    verify_cmd->add_option("--seed", vb_seed, "random seed");
    verify_cmd->callback(
        [&] { action = [&] { return run_verify_baselines(vb_samples, vb_seed); }; });

    CLI11_PARSE(app, argc, argv);

    try {
        return action ? action() : 1;
    } catch (const SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.failure() == SolverFailure::NonConvergence ? 3 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
