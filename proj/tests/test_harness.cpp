#include <catch2/catch_amalgamated.hpp>

#include <uisbench/harness.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace uisbench;

namespace {

std::string read_data_file(const char* name) {
    std::ifstream in(std::string(UISBENCH_DATA_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const std::vector<EngineKind> four_engines = {EngineKind::Fst, EngineKind::Mycin,
                                              EngineKind::Dst, EngineKind::Ind};

double curve_value(const CurveTable& table, double x, const std::string& engine) {
    for (const auto& row : table.rows)
        if (row.engine == engine && std::abs(row.x - x) < 1e-9) return row.value;
    FAIL("no curve row for " + engine + " at x = " + std::to_string(x));
    return 0.0;
}

}  // namespace

TEST_CASE("the pregnancy net separates the reference from every engine", "[harness]") {
    RuleSet rs = parse_ruleset(read_data_file("pregnancy.rules"));
    Evidence ev = parse_evidence(read_data_file("pregnancy.case"), rs);
    Experiment exp{rs, {ev}, four_engines, {}, {}};

    PipelineResult pr = run_pipeline(exp);
    CHECK(pr.prior_report.max_residual <= 1e-8);
    REQUIRE(pr.cases.size() == 1);
    const CaseResult& cr = pr.cases.front();
    CHECK(cr.posterior_report.max_residual <= 1e-8);

    const int preg = rs.prop_index("preg");
    REQUIRE(preg >= 0);
    // the two-stage reference notices that certain maleness rules it out
    CHECK(cr.posterior.marginal(preg) <= 1e-6);

    // the one-shot engines do not; the downward-chaining ones do
    REQUIRE(cr.traces.size() == 4);
    for (const auto& trace : cr.traces) {
        const NodeVerdict* v = trace.verdict_for(preg);
        REQUIRE(v != nullptr);
        switch (trace.kind) {
            case EngineKind::Fst:
            case EngineKind::Ind:
                CHECK(*v->point == Catch::Approx(0.4).margin(1e-12));
                break;
            case EngineKind::Mycin:
                CHECK(*v->point == Catch::Approx(0.0).margin(1e-12));
                break;
            case EngineKind::Dst:
                CHECK(v->interval->lower == 0.0);
                CHECK(v->interval->upper == 0.0);
                break;
            default: FAIL("unexpected engine in trace");
        }
    }
    REQUIRE(cr.report.has_value());
    REQUIRE(pr.pooled.has_value());
    // exact engines score a perfect 1, the others sit at error 0.4
    const auto& cells = pr.pooled->cells;
    CHECK(cells.at(EngineKind::Mycin)[2].mean_eta == Catch::Approx(1.0).margin(1e-12));
    CHECK(cells.at(EngineKind::Dst)[2].mean_eta == Catch::Approx(1.0).margin(1e-12));
    CHECK(cells.at(EngineKind::Fst)[2].mean_abs == Catch::Approx(0.4).margin(1e-9));
}

TEST_CASE("the prior fit lands on stable marginals", "[harness]") {
    RuleSet rs = parse_ruleset(read_data_file("pregnancy.rules"));
    Experiment exp{rs, {}, {}, {}, {}};
    PipelineResult pr = run_pipeline(exp);
    // regression anchors for the bundled net
    CHECK(pr.prior_marginals[static_cast<std::size_t>(rs.prop_index("swollen"))] ==
          Catch::Approx(0.49878891097).margin(1e-6));
    CHECK(pr.prior_marginals[static_cast<std::size_t>(rs.prop_index("male"))] ==
          Catch::Approx(0.32506055445).margin(1e-6));
    CHECK(pr.prior_marginals[static_cast<std::size_t>(rs.prop_index("preg"))] ==
          Catch::Approx(0.34987889110).margin(1e-6));
    CHECK(entropy(pr.prior) == Catch::Approx(2.48248740048).margin(1e-6));
}

TEST_CASE("a case with no evidence keeps the prior", "[harness]") {
    RuleSet rs = parse_ruleset(read_data_file("pregnancy.rules"));
    Experiment exp{rs, {Evidence{}}, {EngineKind::Fst}, {}, {}};
    PipelineResult pr = run_pipeline(exp);
    REQUIRE(pr.cases.size() == 1);
    CHECK(pr.cases[0].posterior_report.iterations == 0);
    for (std::uint32_t e = 0; e < pr.prior.event_count(); ++e)
        CHECK(pr.cases[0].posterior.weight(e) == pr.prior.weight(e));
}

TEST_CASE("an engine that cannot run is skipped with a notice", "[harness]") {
    // the hard rules drive the consequent's prior to one, which the cf
    // engine cannot anchor at
    RuleSet rs = parse_ruleset(R"(
        prop a leaf
        prop g goal
        P(g | a) = 1
        P(a) = 1
    )");
    Evidence ev = parse_evidence("a = 1", rs);
    Experiment exp{rs, {ev}, {EngineKind::Mycin, EngineKind::Fst}, {}, {}};
    PipelineResult pr = run_pipeline(exp);
    REQUIRE(pr.cases.size() == 1);
    const CaseResult& cr = pr.cases.front();
    REQUIRE(cr.traces.size() == 1);  // fst only
    CHECK(cr.traces[0].kind == EngineKind::Fst);
    bool noticed = false;
    for (const auto& note : cr.notices)
        if (note.find("mycin skipped") != std::string::npos) noticed = true;
    CHECK(noticed);
    REQUIRE(cr.report.has_value());
    CHECK(cr.report->cells.count(EngineKind::Mycin) == 0);
}

TEST_CASE("combinator sweeps hit their closed-form anchors", "[harness]") {
    CurveTable fig1 = sweep(figure_preset(1));
    CHECK(curve_value(fig1, 0.4, "maxc") == Catch::Approx(0.4).margin(1e-12));
    CHECK(curve_value(fig1, 0.4, "ind") == Catch::Approx(0.64).margin(1e-12));
    CHECK(curve_value(fig1, 0.4, "minc") == Catch::Approx(0.8).margin(1e-12));

    CurveTable fig3 = sweep(figure_preset(3));
    CHECK(curve_value(fig3, 0.0, "maxc") == Catch::Approx(0.0).margin(1e-12));
    CHECK(curve_value(fig3, 0.0, "ind") == Catch::Approx(0.3).margin(1e-12));
    CHECK(curve_value(fig3, 0.0, "minc") == Catch::Approx(0.6).margin(1e-12));
    CHECK(curve_value(fig3, 0.0, "myc.1") == Catch::Approx(0.1 * (1.0 - 1.0 / 3.0)).margin(1e-12));
    CHECK(curve_value(fig3, 0.0, "myc.3") == Catch::Approx(0.3 * (1.0 - 1.0 / 7.0)).margin(1e-12));
    CHECK(curve_value(fig3, 0.0, "myc.5") == Catch::Approx(0.6).margin(1e-12));
    CHECK(curve_value(fig3, 1.0, "maxc") == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("rule sweeps include the exact reference curve", "[harness]") {
    SweepSpec spec = figure_preset(5);
    spec.start = 0.0;
    spec.stop = 0.5;
    spec.step = 0.25;
    CurveTable table = sweep(spec);

    CHECK(curve_value(table, 0.0, "fst") == Catch::Approx(0.0).margin(1e-12));
    CHECK(curve_value(table, 0.0, "ind") == Catch::Approx(0.22).margin(1e-12));
    CHECK(curve_value(table, 0.0, "minc") == Catch::Approx(0.5).margin(1e-12));
    CHECK(curve_value(table, 0.0, "mycin") == Catch::Approx(0.225).margin(1e-9));
    // exact-joint value confirmed against an outside solve of the same
    // stationarity conditions
    CHECK(curve_value(table, 0.0, "mep") == Catch::Approx(0.2305066540).margin(1e-7));

    // running the same spec twice is bit-identical
    CurveTable again = sweep(spec);
    REQUIRE(again.rows.size() == table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        CHECK(again.rows[i].x == table.rows[i].x);
        CHECK(again.rows[i].engine == table.rows[i].engine);
        CHECK(again.rows[i].value == table.rows[i].value);
    }
}

TEST_CASE("a doubted antecedent turns the cf curve downhill", "[harness]") {
    // leaf evidence sits below the leaf's prior, so strengthening the rule
    // argues ever harder for something the engine disbelieves
    SweepSpec spec = figure_preset(6);
    spec.start = 0.1;
    spec.stop = 0.9;
    spec.step = 0.2;
    CurveTable table = sweep(spec);
    double prev = 2.0;
    for (double x : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        double v = curve_value(table, x, "mycin");
        CHECK(v < prev);
        prev = v;
    }
    CHECK(curve_value(table, 0.5, "mycin") == Catch::Approx(0.5).margin(1e-6));
    // while the possibilistic curve climbs
    CHECK(curve_value(table, 0.1, "fst") < curve_value(table, 0.9, "fst"));
}

TEST_CASE("around a weak rule the engines disagree on direction", "[harness]") {
    SweepSpec spec = figure_preset(7);
    spec.start = 0.15;
    spec.stop = 0.25;
    spec.step = 0.05;
    CurveTable table = sweep(spec);
    // raising the antecedent helps the possibilistic engine and hurts the
    // independence one
    CHECK(curve_value(table, 0.25, "fst") > curve_value(table, 0.15, "fst"));
    CHECK(curve_value(table, 0.25, "ind") < curve_value(table, 0.15, "ind"));
}

TEST_CASE("sweep specs are validated", "[harness]") {
    CHECK_THROWS_AS(figure_preset(9), Error);
    SweepSpec bad = figure_preset(1);
    bad.step = 0.0;
    CHECK_THROWS_AS(sweep(bad), Error);
    SweepSpec outside = figure_preset(1);
    outside.stop = 1.5;
    CHECK_THROWS_AS(sweep(outside), Error);
    SweepSpec myc = figure_preset(3);
    myc.engines.push_back(EngineKind::Mycin);
    CHECK_THROWS_WITH(sweep(myc), Catch::Matchers::ContainsSubstring("cf_priors"));
}

TEST_CASE("curve tables export to CSV", "[harness]") {
    CurveTable table;
    table.rows = {{0.5, "fst", 0.25}, {0.5, "mep", 0.125}, {0.75, "fst", 1.0}};
    std::ostringstream os;
    write_curve_csv(os, table);
    CHECK(os.str() ==
          "x,engine,value\n"
          "0.5,fst,0.25\n"
          "0.5,mep,0.125\n"
          "0.75,fst,1\n");
}

TEST_CASE("the reactor benchmark runs one case per goal", "[harness]") {
    RuleSet rs = parse_ruleset(read_data_file("reactor.rules"));
    REQUIRE(rs.props.size() == 18);
    REQUIRE(rs.rules.size() == 11);

    ReactorResult result = reactor_benchmark(rs);
    REQUIRE(result.case_names.size() == 4);
    CHECK(result.case_names[0] == "acc_a");
    CHECK(result.case_names[3] == "acc_d");
    REQUIRE(result.pipeline.cases.size() == 4);

    CHECK(result.pipeline.prior_report.max_residual <= 1e-8);
    for (const auto& cr : result.pipeline.cases) {
        CHECK(cr.posterior_report.max_residual <= 1e-8);
        // every leaf pinned either up or down
        int up = 0, down = 0;
        for (const auto& [prop, v] : cr.evidence.values) {
            CHECK(rs.props[static_cast<std::size_t>(prop)].kind == PropKind::Leaf);
            if (v == 0.95) ++up;
            else if (v == 0.05) ++down;
        }
        CHECK(up + down == 10);
        CHECK(up >= 2);

        // a full four-engine, both-classes report
        REQUIRE(cr.report.has_value());
        for (EngineKind k : four_engines) {
            REQUIRE(cr.report->cells.count(k) == 1);
            CHECK(cr.report->cells.at(k)[0].count == 4);  // mids
            CHECK(cr.report->cells.at(k)[1].count == 4);  // goals
            CHECK(cr.report->cells.at(k)[2].count == 8);
        }
    }

    // the first case supports its own goal's chain
    const Evidence& ev_a = result.pipeline.cases[0].evidence;
    CHECK(ev_a.values.at(rs.prop_index("press_low")) == 0.95);
    CHECK(ev_a.values.at(rs.prop_index("level_low")) == 0.95);
    CHECK(ev_a.values.at(rs.prop_index("valve_ind")) == 0.95);
    CHECK(ev_a.values.at(rs.prop_index("rad_alarm")) == 0.05);
}

TEST_CASE("reactor levels are adjustable", "[harness]") {
    RuleSet rs = parse_ruleset(read_data_file("reactor.rules"));
    ReactorOptions opts;
    opts.supporter_level = 0.9;
    opts.background_level = 0.2;
    opts.engines = {EngineKind::Fst};
    ReactorResult result = reactor_benchmark(rs, opts);
    const Evidence& ev = result.pipeline.cases[0].evidence;
    CHECK(ev.values.at(rs.prop_index("press_low")) == 0.9);
    CHECK(ev.values.at(rs.prop_index("rad_alarm")) == 0.2);
}
