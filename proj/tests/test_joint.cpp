#include <catch2/catch_amalgamated.hpp>

#include <uisbench/joint.hpp>

#include <cmath>
#include <sstream>

using namespace uisbench;

TEST_CASE("joint distributions validate their shape and mass", "[joint]") {
    std::vector<std::string> ab = {"a", "b"};

    CHECK_NOTHROW(JointDistribution(ab, {0.1, 0.2, 0.3, 0.4}));
    CHECK_THROWS_AS(JointDistribution(ab, {0.5, 0.5}), Error);           // 2 != 2^2
    CHECK_THROWS_AS(JointDistribution(ab, {0.5, 0.5, 0.5, 0.5}), Error); // mass 2
    CHECK_THROWS_AS(JointDistribution(ab, {0.6, 0.6, -0.1, -0.1}), Error);

    std::vector<std::string> many(21, "p");
    for (std::size_t i = 0; i < many.size(); ++i) many[i] += std::to_string(i);
    CHECK_THROWS_AS(JointDistribution::uniform(many), Error);            // above cap
}

TEST_CASE("uniform factory spreads mass evenly", "[joint]") {
    JointDistribution jd = JointDistribution::uniform({"a", "b", "c"});
    REQUIRE(jd.event_count() == 8);
    for (std::uint32_t e = 0; e < 8; ++e) CHECK(jd.weight(e) == 0.125);
    CHECK(jd.marginal(0) == 0.5);
    CHECK(jd.marginal(2) == 0.5);
}

TEST_CASE("event probabilities and marginals sum the right weights", "[joint]") {
    // bit 0 = a, bit 1 = b; weights indexed 00, 01 (a), 10 (b), 11 (ab)
    JointDistribution jd({"a", "b"}, {0.1, 0.2, 0.3, 0.4});
    CHECK(jd.marginal(0) == Catch::Approx(0.6).margin(1e-15));
    CHECK(jd.marginal(1) == Catch::Approx(0.7).margin(1e-15));

    Formula both = Formula::conj(Formula::var(0), Formula::var(1));
    CHECK(jd.probability(both) == Catch::Approx(0.4).margin(1e-15));
    Formula either = Formula::disj(Formula::var(0), Formula::var(1));
    CHECK(jd.probability(either) == Catch::Approx(0.9).margin(1e-15));
    CHECK(jd.probability(Formula::negation(Formula::var(0))) ==
          Catch::Approx(0.4).margin(1e-15));
    CHECK(jd.probability(Formula::truth()) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("entropy and divergence behave on known distributions", "[joint]") {
    JointDistribution flat = JointDistribution::uniform({"a", "b"});
    CHECK(entropy(flat) == Catch::Approx(2.0 * std::log(2.0)).epsilon(1e-14));

    JointDistribution point({"a", "b"}, {1.0, 0.0, 0.0, 0.0});
    CHECK(entropy(point) == 0.0);

    // divergence of a point mass from uniform over 4 events is log 4
    CHECK(cross_entropy(point, flat) == Catch::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(cross_entropy(flat, flat) == Catch::Approx(0.0).margin(1e-15));

    JointDistribution other({"a"}, {0.5, 0.5});
    CHECK_THROWS_AS(cross_entropy(flat, other), Error);
    // mass where the reference has none is undefined
    CHECK_THROWS_AS(cross_entropy(flat, point), Error);
}

TEST_CASE("unconditional rules compile to marginal rows", "[joint]") {
    RuleSet rs = parse_ruleset("prop a leaf\nprop b leaf\nP(a) = 0.3");
    auto cs = compile_constraints(rs);
    REQUIRE(cs.size() == 2);  // the rule plus normalization

    const LinearConstraint& row = cs[0];
    CHECK(row.target == 0.3);
    REQUIRE(row.coefficients.size() == 2);  // events 01 and 11
    CHECK(row.coefficients[0].first == 0b01);
    CHECK(row.coefficients[1].first == 0b11);
    CHECK(row.coefficients[0].second == 1.0);

    const LinearConstraint& norm = cs[1];
    CHECK(norm.origin == "normalization");
    CHECK(norm.target == 1.0);
    REQUIRE(norm.coefficients.size() == 4);
    for (std::uint32_t e = 0; e < 4; ++e) {
        CHECK(norm.coefficients[e].first == e);
        CHECK(norm.coefficients[e].second == 1.0);
    }
}

TEST_CASE("conditional rules compile to homogeneous rows", "[joint]") {
    RuleSet rs = parse_ruleset(R"(
        prop a leaf
        prop b leaf
        prop c goal
        P(c | a & b) = 0.4
    )");
    auto cs = compile_constraints(rs);
    REQUIRE(cs.size() == 2);

    // (1 - 0.4) on a&b&c, -0.4 on a&b&~c, target 0
    const LinearConstraint& row = cs[0];
    CHECK(row.target == 0.0);
    REQUIRE(row.coefficients.size() == 2);
    CHECK(row.coefficients[0].first == 0b011);  // a, b, not c
    CHECK(row.coefficients[0].second == Catch::Approx(-0.4));
    CHECK(row.coefficients[1].first == 0b111);
    CHECK(row.coefficients[1].second == Catch::Approx(0.6));
    CHECK(row.origin == "P(c | a & b) = 0.4");
}

TEST_CASE("hard rules drop their zero coefficients", "[joint]") {
    RuleSet rs = parse_ruleset(R"(
        prop a leaf
        prop c goal
        P(c | a) = 1
        P(c | ~a) = 0
    )");
    auto cs = compile_constraints(rs);
    REQUIRE(cs.size() == 3);

    // strength 1 leaves only -1 on a&~c: a support restriction in disguise
    REQUIRE(cs[0].coefficients.size() == 1);
    CHECK(cs[0].coefficients[0].first == 0b01);
    CHECK(cs[0].coefficients[0].second == -1.0);
    CHECK(cs[0].target == 0.0);

    // strength 0 leaves only +1 on ~a&c
    REQUIRE(cs[1].coefficients.size() == 1);
    CHECK(cs[1].coefficients[0].first == 0b10);
    CHECK(cs[1].coefficients[0].second == 1.0);
    CHECK(cs[1].target == 0.0);
}

TEST_CASE("evidence compiles to leaf marginal rows in index order", "[joint]") {
    RuleSet rs = parse_ruleset(R"(
        prop a leaf
        prop b leaf
        prop g goal
        P(g | a & b) = 0.5
    )");
    Evidence ev = parse_evidence("b = 0.9\na = 0.2", rs);
    auto cs = compile_evidence(rs, ev);
    REQUIRE(cs.size() == 2);
    CHECK(cs[0].origin == "a = 0.2");
    CHECK(cs[0].target == 0.2);
    CHECK(cs[1].origin == "b = 0.9");
    CHECK(cs[1].target == 0.9);
    // each row covers exactly the 2^(m-1) events with that bit set
    REQUIRE(cs[0].coefficients.size() == 4);
    for (const auto& [e, c] : cs[0].coefficients) {
        CHECK((e & 1u) == 1u);
        CHECK(c == 1.0);
    }
}

TEST_CASE("joint CSV export lists events in bit order", "[joint]") {
    JointDistribution jd({"a", "b"}, {0.5, 0.25, 0.125, 0.125});
    std::ostringstream os;
    write_joint_csv(jd, os);
    CHECK(os.str() ==
          "a,b,weight\n"
          "0,0,0.5\n"
          "1,0,0.25\n"
          "0,1,0.125\n"
          "1,1,0.125\n");
}
