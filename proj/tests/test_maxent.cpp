#include <catch2/catch_amalgamated.hpp>

#include <uisbench/maxent.hpp>

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

using namespace uisbench;

namespace {

std::vector<std::string> prop_names(int m) {
    std::vector<std::string> out;
    for (int j = 0; j < m; ++j) out.push_back(std::string(1, static_cast<char>('a' + j)));
    return out;
}

std::vector<double> random_weights(std::mt19937& rng, int m) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> w(std::size_t{1} << m);
    double total = 0.0;
    for (double& x : w) total += (x = u(rng));
    for (double& x : w) x /= total;
    return w;
}

LinearConstraint normalization_row(int m) {
    LinearConstraint c;
    c.origin = "normalization";
    c.target = 1.0;
    for (std::uint32_t e = 0; e < (std::uint32_t{1} << m); ++e)
        c.coefficients.emplace_back(e, 1.0);
    return c;
}

LinearConstraint marginal_row(int m, int prop, double target) {
    LinearConstraint c;
    c.origin = std::string(1, static_cast<char>('a' + prop)) + " marginal";
    c.target = target;
    for (std::uint32_t e = 0; e < (std::uint32_t{1} << m); ++e)
        if ((e >> prop) & 1u) c.coefficients.emplace_back(e, 1.0);
    return c;
}

// A dense row with random coefficients, made satisfiable by aiming it at a
// known reference distribution.
LinearConstraint random_row(std::mt19937& rng, const std::vector<double>& ref) {
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    std::bernoulli_distribution keep(0.7);
    LinearConstraint c;
    c.origin = "random row";
    do {
        c.coefficients.clear();
        for (std::uint32_t e = 0; e < ref.size(); ++e)
            if (keep(rng)) c.coefficients.emplace_back(e, coeff(rng));
    } while (c.coefficients.empty());
    c.target = 0.0;
    for (const auto& [e, v] : c.coefficients) c.target += v * ref[e];
    return c;
}

double max_violation(const std::vector<LinearConstraint>& rows,
                     const std::vector<double>& w) {
    double worst = 0.0;
    for (const auto& c : rows) {
        double s = -c.target;
        for (const auto& [e, v] : c.coefficients) s += v * w[e];
        worst = std::max(worst, std::abs(s));
    }
    return worst;
}

double raw_entropy(const std::vector<double>& w) {
    double h = 0.0;
    for (double x : w)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

// Orthonormal basis for the joint null space of the rows, by elimination
// followed by Gram-Schmidt.  Independent of the solver on purpose: it is the
// measuring stick the solver is judged against.
std::vector<std::vector<double>> null_space_basis(
    const std::vector<LinearConstraint>& rows, std::size_t n) {
    std::vector<std::vector<double>> a;
    for (const auto& c : rows) {
        std::vector<double> dense(n, 0.0);
        for (const auto& [e, v] : c.coefficients) dense[e] = v;
        a.push_back(std::move(dense));
    }
    std::vector<std::size_t> pivot_cols;
    std::size_t row = 0;
    for (std::size_t col = 0; col < n && row < a.size(); ++col) {
        std::size_t best = row;
        for (std::size_t r = row + 1; r < a.size(); ++r)
            if (std::abs(a[r][col]) > std::abs(a[best][col])) best = r;
        if (std::abs(a[best][col]) < 1e-10) continue;
        std::swap(a[row], a[best]);
        for (std::size_t r = 0; r < a.size(); ++r) {
            if (r == row) continue;
            double f = a[r][col] / a[row][col];
            if (f == 0.0) continue;
            for (std::size_t k = 0; k < n; ++k) a[r][k] -= f * a[row][k];
        }
        pivot_cols.push_back(col);
        ++row;
    }
    std::vector<std::vector<double>> basis;
    for (std::size_t col = 0; col < n; ++col) {
        bool is_pivot = false;
        for (std::size_t p : pivot_cols)
            if (p == col) is_pivot = true;
        if (is_pivot) continue;
        std::vector<double> v(n, 0.0);
        v[col] = 1.0;
        for (std::size_t r = 0; r < pivot_cols.size(); ++r)
            v[pivot_cols[r]] = -a[r][col] / a[r][pivot_cols[r]];
        basis.push_back(std::move(v));
    }
    for (std::size_t i = 0; i < basis.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < n; ++k) dot += basis[i][k] * basis[j][k];
            for (std::size_t k = 0; k < n; ++k) basis[i][k] -= dot * basis[j][k];
        }
        double norm = 0.0;
        for (double x : basis[i]) norm += x * x;
        norm = std::sqrt(norm);
        REQUIRE(norm > 1e-8);
        for (double& x : basis[i]) x /= norm;
    }
    return basis;
}

// Best entropy over the feasible set, swept on a grid in null-space
// coordinates around the candidate point.  Points with any weight under the
// floor are skipped so the entropy surface stays smooth over the sweep.
double grid_search_entropy(const std::vector<double>& x,
                           const std::vector<std::vector<double>>& basis,
                           double half_width, double step, double floor) {
    const std::size_t n = x.size();
    double best = -1.0;
    std::vector<double> w(n);
    auto consider = [&](const std::vector<double>& t) {
        for (std::size_t k = 0; k < n; ++k) {
            double v = x[k];
            for (std::size_t i = 0; i < basis.size(); ++i) v += t[i] * basis[i][k];
            w[k] = v;
        }
        for (double v : w)
            if (v < floor) return;
        best = std::max(best, raw_entropy(w));
    };
    if (basis.empty()) {
        consider({});
        return best;
    }
    std::vector<double> t(basis.size(), -half_width);
    while (true) {
        consider(t);
        std::size_t i = 0;
        while (i < t.size()) {
            t[i] += step;
            if (t[i] <= half_width + step / 2) break;
            t[i] = -half_width;
            ++i;
        }
        if (i == t.size()) break;
    }
    return best;
}

}  // namespace

TEST_CASE("maximum entropy beats every distribution on a feasible-set grid", "[maxent]") {
    std::mt19937 rng(20240811);
    int rounds_checked = 0;
    struct Shape { int m; int rows; };
    const Shape shapes[] = {{2, 1}, {2, 1}, {2, 2}, {2, 2}, {2, 2}, {3, 5}, {3, 5}};
    for (const Shape& shape : shapes) {
        const std::size_t n = std::size_t{1} << shape.m;
        std::vector<double> ref = random_weights(rng, shape.m);
        std::vector<LinearConstraint> rows;
        for (int k = 0; k < shape.rows; ++k) rows.push_back(random_row(rng, ref));
        rows.push_back(normalization_row(shape.m));

        SolverResult res = max_entropy(prop_names(shape.m), rows);
        CHECK(res.report.max_residual <= 1e-8);
        CHECK(max_violation(rows, res.joint.weights()) <= 1e-7);
        CHECK(res.report.objective_nats ==
              Catch::Approx(entropy(res.joint)).margin(1e-12));

        auto basis = null_space_basis(rows, n);
        if (basis.size() > 2) continue;  // grid too coarse to sweep honestly
        double best = grid_search_entropy(res.joint.weights(), basis, 1.5, 2e-3, 0.05);
        if (best < 0.0) continue;  // sweep found no point above the floor
        CHECK(entropy(res.joint) + 1e-4 >= best);
        ++rounds_checked;
    }
    CHECK(rounds_checked >= 5);
}

TEST_CASE("marginal constraints alone produce an independent joint", "[maxent]") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.15, 0.85);
    for (int round = 0; round < 5; ++round) {
        const int m = 3;
        double p[3] = {u(rng), u(rng), u(rng)};
        std::vector<LinearConstraint> rows;
        for (int j = 0; j < m; ++j) rows.push_back(marginal_row(m, j, p[j]));
        rows.push_back(normalization_row(m));

        SolverResult res = max_entropy(prop_names(m), rows);
        for (std::uint32_t e = 0; e < res.joint.event_count(); ++e) {
            double expect = 1.0;
            for (int j = 0; j < m; ++j)
                expect *= ((e >> j) & 1u) ? p[j] : 1.0 - p[j];
            CHECK(res.joint.weight(e) == Catch::Approx(expect).margin(1e-6));
        }
    }
}

TEST_CASE("projecting onto certain evidence is the same as conditioning", "[maxent]") {
    std::mt19937 rng(99);
    for (int round = 0; round < 20; ++round) {
        const int m = 2 + round % 3;
        const std::size_t n = std::size_t{1} << m;
        JointDistribution prior(prop_names(m), random_weights(rng, m));
        const int j = round % m;
        const double v = (round % 2 == 0) ? 1.0 : 0.0;

        std::vector<LinearConstraint> rows = {marginal_row(m, j, v),
                                              normalization_row(m)};
        SolverResult res = min_cross_entropy(prior, rows);

        double kept = 0.0;
        for (std::uint32_t e = 0; e < n; ++e)
            if ((((e >> j) & 1u) != 0) == (v == 1.0)) kept += prior.weight(e);
        for (std::uint32_t e = 0; e < n; ++e) {
            bool inside = (((e >> j) & 1u) != 0) == (v == 1.0);
            double expect = inside ? prior.weight(e) / kept : 0.0;
            CHECK(res.joint.weight(e) == Catch::Approx(expect).margin(1e-8));
        }
    }
}

TEST_CASE("a single soft marginal update rescales the two halves", "[maxent]") {
    std::mt19937 rng(4242);
    for (int round = 0; round < 10; ++round) {
        const int m = 3;
        JointDistribution prior(prop_names(m), random_weights(rng, m));
        const int j = round % m;
        const double v = 0.2 + 0.06 * round;
        const double before = prior.marginal(j);

        std::vector<LinearConstraint> rows = {marginal_row(m, j, v),
                                              normalization_row(m)};
        SolverResult res = min_cross_entropy(prior, rows);
        for (std::uint32_t e = 0; e < prior.event_count(); ++e) {
            double scale = ((e >> j) & 1u) ? v / before : (1.0 - v) / (1.0 - before);
            CHECK(res.joint.weight(e) ==
                  Catch::Approx(prior.weight(e) * scale).margin(1e-10));
        }
    }
}

TEST_CASE("a distribution that already fits is returned unchanged", "[maxent]") {
    const int m = 3;
    JointDistribution prior(prop_names(m), std::vector<double>(8, 0.125));
    std::vector<LinearConstraint> rows = {marginal_row(m, 1, 0.4),
                                          normalization_row(m)};
    SolverResult first = min_cross_entropy(prior, rows);
    SolverResult again = min_cross_entropy(first.joint, rows);
    CHECK(again.report.iterations == 0);
    for (std::uint32_t e = 0; e < 8; ++e)
        CHECK(again.joint.weight(e) == first.joint.weight(e));
}

TEST_CASE("contradictory targets surface as infeasible", "[maxent]") {
    const int m = 2;
    std::vector<LinearConstraint> rows = {marginal_row(m, 0, 0.3),
                                          marginal_row(m, 0, 0.7),
                                          normalization_row(m)};
    try {
        max_entropy(prop_names(m), rows);
        FAIL("expected the solver to give up");
    } catch (const SolverError& e) {
        CHECK(e.failure() == SolverFailure::Infeasible);
        CHECK(std::string(e.what()).find("marginal") != std::string::npos);
    }
}

TEST_CASE("targets outside the prior support are a conflict", "[maxent]") {
    const int m = 2;
    JointDistribution prior(prop_names(m), {1.0, 0.0, 0.0, 0.0});
    std::vector<LinearConstraint> rows = {marginal_row(m, 0, 0.5),
                                          normalization_row(m)};
    try {
        min_cross_entropy(prior, rows);
        FAIL("expected the solver to give up");
    } catch (const SolverError& e) {
        CHECK(e.failure() == SolverFailure::SupportConflict);
    }
}

TEST_CASE("hard conditional rules carve the support exactly", "[maxent]") {
    RuleSet rs = parse_ruleset(R"(
        prop a leaf
        prop c goal
        P(c | a) = 1
        P(a) = 0.6
    )");
    SolverResult res = max_entropy({"a", "c"}, compile_constraints(rs));
    // bit 0 = a, bit 1 = c; a&~c is impossible, the rest splits 0.2/0.6/0.2
    CHECK(res.joint.weight(0b01) == 0.0);
    CHECK(res.joint.weight(0b00) == Catch::Approx(0.2).margin(1e-9));
    CHECK(res.joint.weight(0b10) == Catch::Approx(0.2).margin(1e-9));
    CHECK(res.joint.weight(0b11) == Catch::Approx(0.6).margin(1e-9));
    CHECK(res.report.support_events == 3);
}

TEST_CASE("one conditional rule lands on the exponential-family form", "[maxent]") {
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        RuleSet rs = parse_ruleset("prop a leaf\nprop b leaf\nprop c goal\n"
                                   "P(c | a & b) = " + std::to_string(p));
        SolverResult res = max_entropy({"a", "b", "c"}, compile_constraints(rs));

        // stationarity forces every unconstrained event to one weight and the
        // a&b pair to carry the odds ratio
        const double r = p / (1.0 - p);
        const double top = std::pow(r, 1.0 - p);
        const double bottom = std::pow(r, -p);
        const double z = 6.0 + top + bottom;
        for (std::uint32_t e = 0; e < 8; ++e) {
            double expect = 1.0 / z;
            if (e == 0b111) expect = top / z;
            if (e == 0b011) expect = bottom / z;
            CHECK(res.joint.weight(e) == Catch::Approx(expect).margin(1e-8));
        }
        CHECK(res.joint.marginal(2) == Catch::Approx((top + 3.0) / z).margin(1e-8));
    }
}
