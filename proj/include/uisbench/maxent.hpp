#pragma once

// Maximum-entropy and minimum-cross-entropy fitting of a joint distribution
// to linear constraints.
//
// Both problems are information projections of a base measure (uniform, or a
// supplied prior) onto the constraint set.  The solver runs cyclic single-
// constraint projections: each step rescales the weights of one constraint's
// events so that constraint holds exactly, which for the rows produced by
// compile_constraints has a closed form.  Rules with probability exactly 0
// or 1 never reach the iteration; they are resolved up front by deleting the
// excluded events from the support.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "joint.hpp"

namespace uisbench {

struct SolverOptions {
    double tolerance = 1e-8;        // max constraint residual at convergence
    int max_iterations = 10000;     // full cycles over the constraint list
    double stall_threshold = 1e-4;  // residual above this may stall into infeasible
    int stall_window = 500;         // cycles without improvement before giving up
    int prop_cap = JointDistribution::default_prop_cap;
};

struct SolverReport {
    int iterations = 0;
    double max_residual = 0.0;
    double objective_nats = 0.0;     // entropy, or KL divergence from the prior
    std::size_t support_events = 0;  // events left after hard restrictions
};

enum class SolverFailure { Infeasible, NonConvergence, SupportConflict };

class SolverError : public Error {
public:
    SolverError(SolverFailure failure, const std::string& message)
        : Error(message), failure_(failure) {}
    SolverFailure failure() const noexcept { return failure_; }

private:
    SolverFailure failure_;
};

struct SolverResult {
    JointDistribution joint;
    SolverReport report;
};

namespace detail {

struct Group {
    double gamma = 0.0;
    std::vector<std::uint32_t> events;
};

struct IterRow {
    enum class Shape { Marginal, OppositePair, General };
    Shape shape = Shape::General;
    std::vector<Group> groups;
    double v = 0.0;       // Marginal target fraction
    double target = 0.0;  // raw row target (General)
    const LinearConstraint* src = nullptr;
};

inline std::vector<Group> groups_over(const LinearConstraint& c,
                                      const std::vector<char>& alive) {
    std::map<double, std::vector<std::uint32_t>> by_gamma;
    for (const auto& [e, coeff] : c.coefficients)
        if (alive[e]) by_gamma[coeff].push_back(e);
    std::vector<Group> out;
    for (auto& [gamma, events] : by_gamma) out.push_back({gamma, std::move(events)});
    return out;
}

[[noreturn]] inline void fail_row(const LinearConstraint& c, bool zero_prior_involved,
                                  const std::string& why) {
    if (zero_prior_involved)
        throw SolverError(SolverFailure::SupportConflict,
                          "constraint '" + c.origin +
                              "' requires probability on events outside the prior's "
                              "support (" +
                              why + ")");
    throw SolverError(SolverFailure::Infeasible,
                      "constraint '" + c.origin + "' cannot be satisfied: " + why);
}

// Monotone 1-D solve for the scaling exponent of a general row.  Over the
// tilted family p(d) ~ p * exp(d * c), the expectation of c is nondecreasing
// in d, so the residual has a single sign change.
inline double solve_general_exponent(const IterRow& row, const std::vector<double>& w,
                                     double total) {
    auto residual_at = [&](double d) {
        double shift = 0.0;
        for (const auto& g : row.groups) shift = std::max(shift, d * g.gamma);
        double scale = std::exp(-shift);  // applied uniformly; sign is unaffected
        double lhs = 0.0, mass = 0.0, covered = 0.0;
        for (const auto& g : row.groups) {
            double s = 0.0;
            for (std::uint32_t e : g.events) s += w[e];
            covered += s;
            double f = std::exp(d * g.gamma - shift);
            lhs += g.gamma * s * f;
            mass += s * f;
        }
        mass += (total - covered) * scale;
        return lhs - row.target * mass;
    };
    double lo = -1.0, hi = 1.0;
    double flo = residual_at(lo), fhi = residual_at(hi);
    int expand = 0;
    while (flo > 0.0 && expand < 80) {
        lo *= 2.0;
        flo = residual_at(lo);
        ++expand;
    }
    while (fhi < 0.0 && expand < 160) {
        hi *= 2.0;
        fhi = residual_at(hi);
        ++expand;
    }
    if (flo > 0.0 || fhi < 0.0)
        throw SolverError(SolverFailure::Infeasible,
                          "constraint '" + row.src->origin +
                              "' target is outside the range attainable on the support");
    for (int i = 0; i < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++i) {
        double mid = 0.5 * (lo + hi);
        if (residual_at(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

struct Projection {
    std::vector<double> weights;
    SolverReport report;
};

inline Projection project(const std::vector<double>& base,
                          const std::vector<LinearConstraint>& constraints,
                          const SolverOptions& opts) {
    const std::size_t n = base.size();
    std::vector<char> alive(n, 0);
    std::size_t alive_count = 0;
    for (std::size_t e = 0; e < n; ++e)
        if (base[e] > 0.0) {
            alive[e] = 1;
            ++alive_count;
        }
    std::vector<char> zero_prior_row(constraints.size(), 0);
    for (std::size_t j = 0; j < constraints.size(); ++j) {
        for (const auto& [e, coeff] : constraints[j].coefficients) {
            if (e >= n) throw Error("constraint references an event outside the space");
            if (base[e] == 0.0) zero_prior_row[j] = 1;
        }
    }

    const double eps = 1e-13;
    auto kill = [&](const std::vector<std::uint32_t>& events) {
        for (std::uint32_t e : events)
            if (alive[e]) {
                alive[e] = 0;
                --alive_count;
            }
    };

    // Support restriction to a fixed point.  Each pass rereads every row over
    // the current support; a row whose target forces all or none of its mass
    // deletes events, which can in turn degrade other rows.
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t j = 0; j < constraints.size(); ++j) {
            const LinearConstraint& c = constraints[j];
            auto groups = groups_over(c, alive);
            if (groups.empty()) {
                if (std::abs(c.target) > eps)
                    fail_row(c, zero_prior_row[j],
                             "no events with nonzero coefficient remain");
                continue;
            }
            std::size_t covered = 0;
            for (const auto& g : groups) covered += g.events.size();
            const bool covers_support = covered == alive_count;
            if (groups.size() == 1) {
                const Group& g = groups[0];
                if (covers_support) {
                    if (std::abs(g.gamma - c.target) > 1e-12 * std::max(1.0, std::abs(c.target)))
                        fail_row(c, zero_prior_row[j],
                                 "it fixes the whole support to an impossible value");
                    continue;
                }
                double v = c.target / g.gamma;
                if (v < -eps || v > 1.0 + eps)
                    fail_row(c, zero_prior_row[j], "required mass fraction is outside [0, 1]");
                if (v <= eps) {
                    kill(g.events);
                    changed = true;
                } else if (v >= 1.0 - eps) {
                    std::vector<std::uint32_t> complement;
                    std::vector<char> in_group(n, 0);
                    for (std::uint32_t e : g.events) in_group[e] = 1;
                    for (std::uint32_t e = 0; e < n; ++e)
                        if (alive[e] && !in_group[e]) complement.push_back(e);
                    kill(complement);
                    changed = true;
                }
                continue;
            }
            // Multi-group: a target pinned at the extreme attainable value is
            // a hard restriction as well.
            double lo = covers_support ? groups.front().gamma : std::min(0.0, groups.front().gamma);
            double hi = covers_support ? groups.back().gamma : std::max(0.0, groups.back().gamma);
            if (c.target < lo - eps || c.target > hi + eps)
                fail_row(c, zero_prior_row[j], "target is outside the attainable range");
            if (std::abs(c.target - lo) <= eps || std::abs(c.target - hi) <= eps) {
                double keep = std::abs(c.target - lo) <= eps ? lo : hi;
                std::vector<std::uint32_t> doomed;
                for (const auto& g : groups)
                    if (g.gamma != keep)
                        doomed.insert(doomed.end(), g.events.begin(), g.events.end());
                if (keep != 0.0 && !covers_support) {
                    std::vector<char> in_row(n, 0);
                    for (const auto& g : groups)
                        for (std::uint32_t e : g.events) in_row[e] = 1;
                    for (std::uint32_t e = 0; e < n; ++e)
                        if (alive[e] && !in_row[e]) doomed.push_back(e);
                }
                kill(doomed);
                changed = true;
            }
        }
        if (alive_count == 0)
            throw SolverError(SolverFailure::Infeasible,
                              "the constraints leave no possible event");
    }

    // Classify the rows that still need iterative fitting.
    std::vector<IterRow> rows;
    for (std::size_t j = 0; j < constraints.size(); ++j) {
        const LinearConstraint& c = constraints[j];
        auto groups = groups_over(c, alive);
        if (groups.empty()) continue;
        std::size_t covered = 0;
        for (const auto& g : groups) covered += g.events.size();
        const bool covers_support = covered == alive_count;
        IterRow row;
        row.src = &c;
        row.target = c.target;
        if (groups.size() == 1) {
            if (covers_support) continue;  // satisfied by normalization alone
            double v = c.target / groups[0].gamma;
            if (v <= eps || v >= 1.0 - eps) continue;  // became a restriction above
            row.shape = IterRow::Shape::Marginal;
            row.v = v;
        } else if (groups.size() == 2 && c.target == 0.0 && groups[0].gamma < 0.0 &&
                   groups[1].gamma > 0.0) {
            row.shape = IterRow::Shape::OppositePair;
        } else {
            row.shape = IterRow::Shape::General;
        }
        row.groups = std::move(groups);
        rows.push_back(std::move(row));
    }

    std::vector<double> w(n, 0.0);
    double total = 0.0;
    for (std::size_t e = 0; e < n; ++e)
        if (alive[e]) {
            w[e] = base[e];
            total += w[e];
        }
    for (std::size_t e = 0; e < n; ++e) w[e] /= total;
    total = 1.0;

    auto apply_factor = [&](const std::vector<std::uint32_t>& events, double f) {
        double before = 0.0;
        for (std::uint32_t e : events) {
            before += w[e];
            w[e] *= f;
        }
        total += before * (f - 1.0);
    };

    auto max_residual = [&] {
        double worst = 0.0;
        for (const auto& c : constraints) {
            double s = 0.0;
            for (const auto& [e, coeff] : c.coefficients) s += coeff * w[e];
            worst = std::max(worst, std::abs(s / total - c.target));
        }
        return worst;
    };

    SolverReport report;
    report.support_events = alive_count;
    double best = std::numeric_limits<double>::infinity();
    int last_improvement = 0;
    double residual = max_residual();
    int cycle = 0;
    while (residual > opts.tolerance) {
        if (cycle >= opts.max_iterations)
            throw SolverError(SolverFailure::NonConvergence,
                              "no convergence after " + std::to_string(cycle) +
                                  " cycles (residual " + std::to_string(residual) + ")");
        if (residual > opts.stall_threshold) {
            if (residual < best - 1e-12) {
                best = residual;
                last_improvement = cycle;
            } else if (cycle - last_improvement >= opts.stall_window) {
                std::string violated;
                for (const auto& c : constraints) {
                    double s = 0.0;
                    for (const auto& [e, coeff] : c.coefficients) s += coeff * w[e];
                    if (std::abs(s / total - c.target) > opts.stall_threshold) {
                        if (!violated.empty()) violated += "; ";
                        violated += c.origin;
                    }
                }
                throw SolverError(SolverFailure::Infeasible,
                                  "constraints appear jointly unsatisfiable (residual "
                                  "stalled at " +
                                      std::to_string(residual) + "): " + violated);
            }
        }
        for (const auto& row : rows) {
            switch (row.shape) {
                case IterRow::Shape::Marginal: {
                    double s1 = 0.0;
                    for (std::uint32_t e : row.groups[0].events) s1 += w[e];
                    if (s1 <= 0.0) fail_row(*row.src, false, "mass vanished numerically");
                    double f = row.v * (total - s1) / ((1.0 - row.v) * s1);
                    apply_factor(row.groups[0].events, f);
                    break;
                }
                case IterRow::Shape::OppositePair: {
                    const Group& neg = row.groups[0];
                    const Group& pos = row.groups[1];
                    double sn = 0.0, sp = 0.0;
                    for (std::uint32_t e : neg.events) sn += w[e];
                    for (std::uint32_t e : pos.events) sp += w[e];
                    if (sn <= 0.0 || sp <= 0.0)
                        fail_row(*row.src, false, "mass vanished numerically");
                    // gamma_p Sp e^{d gamma_p} + gamma_n Sn e^{d gamma_n} = 0
                    double d = std::log((-neg.gamma * sn) / (pos.gamma * sp)) /
                               (pos.gamma - neg.gamma);
                    apply_factor(pos.events, std::exp(d * pos.gamma));
                    apply_factor(neg.events, std::exp(d * neg.gamma));
                    break;
                }
                case IterRow::Shape::General: {
                    double d = solve_general_exponent(row, w, total);
                    for (const auto& g : row.groups)
                        apply_factor(g.events, std::exp(d * g.gamma));
                    break;
                }
            }
        }
        // Renormalize once per cycle so magnitudes stay tame over long runs.
        double sum = 0.0;
        for (std::size_t e = 0; e < n; ++e) sum += w[e];
        for (std::size_t e = 0; e < n; ++e) w[e] /= sum;
        total = 1.0;
        ++cycle;
        residual = max_residual();
    }

    double sum = 0.0;
    for (double x : w) sum += x;
    for (double& x : w) x /= sum;

    report.iterations = cycle;
    report.max_residual = residual;
    Projection out;
    out.weights = std::move(w);
    out.report = report;
    return out;
}

}  // namespace detail

// Maximum-entropy joint distribution subject to the constraints; the report
// objective is the entropy in nats.
inline SolverResult max_entropy(std::vector<std::string> props,
                                const std::vector<LinearConstraint>& constraints,
                                SolverOptions opts = {}) {
    if (static_cast<int>(props.size()) > opts.prop_cap)
        throw Error("proposition count exceeds the solver cap of " +
                    std::to_string(opts.prop_cap));
    const std::size_t n = std::size_t{1} << props.size();
    std::vector<double> base(n, 1.0 / static_cast<double>(n));
    auto proj = detail::project(base, constraints, opts);
    JointDistribution jd(std::move(props), std::move(proj.weights), opts.prop_cap);
    proj.report.objective_nats = entropy(jd);
    return {std::move(jd), proj.report};
}

// Minimum-cross-entropy update of a prior; the report objective is the KL
// divergence from the prior in nats.  A prior that already satisfies every
// constraint is returned unchanged.
inline SolverResult min_cross_entropy(const JointDistribution& prior,
                                      const std::vector<LinearConstraint>& constraints,
                                      SolverOptions opts = {}) {
    double worst = 0.0;
    for (const auto& c : constraints) {
        double s = 0.0;
        for (const auto& [e, coeff] : c.coefficients) {
            if (e >= prior.event_count())
                throw Error("constraint references an event outside the space");
            s += coeff * prior.weight(e);
        }
        worst = std::max(worst, std::abs(s - c.target));
    }
    if (worst <= opts.tolerance) {
        SolverReport report;
        report.max_residual = worst;
        report.objective_nats = 0.0;
        std::size_t support = 0;
        for (double x : prior.weights())
            if (x > 0.0) ++support;
        report.support_events = support;
        return {prior, report};
    }
    auto proj = detail::project(prior.weights(), constraints, opts);
    JointDistribution jd(prior.props(), std::move(proj.weights), opts.prop_cap);
    proj.report.objective_nats = cross_entropy(jd, prior);
    return {std::move(jd), proj.report};
}

}  // namespace uisbench
