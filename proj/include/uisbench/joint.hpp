#pragma once

// Full joint distributions over proposition truth assignments, and the
// compilation of probability rules into linear constraints on event weights.
//
// Event indexing: with m propositions there are 2^m events; bit j of an
// event index is the truth value of proposition j.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "rules.hpp"

namespace uisbench {

class JointDistribution {
public:
    static constexpr int default_prop_cap = 20;

    JointDistribution(std::vector<std::string> props, std::vector<double> weights,
                      int prop_cap = default_prop_cap)
        : props_(std::move(props)), weights_(std::move(weights)) {
        check_shape(prop_cap);
        double total = 0.0;
        for (double w : weights_) {
            if (!(w >= 0.0)) throw Error("joint distribution has a negative weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw Error("joint distribution weights sum to " + std::to_string(total) +
                        ", expected 1");
    }

    static JointDistribution uniform(std::vector<std::string> props,
                                     int prop_cap = default_prop_cap) {
        const std::size_t n = std::size_t{1} << props.size();
        return JointDistribution(std::move(props),
                                 std::vector<double>(n, 1.0 / static_cast<double>(n)),
                                 prop_cap);
    }

    int prop_count() const noexcept { return static_cast<int>(props_.size()); }
    std::size_t event_count() const noexcept { return weights_.size(); }
    const std::vector<std::string>& props() const noexcept { return props_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    double weight(std::uint32_t event) const { return weights_.at(event); }

    double probability(const Formula& f) const {
        double total = 0.0;
        for (std::uint32_t e = 0; e < weights_.size(); ++e)
            if (f.eval(e)) total += weights_[e];
        return total;
    }

    double marginal(int prop) const {
        double total = 0.0;
        for (std::uint32_t e = 0; e < weights_.size(); ++e)
            if ((e >> prop) & 1u) total += weights_[e];
        return total;
    }

private:
    void check_shape(int prop_cap) const {
        if (static_cast<int>(props_.size()) > prop_cap)
            throw Error("joint distribution over " + std::to_string(props_.size()) +
                        " propositions exceeds the cap of " + std::to_string(prop_cap));
        if (weights_.size() != (std::size_t{1} << props_.size()))
            throw Error("joint distribution weight vector does not match 2^m events");
    }

    std::vector<std::string> props_;
    std::vector<double> weights_;
};

// Entropy in nats; 0 ln 0 is taken as 0.
inline double entropy(const JointDistribution& jd) {
    double h = 0.0;
    for (double w : jd.weights())
        if (w > 0.0) h -= w * std::log(w);
    return h;
}

// KL divergence sum p ln(p/q) in nats; requires the support of p to lie
// within the support of q.
inline double cross_entropy(const JointDistribution& p, const JointDistribution& q) {
    if (p.event_count() != q.event_count())
        throw Error("cross entropy requires matching event spaces");
    double d = 0.0;
    for (std::uint32_t e = 0; e < p.event_count(); ++e) {
        double pw = p.weight(e);
        if (pw == 0.0) continue;
        double qw = q.weight(e);
        if (qw == 0.0)
            throw Error("cross entropy undefined: mass on an event of zero reference "
                        "probability");
        d += pw * std::log(pw / qw);
    }
    return d;
}

// One linear constraint sum_i c_i w_i = target over event weights.
struct LinearConstraint {
    std::vector<std::pair<std::uint32_t, double>> coefficients;  // event -> c, sorted
    double target = 0.0;
    std::string origin;
};

namespace detail {

inline std::vector<std::uint32_t> satisfying_events(const Formula& f, int m) {
    std::vector<std::uint32_t> out;
    const std::uint32_t n = std::uint32_t{1} << m;
    for (std::uint32_t e = 0; e < n; ++e)
        if (f.eval(e)) out.push_back(e);
    return out;
}

}  // namespace detail

// Compile every rule of the set into a linear constraint, plus the
// normalization row.  P(F) = v becomes coefficient 1 on F-events with target
// v; P(F | G) = v becomes the homogeneous row (1-v) on F&G events and -v on
// G-without-F events with target 0.  Zero coefficients are omitted, which is
// what lets hard rules (v of 0 or 1) surface as pure support restrictions.
inline std::vector<LinearConstraint> compile_constraints(const RuleSet& rs) {
    const int m = static_cast<int>(rs.props.size());
    if (m > JointDistribution::default_prop_cap)
        throw Error("rule set spans " + std::to_string(m) +
                    " propositions, beyond the joint-distribution cap");
    std::vector<LinearConstraint> out;
    for (const auto& r : rs.rules) {
        LinearConstraint c;
        c.origin = render_rule(rs, r);
        if (r.unconditional()) {
            for (std::uint32_t e : detail::satisfying_events(r.consequent, m))
                c.coefficients.emplace_back(e, 1.0);
            c.target = r.strength;
        } else {
            const double v = r.strength;
            Formula both = Formula::conj(r.consequent, r.antecedent);
            std::vector<bool> in_both(std::size_t{1} << m, false);
            for (std::uint32_t e : detail::satisfying_events(both, m)) {
                in_both[e] = true;
                if (1.0 - v != 0.0) c.coefficients.emplace_back(e, 1.0 - v);
            }
            if (v != 0.0)
                for (std::uint32_t e : detail::satisfying_events(r.antecedent, m))
                    if (!in_both[e]) c.coefficients.emplace_back(e, -v);
            std::sort(c.coefficients.begin(), c.coefficients.end());
            c.target = 0.0;
        }
        out.push_back(std::move(c));
    }
    LinearConstraint norm;
    norm.origin = "normalization";
    const std::uint32_t n = std::uint32_t{1} << m;
    norm.coefficients.reserve(n);
    for (std::uint32_t e = 0; e < n; ++e) norm.coefficients.emplace_back(e, 1.0);
    norm.target = 1.0;
    out.push_back(std::move(norm));
    return out;
}

// Evidence as marginal constraints P(leaf) = v, in leaf index order.
inline std::vector<LinearConstraint> compile_evidence(const RuleSet& rs,
                                                      const Evidence& ev) {
    const int m = static_cast<int>(rs.props.size());
    std::vector<LinearConstraint> out;
    for (const auto& [prop, v] : ev.values) {
        LinearConstraint c;
        c.origin = rs.prop_name(prop) + " = " + format_number(v);
        for (std::uint32_t e : detail::satisfying_events(Formula::var(prop), m))
            c.coefficients.emplace_back(e, 1.0);
        c.target = v;
        out.push_back(std::move(c));
    }
    return out;
}

// CSV export: one column per proposition plus a weight column; weights are
// written with 17 significant digits so the file round-trips bit exactly.
inline void write_joint_csv(const JointDistribution& jd, std::ostream& os) {
    for (int j = 0; j < jd.prop_count(); ++j) os << jd.props()[j] << ",";
    os << "weight\n";
    char buf[40];
    for (std::uint32_t e = 0; e < jd.event_count(); ++e) {
        for (int j = 0; j < jd.prop_count(); ++j) os << ((e >> j) & 1u) << ",";
        std::snprintf(buf, sizeof buf, "%.17g", jd.weight(e));
        os << buf << "\n";
    }
}

}  // namespace uisbench
