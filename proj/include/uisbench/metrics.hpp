#pragma once

// Scoring engine verdicts against reference probabilities.
//
// Raw errors are mean absolute and mean squared deviation.  Because a wide
// interval and a narrow one are not comparable raw, every error is also
// normalized against the expected error of a blind guess drawn uniformly
// from the engine's own answer domain: a point in [0,1], a certainty factor
// in [-1,1] pushed through the prior-anchored conversion, or an interval
// from the ordered-pair triangle.  The normalized score is +1 for a perfect
// answer, 0 for guessing-level, -1 for the worst possible point estimate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "engines.hpp"

namespace uisbench {

struct ErrorPair {
    double abs = 0.0;
    double sq = 0.0;
};

inline ErrorPair point_errors(double estimate, double reference) {
    detail::check_unit(estimate, "estimate");
    detail::check_unit(reference, "reference");
    double e = estimate - reference;
    return {std::abs(e), e * e};
}

// Errors of an interval verdict, read as a point drawn uniformly from it.
// The squared error then splits into off-centeredness plus width variance;
// the absolute error integrates the same density piecewise.
inline ErrorPair interval_errors(double a, double b, double reference) {
    detail::check_unit(a, "interval bound");
    detail::check_unit(b, "interval bound");
    detail::check_unit(reference, "reference");
    if (a > b) throw Error("interval bounds out of order");
    if (a == b) return point_errors(a, reference);
    double mid = 0.5 * (a + b);
    double width = b - a;
    ErrorPair out;
    out.sq = (mid - reference) * (mid - reference) + width * width / 12.0;
    if (reference <= a) out.abs = mid - reference;
    else if (reference >= b) out.abs = reference - mid;
    else
        out.abs = ((reference - a) * (reference - a) + (b - reference) * (b - reference)) /
                  (2.0 * width);
    return out;
}

// Expected errors of a uniform blind guess in the engine's answer domain, as
// closed forms in the reference probability (and, for the cf engine, the
// prior the conversion is anchored at).
inline ErrorPair random_guess_baseline(EngineKind kind, double p,
                                       std::optional<double> prior = std::nullopt) {
    detail::check_unit(p, "reference");
    const double q = 1.0 - p;
    switch (kind) {
        case EngineKind::MaxC:
        case EngineKind::Fst:
        case EngineKind::MinC:
        case EngineKind::Ind:
            return {0.5 - p * q, 1.0 / 3.0 - p * q};
        case EngineKind::Mycin: {
            if (!prior) throw Error("the certainty-factor baseline needs a prior");
            double p0 = *prior;
            if (!(p0 > 0.0 && p0 < 1.0))
                throw Error("the certainty-factor baseline needs a prior inside (0, 1)");
            double big_q = p < p0 ? p0 : 1.0 - p0;
            ErrorPair out;
            out.abs = (2.0 * (p * p + p0 * p0) + big_q - 4.0 * p * p0) / (4.0 * big_q);
            out.sq = (2.0 * p0 * p0 - 6.0 * p * p0 + 6.0 * p * p + 1.0 + p0 - 3.0 * p) / 6.0;
            return out;
        }
        case EngineKind::Dst: {
            auto xlnx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
            ErrorPair out;
            out.abs = 31.0 / 18.0 * (p * p * p + q * q * q) + 3.5 * p * q -
                      2.0 / 3.0 * (p * p * xlnx(p) + q * q * xlnx(q)) - 11.0 / 9.0;
            out.sq = 11.0 / 36.0 - p * q;
            return out;
        }
    }
    throw Error("unreachable engine kind");
}

// Piecewise-linear score: 1 at zero error, 0 at guessing level, -1 at the
// worst point estimate, clamped below -1 for interval errors beyond it.
inline double normalize_score(double err, double mu, double worst) {
    if (err < 0.0) throw Error("error must be nonnegative");
    if (!(worst > 0.0) || mu < 0.0 || mu > worst)
        throw Error("invalid baseline: mu " + format_number(mu) + ", worst " +
                    format_number(worst));
    double s;
    if (err <= mu) s = mu > 0.0 ? 1.0 - err / mu : 1.0;
    else s = worst > mu ? -(err - mu) / (worst - mu) : -1.0;
    return std::clamp(s, -1.0, 1.0);
}

struct NormalizedScore {
    double eta = 0.0;
    double zeta = 0.0;
};

enum class SampleClass { Intermediate, Conclusion };

inline const char* sample_class_name(SampleClass c) {
    return c == SampleClass::Intermediate ? "I" : "C";
}

struct ErrorSample {
    std::string node;
    EngineKind engine = EngineKind::Ind;
    SampleClass node_class = SampleClass::Conclusion;
    double reference = 0.0;
    std::optional<double> prior;  // cf-engine baseline anchor
    double abs_err = 0.0;
    double sq_err = 0.0;
};

inline NormalizedScore scores_for(const ErrorSample& s) {
    ErrorPair mu = random_guess_baseline(s.engine, s.reference, s.prior);
    double q = 1.0 - s.reference;
    double worst_abs = std::max(s.reference, q);
    double worst_sq = std::max(s.reference * s.reference, q * q);
    NormalizedScore out;
    out.eta = normalize_score(s.abs_err, mu.abs, worst_abs);
    out.zeta = normalize_score(s.sq_err, mu.sq, worst_sq);
    return out;
}

inline ErrorSample make_sample(std::string node, EngineKind engine, SampleClass node_class,
                               const NodeVerdict& verdict, double reference,
                               std::optional<double> prior = std::nullopt) {
    ErrorSample s;
    s.node = std::move(node);
    s.engine = engine;
    s.node_class = node_class;
    s.reference = reference;
    s.prior = prior;
    ErrorPair e;
    if (verdict.interval) e = interval_errors(verdict.interval->lower, verdict.interval->upper, reference);
    else if (verdict.point) e = point_errors(*verdict.point, reference);
    else throw Error("verdict carries neither a point nor an interval");
    s.abs_err = e.abs;
    s.sq_err = e.sq;
    return s;
}

// Mean raw errors and mean normalized scores per engine and node class.
// Classes are intermediates (I), conclusions (C), and their union.
struct ComparisonReport {
    struct Cell {
        std::size_t count = 0;
        double mean_abs = 0.0;
        double mean_eta = 0.0;
        double mean_sq = 0.0;
        double mean_zeta = 0.0;
    };
    static constexpr int n_classes = 3;  // I, C, union
    static const char* class_label(int k) {
        static const char* names[n_classes] = {"I", "C", "I+C"};
        return names[k];
    }
    std::vector<EngineKind> engines;                 // column order
    std::map<EngineKind, std::array<Cell, 3>> cells;
};

inline ComparisonReport aggregate(const std::vector<ErrorSample>& samples) {
    if (samples.empty()) throw Error("no samples to aggregate");
    ComparisonReport report;
    std::map<EngineKind, std::array<ComparisonReport::Cell, 3>> acc;
    for (const auto& s : samples) {
        NormalizedScore ns = scores_for(s);
        auto it = acc.find(s.engine);
        if (it == acc.end()) {
            report.engines.push_back(s.engine);
            it = acc.emplace(s.engine, std::array<ComparisonReport::Cell, 3>{}).first;
        }
        int cls = s.node_class == SampleClass::Intermediate ? 0 : 1;
        for (int k : {cls, 2}) {
            auto& cell = it->second[static_cast<std::size_t>(k)];
            ++cell.count;
            cell.mean_abs += s.abs_err;
            cell.mean_eta += ns.eta;
            cell.mean_sq += s.sq_err;
            cell.mean_zeta += ns.zeta;
        }
    }
    for (auto& [kind, cells] : acc)
        for (auto& cell : cells)
            if (cell.count > 0) {
                double n = static_cast<double>(cell.count);
                cell.mean_abs /= n;
                cell.mean_eta /= n;
                cell.mean_sq /= n;
                cell.mean_zeta /= n;
            }
    report.cells = std::move(acc);
    return report;
}

inline void write_report_table(std::ostream& os, const ComparisonReport& report) {
    const char* metric_names[4] = {"mean|e|", "eta", "mean e^2", "zeta"};
    os << std::left << std::setw(10) << "metric" << std::setw(6) << "class";
    for (EngineKind k : report.engines) os << std::right << std::setw(10) << engine_name(k);
    os << '\n';
    for (int cls = 0; cls < ComparisonReport::n_classes; ++cls) {
        bool any = false;
        for (EngineKind k : report.engines)
            if (report.cells.at(k)[static_cast<std::size_t>(cls)].count > 0) any = true;
        if (!any) continue;
        for (int m = 0; m < 4; ++m) {
            os << std::left << std::setw(10) << metric_names[m] << std::setw(6)
               << ComparisonReport::class_label(cls);
            for (EngineKind k : report.engines) {
                const auto& cell = report.cells.at(k)[static_cast<std::size_t>(cls)];
                if (cell.count == 0) {
                    os << std::right << std::setw(10) << "-";
                    continue;
                }
                double v = m == 0   ? cell.mean_abs
                           : m == 1 ? cell.mean_eta
                           : m == 2 ? cell.mean_sq
                                    : cell.mean_zeta;
                std::ostringstream num;
                num << std::fixed << std::setprecision(4) << v;
                os << std::right << std::setw(10) << num.str();
            }
            os << '\n';
        }
    }
}

inline void write_report_csv(std::ostream& os, const ComparisonReport& report) {
    os << "engine,class,metric,value\n";
    const char* metric_names[4] = {"abs", "eta", "sq", "zeta"};
    for (EngineKind k : report.engines)
        for (int cls = 0; cls < ComparisonReport::n_classes; ++cls) {
            const auto& cell = report.cells.at(k)[static_cast<std::size_t>(cls)];
            if (cell.count == 0) continue;
            double values[4] = {cell.mean_abs, cell.mean_eta, cell.mean_sq, cell.mean_zeta};
            for (int m = 0; m < 4; ++m)
                os << engine_name(k) << ',' << ComparisonReport::class_label(cls) << ','
                   << metric_names[m] << ',' << format_number(values[m]) << '\n';
        }
}

// Monte-Carlo estimate of the blind-guess errors, for checking the closed
// forms.  Uniform deviates are built from the top 53 bits of a mt19937_64
// draw so results are identical across platforms.
inline ErrorPair mc_baseline(EngineKind kind, double p, std::optional<double> prior,
                             std::size_t samples, std::uint64_t seed) {
    if (samples == 0) throw Error("need at least one sample");
    std::mt19937_64 rng(seed);
    auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    double sum_abs = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        ErrorPair e;
        switch (kind) {
            case EngineKind::Mycin: {
                if (!prior) throw Error("the certainty-factor baseline needs a prior");
                double cf = 2.0 * uniform() - 1.0;
                e = point_errors(prob_from_cf(CertaintyFactor(cf), *prior), p);
                break;
            }
            case EngineKind::Dst: {
                double u = uniform(), v = uniform();
                e = interval_errors(std::min(u, v), std::max(u, v), p);
                break;
            }
            default:
                e = point_errors(uniform(), p);
        }
        sum_abs += e.abs;
        sum_sq += e.sq;
    }
    double n = static_cast<double>(samples);
    return {sum_abs / n, sum_sq / n};
}

}  // namespace uisbench
