#pragma once

// Positive evidence for partial calmness: the weak-sharp-minimum modulus M
// from the vertices of the dual polyhedron Q, sampled LUWSMC and R-regularity
// ratio probes, the constant-row-rank check, and an inner-semicontinuity
// probe for the lower-level solution map.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "calmprobe/config.hpp"
#include "calmprobe/errors.hpp"
#include "calmprobe/lp.hpp"
#include "calmprobe/model.hpp"
#include "calmprobe/sampling.hpp"
#include "calmprobe/value_function.hpp"

namespace calmprobe {

// Shared verdict policy for finite-sample trends: the definitions being probed
// are existence statements, so any verdict from samples follows a declared
// conservative rule and the reports always carry the raw data.
struct TrendRule {
    double growth_factor = 10.0;  // smallest-radius worst ratio vs largest-radius
    double absolute_floor = 1e3;  // and it must exceed this
    double bounded_band = 2.0;    // Bounded when max/min varies less than this
};

enum class Trend { Bounded, Diverging, Inconclusive };

inline const char* to_string(Trend t) {
    switch (t) {
        case Trend::Bounded: return "Bounded";
        case Trend::Diverging: return "Diverging";
        case Trend::Inconclusive: return "Inconclusive";
    }
    return "?";
}

/// Q = {(xi1, xi2, xi3, xi4) <= 0 | xi1 - xi2 + c xi3 + B^T xi4 = 0,
///      -e.xi1 - e.xi2 = 1} over (xi1, xi2) in R^m x R^m, xi3 in R, xi4 in R^q.
inline Polyhedron dual_q_polyhedron(const Vec& c, const Mat& b) {
    const int m = static_cast<int>(c.size());
    const int q = b.rows;
    if (b.cols != m) throw DimensionMismatch("dual_q_polyhedron: B column count");
    const int nd = 2 * m + 1 + q;
    Polyhedron poly;
    poly.signs.assign(nd, Sign::Nonpositive);
    poly.ineq_matrix = Mat(0, nd);
    poly.eq_matrix = Mat(m + 1, nd);
    poly.eq_rhs.assign(m + 1, 0.0);
    for (int i = 0; i < m; ++i) {
        poly.eq_matrix(i, i) = 1.0;
        poly.eq_matrix(i, m + i) = -1.0;
        poly.eq_matrix(i, 2 * m) = c[i];
        for (int j = 0; j < q; ++j) poly.eq_matrix(i, 2 * m + 1 + j) = b(j, i);
    }
    for (int i = 0; i < m; ++i) {
        poly.eq_matrix(m, i) = -1.0;
        poly.eq_matrix(m, m + i) = -1.0;
    }
    poly.eq_rhs[m] = 1.0;
    return poly;
}

struct WsmCertificate {
    double modulus_M = 0.0;
    VertexSet witness_vertices;                    // vertices of Q (fixed-coefficient case)
    std::vector<std::pair<Vec, double>> per_x_moduli; // (x, M(x)) for the sweep
    bool modulus_growth_flagged = false;           // M(x) grew substantially across samples
};

/// Weak-sharp modulus for a fixed-coefficient lower level: M = max |xi3| over
/// the vertices of Q. A genuine certificate: dist(y, S(x)) <= M (c.y - phi(x))
/// for every lower-level feasible pair.
inline WsmCertificate uwsm_modulus(const Vec& c, const Mat& b, const Tolerances& tol = {},
                                   std::uint64_t case_cap = 5'000'000) {
    WsmCertificate cert;
    cert.witness_vertices = enumerate_vertices(dual_q_polyhedron(c, b), tol, case_cap);
    const int m = static_cast<int>(c.size());
    for (const Vec& v : cert.witness_vertices.vertices)
        cert.modulus_M = std::max(cert.modulus_M, std::fabs(v[2 * m]));
    return cert;
}

/// Form-checked wrapper: Theorem-grade moduli exist only when c and B do not
/// depend on the parameter.
inline WsmCertificate uwsm_modulus(const BilevelModel& model, const Tolerances& tol = {},
                                   std::uint64_t case_cap = 5'000'000) {
    if (model.form_tag != FormTag::RhsPerturbed && model.form_tag != FormTag::FullyLinear)
        throw FormNotSupported(
            "uwsm_modulus requires x-independent c and B; use uwsm_modulus_sweep");
    const Instantiated inst = instantiate(model, Vec(model.n, 0.0));
    return uwsm_modulus(inst.c, inst.B, tol, case_cap);
}

/// Per-parameter moduli M(x) from the vertices of Q(x). Growth of M(x) across
/// the samples is the failure mode that breaks the fixed-coefficient argument.
inline WsmCertificate uwsm_modulus_sweep(const BilevelModel& model,
                                         const std::vector<Vec>& x_samples,
                                         const Tolerances& tol = {},
                                         std::uint64_t case_cap = 5'000'000) {
    WsmCertificate cert;
    double min_m = std::numeric_limits<double>::infinity();
    for (const Vec& x : x_samples) {
        const Instantiated inst = instantiate(model, x);
        const WsmCertificate local = uwsm_modulus(inst.c, inst.B, tol, case_cap);
        cert.per_x_moduli.emplace_back(x, local.modulus_M);
        cert.modulus_M = std::max(cert.modulus_M, local.modulus_M);
        min_m = std::min(min_m, local.modulus_M);
        if (cert.witness_vertices.vertices.empty())
            cert.witness_vertices = local.witness_vertices;
    }
    cert.modulus_growth_flagged =
        !x_samples.empty() && min_m > 0.0 && cert.modulus_M / min_m >= 10.0;
    return cert;
}

struct RadiusStats {
    double radius = 0.0;
    long sample_count = 0;    // samples contributing a ratio
    double worst_ratio = 0.0;
    double alpha_estimate = 0.0; // 1 / worst_ratio (0 when worst_ratio is 0 or inf)
    long skipped_phi = 0;     // phi not finite
    long skipped_zero = 0;    // 0/0 samples (both numerator and denominator at tolerance)
    long hard_violations = 0; // denominator at tolerance but distance positive
};

struct RatioProbeReport {
    Point center;
    Vec radius_schedule;
    std::vector<RadiusStats> per_radius;
    Trend trend = Trend::Inconclusive;
};

namespace detail {

inline Trend classify_trend(const std::vector<RadiusStats>& stats, const TrendRule& rule) {
    const RadiusStats* largest = nullptr;
    const RadiusStats* smallest = nullptr;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    bool any = false;
    for (const auto& s : stats) {
        if (s.sample_count == 0) continue;
        any = true;
        if (!largest || s.radius > largest->radius) largest = &s;
        if (!smallest || s.radius < smallest->radius) smallest = &s;
        lo = std::min(lo, s.worst_ratio);
        hi = std::max(hi, s.worst_ratio);
    }
    if (!any || !largest || !smallest || largest == smallest) return Trend::Inconclusive;
    if (smallest->worst_ratio > rule.growth_factor * largest->worst_ratio &&
        smallest->worst_ratio > rule.absolute_floor)
        return Trend::Diverging;
    if (hi == 0.0) return Trend::Bounded;
    if (lo > 0.0 && hi / lo < rule.bounded_band) return Trend::Bounded;
    return Trend::Inconclusive;
}

} // namespace detail

/// Samples the LUWSMC ratio dist(y, S(x)) / (f(x,y) - phi(x)) over lower-level
/// feasible pairs in shrinking max-norm balls around a point of gph S.
inline RatioProbeReport luwsmc_probe(const BilevelModel& model, const Point& center,
                                     const Vec& radii, long samples_per_radius,
                                     std::uint64_t seed, const Tolerances& tol = {},
                                     const TrendRule& rule = {}) {
    if (dist_to_solutions(model, center.x, center.y, tol).sigma > tol.feas)
        throw CenterNotOptimal("luwsmc_probe: center is not in gph S");
    RatioProbeReport report;
    report.center = center;
    report.radius_schedule = radii;
    long total_ratio_samples = 0;
    for (double eps : radii) {
        // Common random numbers across radii: each radius replays the same
        // stream, so the trend comparison is not dominated by sampling noise.
        Rng rng(seed);
        RadiusStats stats;
        stats.radius = eps;
        for (long s = 0; s < samples_per_radius; ++s) {
            // Rejection sampling for gph Gamma, with a quarter of the accepted
            // samples pushed to the feasible boundary where ratios peak.
            Vec x, y;
            bool found = false;
            for (int attempt = 0; attempt < 40 && !found; ++attempt) {
                x = sample_ball(rng, center.x, eps);
                y = sample_ball(rng, center.y, eps);
                found = lower_feasible(model, x, y, tol.feas);
            }
            if (!found) continue;
            if (s % 4 == 0) y = push_to_boundary(rng, model, x, y, center.y, eps, tol);

            const PhiValue pv = phi(model, x, tol);
            if (!pv.finite()) { ++stats.skipped_phi; continue; }
            const double u = eval_f(model, x, y) - pv.value;
            const double d = dist_to_solutions(model, x, y, tol).sigma;
            if (u <= tol.feas && d <= tol.feas) { ++stats.skipped_zero; continue; }
            if (u <= tol.feas) { ++stats.hard_violations; continue; }
            stats.worst_ratio = std::max(stats.worst_ratio, d / u);
            ++stats.sample_count;
        }
        if (stats.worst_ratio > 0.0) stats.alpha_estimate = 1.0 / stats.worst_ratio;
        total_ratio_samples += stats.sample_count;
        report.per_radius.push_back(stats);
    }
    if (total_ratio_samples == 0)
        throw AllSamplesSkipped("luwsmc_probe: no sample produced a ratio");
    report.trend = detail::classify_trend(report.per_radius, rule);
    return report;
}

enum class Omega { FullSpace, DomPhi };

/// R-regularity ratio probe for Phi with h = (f - phi, g_1, ..., g_q); samples
/// need not be lower-level feasible. Omega::DomPhi restricts parameters to
/// finite phi, which is the RRCQ reading.
inline RatioProbeReport r_regularity_probe(const BilevelModel& model, const Point& center,
                                           const Vec& radii, long samples_per_radius,
                                           Omega omega, std::uint64_t seed,
                                           const Tolerances& tol = {},
                                           const TrendRule& rule = {}) {
    if (dist_to_solutions(model, center.x, center.y, tol).sigma > tol.feas)
        throw CenterNotOptimal("r_regularity_probe: center is not in gph S");
    RatioProbeReport report;
    report.center = center;
    report.radius_schedule = radii;
    long total_ratio_samples = 0;
    for (double eps : radii) {
        Rng rng(seed); // common random numbers across radii, as in luwsmc_probe
        RadiusStats stats;
        stats.radius = eps;
        for (long s = 0; s < samples_per_radius; ++s) {
            const Vec x = sample_ball(rng, center.x, eps);
            const Vec y = sample_ball(rng, center.y, eps);
            const PhiValue pv = phi(model, x, tol);
            if (!pv.finite()) {
                // Outside dom Phi the distance has no finite value. Under
                // Omega::DomPhi such parameters are excluded by definition;
                // under Omega::FullSpace they witness an infinite ratio.
                if (omega == Omega::FullSpace &&
                    pv.status == PhiValue::Status::PlusInfinity)
                    ++stats.hard_violations;
                else
                    ++stats.skipped_phi;
                continue;
            }
            double viol = eval_f(model, x, y) - pv.value;
            for (double g : eval_g(model, x, y)) viol = std::max(viol, g);
            viol = std::max(viol, 0.0);
            const double d = dist_to_solutions(model, x, y, tol).sigma;
            if (viol <= tol.feas && d <= tol.feas) { ++stats.skipped_zero; continue; }
            if (viol <= tol.feas) { ++stats.hard_violations; continue; }
            stats.worst_ratio = std::max(stats.worst_ratio, d / viol);
            ++stats.sample_count;
        }
        if (stats.worst_ratio > 0.0) stats.alpha_estimate = 1.0 / stats.worst_ratio;
        total_ratio_samples += stats.sample_count;
        report.per_radius.push_back(stats);
    }
    if (total_ratio_samples == 0)
        throw AllSamplesSkipped("r_regularity_probe: no sample produced a ratio");
    report.trend = detail::classify_trend(report.per_radius, rule);
    return report;
}

enum class RankVerdict { ConstantRankHolds, Violated, SubsetCapExceeded };

inline const char* to_string(RankVerdict v) {
    switch (v) {
        case RankVerdict::ConstantRankHolds: return "ConstantRankHolds";
        case RankVerdict::Violated: return "Violated";
        case RankVerdict::SubsetCapExceeded: return "SubsetCapExceeded";
    }
    return "?";
}

struct RankSubsetResult {
    std::vector<int> subset;     // 1-based row indices of J into [c; B_active]
    std::vector<int> ranks_seen; // distinct ranks across the sampled parameters
    bool constant = true;
};

struct RankProfile {
    Point center;
    std::vector<int> active_set; // active lower-level constraint indices (0-based)
    std::vector<RankSubsetResult> subset_results;
    RankVerdict verdict = RankVerdict::ConstantRankHolds;
    std::vector<int> violated_subset;    // 1-based J for the first violation
    Vec witness_x_a, witness_x_b;        // parameters with differing ranks
};

/// Constant-row-rank check for B(x) = [c(x)^T; B(x)_I] over every nonempty
/// row subset J, at the center and at sampled parameters in the radius ball.
inline RankProfile constant_rank_check(const BilevelModel& model, const Point& center,
                                       double radius, int x_samples, std::uint64_t seed,
                                       const Tolerances& tol = {}, int subset_cap = 12,
                                       RankPolicy policy = RankPolicy::Echelon) {
    RankProfile profile;
    profile.center = center;
    const Vec g = eval_g(model, center.x, center.y);
    for (int j = 0; j < model.q; ++j)
        if (std::fabs(g[j]) <= tol.feas) profile.active_set.push_back(j);
    const int k = static_cast<int>(profile.active_set.size()) + 1;
    if (k > subset_cap)
        throw SubsetCapExceeded("constant_rank_check: " + std::to_string(k) +
                                " rows exceed the subset cap of " + std::to_string(subset_cap));

    Rng rng(seed);
    std::vector<Vec> params;
    params.push_back(center.x);
    for (int s = 0; s < x_samples; ++s) params.push_back(sample_ball(rng, center.x, radius));

    auto matrix_rows_at = [&](const Vec& x) {
        std::vector<Vec> rows;
        const Instantiated inst = instantiate(model, x);
        rows.push_back(inst.c);
        for (int j : profile.active_set) rows.push_back(inst.B.row(j));
        return rows;
    };
    std::vector<std::vector<Vec>> all_rows;
    for (const Vec& x : params) all_rows.push_back(matrix_rows_at(x));

    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
        RankSubsetResult res;
        for (int r = 0; r < k; ++r)
            if (mask & (1u << r)) res.subset.push_back(r + 1);
        int first_rank = -1;
        std::size_t witness_first = 0;
        for (std::size_t p = 0; p < params.size(); ++p) {
            Mat sub(static_cast<int>(res.subset.size()), model.m);
            for (std::size_t r = 0; r < res.subset.size(); ++r)
                for (int col = 0; col < model.m; ++col)
                    sub(static_cast<int>(r), col) = all_rows[p][res.subset[r] - 1][col];
            const int rank = numerical_rank(sub, tol.rank, policy);
            if (std::find(res.ranks_seen.begin(), res.ranks_seen.end(), rank) ==
                res.ranks_seen.end())
                res.ranks_seen.push_back(rank);
            if (first_rank < 0) { first_rank = rank; witness_first = p; }
            else if (rank != first_rank && res.constant) {
                res.constant = false;
                if (profile.verdict == RankVerdict::ConstantRankHolds) {
                    profile.verdict = RankVerdict::Violated;
                    profile.violated_subset = res.subset;
                    profile.witness_x_a = params[witness_first];
                    profile.witness_x_b = params[p];
                }
            }
        }
        profile.subset_results.push_back(std::move(res));
    }
    return profile;
}

enum class IscVerdict { Consistent, Violated };

inline const char* to_string(IscVerdict v) {
    return v == IscVerdict::Consistent ? "Consistent" : "Violated";
}

struct IscStep {
    double t = 0.0;
    double sup_dist = 0.0; // over directions, dist(y_bar, S(x_bar + t d))
    long skipped_phi = 0;
};

struct IscReport {
    Point center;
    std::vector<Vec> directions;
    std::vector<IscStep> per_t;
    IscVerdict verdict = IscVerdict::Consistent;
    Vec witness_direction; // direction achieving the offending distance
};

/// Probes inner semicontinuity of S at the center: dist(y_bar, S(x_bar + t d))
/// must decay along every sampled ray as t -> 0.
inline IscReport inner_semicontinuity_probe(const BilevelModel& model, const Point& center,
                                            const Vec& t_schedule, int direction_count,
                                            std::uint64_t seed, const Tolerances& tol = {}) {
    if (dist_to_solutions(model, center.x, center.y, tol).sigma > tol.feas)
        throw CenterNotOptimal("inner_semicontinuity_probe: center is not in gph S");
    Rng rng(seed);
    IscReport report;
    report.center = center;
    for (int j = 0; j < model.n && static_cast<int>(report.directions.size()) < direction_count;
         ++j) {
        Vec d(model.n, 0.0);
        d[j] = 1.0;
        report.directions.push_back(d);
        if (static_cast<int>(report.directions.size()) < direction_count) {
            d[j] = -1.0;
            report.directions.push_back(d);
        }
    }
    while (static_cast<int>(report.directions.size()) < direction_count) {
        Vec d(model.n);
        double norm = 0.0;
        for (int j = 0; j < model.n; ++j) {
            d[j] = rng.uniform(-1.0, 1.0);
            norm = std::max(norm, std::fabs(d[j]));
        }
        if (norm < 1e-9) continue;
        for (double& v : d) v /= norm;
        report.directions.push_back(d);
    }

    std::vector<Vec> sup_witness(t_schedule.size());
    for (double t : t_schedule) report.per_t.push_back({t, 0.0, 0});
    for (const Vec& d : report.directions) {
        for (std::size_t k = 0; k < t_schedule.size(); ++k) {
            Vec x = center.x;
            for (int j = 0; j < model.n; ++j) x[j] += t_schedule[k] * d[j];
            const PhiValue pv = phi(model, x, tol);
            if (!pv.finite()) { ++report.per_t[k].skipped_phi; continue; }
            const double dist = dist_to_solutions(model, x, center.y, tol).sigma;
            if (dist > report.per_t[k].sup_dist) {
                report.per_t[k].sup_dist = dist;
                sup_witness[k] = d;
            }
        }
    }
    // Decay rule: consistent when the smallest-t supremum has collapsed either
    // to noise level or to a tenth of the largest-t supremum.
    const IscStep& first = report.per_t.front();
    const IscStep& last = report.per_t.back();
    const double threshold = std::max(10.0 * tol.feas, first.sup_dist / 10.0);
    if (last.sup_dist > threshold) {
        report.verdict = IscVerdict::Violated;
        report.witness_direction = sup_witness.back();
    }
    return report;
}

} // namespace calmprobe
