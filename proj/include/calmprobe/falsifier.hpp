#pragma once

// Negative evidence: tests partial calmness at a candidate local minimizer by
// tracking the penalty parameter kappa that exact penalization would require,
// over shrinking-ball samples and along user-supplied parametric paths.
//
// The free perturbation u of the definition is instantiated as
// u = f(x,y) - phi(x): for a fixed feasible pair this is the smallest
// admissible u, hence it yields the sharpest required kappa and suffices for
// falsification.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "calmprobe/certificates.hpp"
#include "calmprobe/config.hpp"
#include "calmprobe/errors.hpp"
#include "calmprobe/model.hpp"
#include "calmprobe/sampling.hpp"
#include "calmprobe/value_function.hpp"

namespace calmprobe {

enum class Calmness { Falsified, NotFalsified, CenterRejected };

inline const char* to_string(Calmness v) {
    switch (v) {
        case Calmness::Falsified: return "Falsified";
        case Calmness::NotFalsified: return "NotFalsified";
        case Calmness::CenterRejected: return "CenterRejected";
    }
    return "?";
}

struct PenalizedSample {
    Point point;
    double u = 0.0;     // f(x,y) - phi(x)
    double f_gap = 0.0; // F(center) - F(x,y)
    double required_kappa = 0.0;
    bool kappa_infinite = false;
};

struct TraceRow {
    double t = 0.0;
    double f_upper = 0.0;       // F at the path point
    double u = 0.0;             // f - phi at the path point
    Vec penalized;              // F + kappa u for each kappa in the grid
    double required_kappa = 0.0;
    bool kappa_infinite = false;
    bool infeasible = false;    // path point skipped
};

struct KappaRadiusStats {
    double radius = 0.0;
    long accepted = 0;
    double sup_required_kappa = 0.0;
    bool sup_infinite = false;
    long skipped_phi = 0;
};

struct CalmnessVerdict {
    Point center;
    Calmness verdict = Calmness::NotFalsified;
    std::string rejection_reason;
    double kappa_hat = 0.0; // sup of finite required kappa over all samples
    Vec radius_schedule;
    std::vector<KappaRadiusStats> per_radius;
    Vec kappa_grid;
    std::optional<ParametricPath> witness_path;
    std::vector<TraceRow> witness_trace;
    long total_samples = 0;
};

struct VerifyCenterResult {
    bool ok = false;
    std::string reason;
};

namespace detail {

inline double required_kappa_for(double f_gap, double u, double tol_feas, bool* infinite) {
    *infinite = false;
    if (u > tol_feas) return std::max(0.0, f_gap / u);
    if (f_gap > tol_feas) { *infinite = true; return std::numeric_limits<double>::infinity(); }
    return 0.0;
}

} // namespace detail

/// Checks the candidate is feasible for the bilevel problem and samples its
/// feasible neighborhood for points with strictly smaller upper objective.
/// Evidence of local minimality, not a proof.
inline VerifyCenterResult verify_center(const BilevelModel& model, const Point& center,
                                        double radius = 0.25, long samples = 400,
                                        std::uint64_t seed = 1, const Tolerances& tol = {}) {
    if (static_cast<int>(center.x.size()) != model.n ||
        static_cast<int>(center.y.size()) != model.m)
        return {false, "center dimensions do not match the model"};
    if (!upper_feasible(model, center.x, tol.feas))
        return {false, "center violates the upper-level constraints"};
    PhiValue pv = phi(model, center.x, tol);
    if (!pv.finite())
        return {false, std::string("phi at the center is ") + to_string(pv.status)};
    if (dist_to_solutions(model, center.x, center.y, tol).sigma > tol.feas)
        return {false, "center y is not lower-level optimal"};

    const double f_center = eval_F(model, center);
    Rng rng(seed);
    for (long s = 0; s < samples; ++s) {
        // Half the draws stay on the center's parameter fiber; that fiber
        // carries the counterexamples where the solution set is fat.
        Vec x;
        if (s % 2 == 0) {
            x = center.x;
        } else {
            auto sampled = sample_upper_feasible_x(rng, model, center.x, radius, tol);
            if (!sampled) continue;
            x = *sampled;
        }
        if (!phi(model, x, tol).finite()) continue;
        const Vec y_raw = sample_ball(rng, center.y, radius);
        const Vec z = dist_to_solutions(model, x, y_raw, tol).z; // project onto S(x)
        if (max_norm_dist(z, center.y) > radius) continue;
        double f_here = eval_F(model, {x, z});
        const double margin = 1e-7 * (1.0 + std::fabs(f_center));
        if (f_here < f_center - margin) {
            // The projection works against an optimality cut relaxed by
            // tol.feas, so z may sit tol.feas / |c| off the true face and fake
            // a descent; confirm with a far tighter cut before rejecting.
            Tolerances strict = tol;
            strict.feas = 0.0;
            try {
                const Vec z2 = dist_to_solutions(model, x, y_raw, strict).z;
                if (max_norm_dist(z2, center.y) > radius) continue;
                f_here = eval_F(model, {x, z2});
            } catch (const NumericalBreakdown&) {
                continue; // face empty at the tight cut: descent unconfirmed
            }
            if (f_here < f_center - margin) {
                char buf[160];
                std::snprintf(buf, sizeof buf,
                              "sampled feasible neighbor with smaller F (%.12g < %.12g)",
                              f_here, f_center);
                return {false, buf};
            }
        }
    }
    return {true, ""};
}

/// Samples feasible pairs in shrinking balls and aggregates the penalty the
/// exact-penalization inequality would require; Falsified when the per-radius
/// supremum diverges under the shared trend rule.
inline CalmnessVerdict required_kappa_sweep(const BilevelModel& model, const Point& center,
                                            const Vec& radii, long samples_per_radius,
                                            std::uint64_t seed, const Tolerances& tol = {},
                                            const TrendRule& rule = {}) {
    if (dist_to_solutions(model, center.x, center.y, tol).sigma > tol.feas)
        throw CenterNotOptimal("required_kappa_sweep: center is not in gph S");
    CalmnessVerdict verdict;
    verdict.center = center;
    verdict.radius_schedule = radii;
    const double f_center = eval_F(model, center);

    long total_accepted = 0;
    for (double eps : radii) {
        // Common random numbers: every radius replays the same stream so the
        // per-radius suprema are comparable without sampling noise.
        Rng rng(seed);
        KappaRadiusStats stats;
        stats.radius = eps;
        for (long s = 0; s < samples_per_radius; ++s) {
            auto x_opt = sample_upper_feasible_x(rng, model, center.x, eps, tol);
            if (!x_opt) continue;
            const Vec& x = *x_opt;
            Vec y;
            bool found = false;
            for (int attempt = 0; attempt < 40 && !found; ++attempt) {
                y = sample_ball(rng, center.y, eps);
                found = lower_feasible(model, x, y, tol.feas);
            }
            if (!found) continue;
            if (s % 4 == 0) y = push_to_boundary(rng, model, x, y, center.y, eps, tol);
            const PhiValue pv = phi(model, x, tol);
            if (!pv.finite()) { ++stats.skipped_phi; continue; }
            const double u = eval_f(model, x, y) - pv.value;
            const double f_gap = f_center - eval_F(model, {x, y});
            bool inf_flag = false;
            const double req = detail::required_kappa_for(f_gap, u, tol.feas, &inf_flag);
            if (inf_flag) stats.sup_infinite = true;
            else {
                stats.sup_required_kappa = std::max(stats.sup_required_kappa, req);
                verdict.kappa_hat = std::max(verdict.kappa_hat, req);
            }
            ++stats.accepted;
        }
        total_accepted += stats.accepted;
        verdict.per_radius.push_back(stats);
        verdict.total_samples += samples_per_radius;
    }
    if (total_accepted == 0)
        throw AllSamplesSkipped("required_kappa_sweep: no feasible sample accepted");

    const KappaRadiusStats* largest = nullptr;
    const KappaRadiusStats* smallest = nullptr;
    for (const auto& s : verdict.per_radius) {
        if (s.accepted == 0) continue;
        if (!largest || s.radius > largest->radius) largest = &s;
        if (!smallest || s.radius < smallest->radius) smallest = &s;
    }
    bool falsified = false;
    if (smallest) {
        if (smallest->sup_infinite) falsified = true;
        else if (largest && largest != smallest &&
                 smallest->sup_required_kappa >
                     rule.growth_factor * largest->sup_required_kappa &&
                 smallest->sup_required_kappa > rule.absolute_floor)
            falsified = true;
    }
    verdict.verdict = falsified ? Calmness::Falsified : Calmness::NotFalsified;
    if (falsified) {
        // Synthesize a trace from the per-radius suprema as the witness.
        for (auto it = verdict.per_radius.rbegin(); it != verdict.per_radius.rend(); ++it)
            verdict.witness_trace.push_back({it->radius, 0.0, 0.0, {},
                                             it->sup_required_kappa, it->sup_infinite, false});
        std::reverse(verdict.witness_trace.begin(), verdict.witness_trace.end());
    }
    return verdict;
}

/// Evaluates the penalized objective and the required kappa along a
/// parametric path approaching the center; Falsified when the required kappa
/// diverges as t -> 0.
inline CalmnessVerdict path_falsify(const BilevelModel& model, const Point& center,
                                    const ParametricPath& path, const Vec& kappa_grid,
                                    const Tolerances& tol = {}, const TrendRule& rule = {}) {
    if (dist_to_solutions(model, center.x, center.y, tol).sigma > tol.feas)
        throw CenterNotOptimal("path_falsify: center is not in gph S");
    CalmnessVerdict verdict;
    verdict.center = center;
    verdict.kappa_grid = kappa_grid;
    verdict.witness_path = path;
    const double f_center = eval_F(model, center);

    // Verdict rows: a row is informative when either the suboptimality u or
    // the upper-objective gap is resolvable at tolerance. Rows where both
    // vanish are indistinguishable from the center and carry no evidence.
    long any_feasible = 0, first_idx = -1, last_idx = -1;
    for (double t : path.t_schedule) {
        TraceRow row;
        row.t = t;
        const Point p = eval_path(path, t);
        const bool feas = upper_feasible(model, p.x, tol.feas) &&
                          lower_feasible(model, p.x, p.y, tol.feas);
        PhiValue pv{};
        if (feas) pv = phi(model, p.x, tol);
        if (!feas || !pv.finite()) {
            row.infeasible = true;
            verdict.witness_trace.push_back(row);
            continue;
        }
        row.f_upper = eval_F(model, p);
        row.u = eval_f(model, p.x, p.y) - pv.value;
        for (double kappa : kappa_grid) row.penalized.push_back(row.f_upper + kappa * row.u);
        const double f_gap = f_center - row.f_upper;
        bool inf_flag = false;
        row.required_kappa = detail::required_kappa_for(f_gap, row.u, tol.feas, &inf_flag);
        row.kappa_infinite = inf_flag;
        if (!inf_flag) verdict.kappa_hat = std::max(verdict.kappa_hat, row.required_kappa);
        verdict.witness_trace.push_back(row);
        ++verdict.total_samples;
        ++any_feasible;
        if (row.u > tol.feas || f_gap > tol.feas) {
            if (first_idx < 0) first_idx = static_cast<long>(verdict.witness_trace.size()) - 1;
            last_idx = static_cast<long>(verdict.witness_trace.size()) - 1;
        }
    }
    if (any_feasible == 0)
        throw PathInfeasibleEverywhere("path_falsify: no scheduled t yields a feasible point");

    bool falsified = false;
    if (first_idx >= 0) {
        const TraceRow& first_row = verdict.witness_trace[static_cast<std::size_t>(first_idx)];
        const TraceRow& last_row = verdict.witness_trace[static_cast<std::size_t>(last_idx)];
        if (last_row.kappa_infinite) falsified = true;
        else if (last_idx != first_idx &&
                 last_row.required_kappa > rule.growth_factor * first_row.required_kappa &&
                 last_row.required_kappa > rule.absolute_floor)
            falsified = true;
    }
    verdict.verdict = falsified ? Calmness::Falsified : Calmness::NotFalsified;
    return verdict;
}

} // namespace calmprobe
