#pragma once

// Deterministic sampling helpers shared by the probes and the falsifier:
// uniform draws on max-norm balls, Gauss-Newton repair onto polynomial
// equality constraints of X, and boundary-biased feasible sampling.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>

#include "calmprobe/config.hpp"
#include "calmprobe/model.hpp"

namespace calmprobe {

/// Wrapper with an implementation-independent uniform double, so that seeded
/// runs are reproducible byte for byte.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1).
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return gen_() % n; }

private:
    std::mt19937_64 gen_;
};

inline Vec sample_ball(Rng& rng, const Vec& center, double radius) {
    Vec p(center.size());
    for (std::size_t i = 0; i < center.size(); ++i)
        p[i] = center[i] + rng.uniform(-radius, radius);
    return p;
}

namespace detail {

/// Gauss-Newton projection of x onto the equality constraints of X. Returns
/// nullopt when the iteration does not reach tol within the iteration budget.
inline std::optional<Vec> repair_to_upper_equalities(const BilevelModel& model, Vec x,
                                                     double tol) {
    std::vector<const Poly*> eqs;
    for (const auto& c : model.upper_constraints)
        if (c.rel == Relation::Equal) eqs.push_back(&c.expr);
    if (eqs.empty()) return x;
    const int ne = static_cast<int>(eqs.size());
    const int n = model.n;
    for (int iter = 0; iter < 60; ++iter) {
        Vec h(ne);
        double worst = 0.0;
        for (int i = 0; i < ne; ++i) {
            h[i] = eqs[i]->eval_x(x);
            worst = std::max(worst, std::fabs(h[i]));
        }
        if (worst <= tol) return x;
        Mat jac(ne, n);
        for (int i = 0; i < ne; ++i)
            for (int j = 0; j < n; ++j)
                jac(i, j) = eqs[i]->derivative({Var::Kind::X, j}).eval_x(x);
        // Minimum-norm step: x <- x - J^T (J J^T)^{-1} h, solved by elimination.
        Mat jjt(ne, ne);
        for (int i = 0; i < ne; ++i)
            for (int k = 0; k < ne; ++k) {
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += jac(i, j) * jac(k, j);
                jjt(i, k) = s;
            }
        auto lambda = detail::solve_unique(jjt, h, 1e-12);
        if (!lambda) return std::nullopt; // Jacobian (numerically) rank deficient
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < ne; ++i) s += jac(i, j) * (*lambda)[i];
            x[j] -= s;
        }
    }
    return std::nullopt;
}

} // namespace detail

/// Draws x in the max-norm ball around center, repaired onto the equality
/// constraints of X and checked against its inequalities. Nullopt on failure.
inline std::optional<Vec> sample_upper_feasible_x(Rng& rng, const BilevelModel& model,
                                                  const Vec& center, double radius,
                                                  const Tolerances& tol) {
    Vec x = sample_ball(rng, center, radius);
    auto repaired = detail::repair_to_upper_equalities(model, x, tol.feas);
    if (!repaired) return std::nullopt;
    if (max_norm_dist(*repaired, center) > radius) return std::nullopt;
    if (!upper_feasible(model, *repaired, tol.feas)) return std::nullopt;
    return repaired;
}

/// Pushes a lower-level feasible y toward the boundary of Gamma(x) along a
/// random direction, staying inside the sampling ball around y_center.
inline Vec push_to_boundary(Rng& rng, const BilevelModel& model, const Vec& x, Vec y,
                            const Vec& y_center, double radius, const Tolerances& tol) {
    const int m = model.m;
    Vec dir(m);
    double norm = 0.0;
    for (int i = 0; i < m; ++i) {
        dir[i] = rng.uniform(-1.0, 1.0);
        norm = std::max(norm, std::fabs(dir[i]));
    }
    if (norm < 1e-12) return y;
    for (double& d : dir) d /= norm;

    // Largest step keeping the point inside the ball.
    double t_max = 2.0 * radius;
    auto point_at = [&](double t) {
        Vec p = y;
        for (int i = 0; i < m; ++i) p[i] += t * dir[i];
        return p;
    };
    auto ok = [&](double t) {
        const Vec p = point_at(t);
        return max_norm_dist(p, y_center) <= radius &&
               lower_feasible(model, x, p, tol.feas);
    };
    if (ok(t_max)) return point_at(t_max); // no boundary hit inside the ball
    double lo = 0.0, hi = t_max;
    for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return point_at(lo);
}

} // namespace calmprobe
