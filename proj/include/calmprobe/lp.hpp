#pragma once

// Dense linear-programming kernel: two-phase primal simplex with Bland's rule,
// dual multiplier extraction, vertex enumeration for small polyhedra, and
// tolerance-aware numerical rank.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "calmprobe/config.hpp"
#include "calmprobe/errors.hpp"
#include "calmprobe/matrix.hpp"

namespace calmprobe {

enum class Sign { Free, Nonpositive, Nonnegative };

/// {x | eq_matrix x = eq_rhs, ineq_matrix x <= ineq_rhs, sign constraints}.
struct Polyhedron {
    Mat eq_matrix;
    Vec eq_rhs;
    Mat ineq_matrix;
    Vec ineq_rhs;
    std::vector<Sign> signs;

    int num_vars() const { return static_cast<int>(signs.size()); }

    void validate() const {
        const int n = num_vars();
        if (eq_matrix.rows > 0 && eq_matrix.cols != n)
            throw DimensionMismatch("Polyhedron: eq_matrix column count");
        if (ineq_matrix.rows > 0 && ineq_matrix.cols != n)
            throw DimensionMismatch("Polyhedron: ineq_matrix column count");
        if (static_cast<int>(eq_rhs.size()) != eq_matrix.rows)
            throw DimensionMismatch("Polyhedron: eq_rhs length");
        if (static_cast<int>(ineq_rhs.size()) != ineq_matrix.rows)
            throw DimensionMismatch("Polyhedron: ineq_rhs length");
    }

    /// Largest constraint violation at p (0 when feasible).
    double max_violation(const Vec& p) const {
        double v = 0.0;
        for (int i = 0; i < eq_matrix.rows; ++i) {
            double s = -eq_rhs[i];
            for (int j = 0; j < eq_matrix.cols; ++j) s += eq_matrix(i, j) * p[j];
            v = std::max(v, std::fabs(s));
        }
        for (int i = 0; i < ineq_matrix.rows; ++i) {
            double s = -ineq_rhs[i];
            for (int j = 0; j < ineq_matrix.cols; ++j) s += ineq_matrix(i, j) * p[j];
            v = std::max(v, s);
        }
        for (int j = 0; j < num_vars(); ++j) {
            if (signs[j] == Sign::Nonnegative) v = std::max(v, -p[j]);
            if (signs[j] == Sign::Nonpositive) v = std::max(v, p[j]);
        }
        return v;
    }

    bool contains(const Vec& p, double tol) const { return max_violation(p) <= tol; }
};

enum class Sense { Minimize, Maximize };
enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpProblem {
    Vec objective;
    Sense sense = Sense::Minimize;
    Polyhedron region;
};

/// Dual sign convention: for Minimize problems ineq_duals <= 0, for Maximize
/// problems ineq_duals >= 0; in both cases
/// eq_duals . eq_rhs + ineq_duals . ineq_rhs equals the optimal value.
struct LpOutcome {
    LpStatus status = LpStatus::Optimal;
    double value = 0.0;
    Vec primal_point;
    Vec eq_duals;
    Vec ineq_duals;
    std::vector<int> basis; // basic columns of the internal standard form
};

namespace detail {

struct StdCol {
    int orig_var; // structural variable this column maps to, -1 for slack
    double scale; // contribution of the standard variable to the original one
};

inline void pivot_tableau(Mat& t, std::vector<int>& basis, int prow, int pcol) {
    const double piv = t(prow, pcol);
    for (int j = 0; j < t.cols; ++j) t(prow, j) /= piv;
    for (int i = 0; i < t.rows; ++i) {
        if (i == prow) continue;
        const double f = t(i, pcol);
        if (f == 0.0) continue;
        for (int j = 0; j < t.cols; ++j) t(i, j) -= f * t(prow, j);
        t(i, pcol) = 0.0;
    }
    basis[prow] = pcol;
}

/// One simplex phase with Bland's rule. Columns >= allowed_cols may not enter.
/// Returns true when optimal, false when unbounded in the entering column.
inline bool simplex_phase(Mat& t, std::vector<int>& basis, const Vec& cost,
                          int allowed_cols, double piv_tol) {
    const int m = t.rows;
    const int rhs = t.cols - 1;
    const long iter_cap = 50000;
    for (long iter = 0;; ++iter) {
        if (iter > iter_cap)
            throw NumericalBreakdown("simplex: iteration cap exceeded");
        // reduced costs r_j = c_j - c_B^T T_j, entering = smallest j with r_j < 0
        int enter = -1;
        for (int j = 0; j < allowed_cols; ++j) {
            double r = cost[j];
            for (int i = 0; i < m; ++i) {
                const double cb = cost[basis[i]];
                if (cb != 0.0) r -= cb * t(i, j);
            }
            if (r < -piv_tol) { enter = j; break; }
        }
        if (enter < 0) return true;
        int leave = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            const double a = t(i, enter);
            if (a <= piv_tol) continue;
            const double ratio = t(i, rhs) / a;
            if (ratio < best_ratio - 1e-15 ||
                (ratio <= best_ratio + 1e-15 && (leave < 0 || basis[i] < basis[leave]))) {
                best_ratio = ratio;
                leave = i;
            }
        }
        if (leave < 0) return false;
        pivot_tableau(t, basis, leave, enter);
    }
}

} // namespace detail

inline LpOutcome solve_lp(const LpProblem& p, const Tolerances& tol = {}) {
    p.region.validate();
    const int n = p.region.num_vars();
    if (static_cast<int>(p.objective.size()) != n)
        throw DimensionMismatch("solve_lp: objective length");

    const bool maximize = (p.sense == Sense::Maximize);
    Vec obj = p.objective;
    if (maximize)
        for (double& v : obj) v = -v;

    const Mat& E = p.region.eq_matrix;
    const Mat& G = p.region.ineq_matrix;
    const int me = E.rows, mi = G.rows, m = me + mi;

    // Standard form: split/flip structural variables, add a slack per inequality.
    std::vector<detail::StdCol> cols;
    for (int j = 0; j < n; ++j) {
        switch (p.region.signs[j]) {
            case Sign::Nonnegative: cols.push_back({j, 1.0}); break;
            case Sign::Nonpositive: cols.push_back({j, -1.0}); break;
            case Sign::Free:
                cols.push_back({j, 1.0});
                cols.push_back({j, -1.0});
                break;
        }
    }
    const int n_struct = static_cast<int>(cols.size());
    const int n_slack = mi;
    const int n_art = m;
    const int ncols = n_struct + n_slack + n_art + 1;
    const int rhs = ncols - 1;

    Mat t(m, ncols);
    Vec row_flip(m, 1.0);
    auto orig_coeff = [&](int row, int var) {
        return row < me ? E(row, var) : G(row - me, var);
    };
    for (int i = 0; i < m; ++i) {
        const double b = i < me ? p.region.eq_rhs[i] : p.region.ineq_rhs[i - me];
        for (int k = 0; k < n_struct; ++k)
            t(i, k) = orig_coeff(i, cols[k].orig_var) * cols[k].scale;
        if (i >= me) t(i, n_struct + (i - me)) = 1.0; // slack
        t(i, rhs) = b;
        if (t(i, rhs) < 0.0) {
            row_flip[i] = -1.0;
            for (int j = 0; j < ncols; ++j) t(i, j) = -t(i, j);
        }
        t(i, n_struct + n_slack + i) = 1.0; // artificial
    }

    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) basis[i] = n_struct + n_slack + i;

    // Phase 1: minimize the sum of artificials.
    Vec cost1(ncols, 0.0);
    for (int i = 0; i < m; ++i) cost1[n_struct + n_slack + i] = 1.0;
    if (!detail::simplex_phase(t, basis, cost1, n_struct + n_slack + n_art, tol.pivot))
        throw NumericalBreakdown("simplex: phase 1 unbounded"); // cannot happen
    double art_sum = 0.0;
    for (int i = 0; i < m; ++i)
        if (basis[i] >= n_struct + n_slack) art_sum += t(i, rhs);
    double b_scale = 1.0;
    for (int i = 0; i < m; ++i) b_scale = std::max(b_scale, std::fabs(t(i, rhs)));
    LpOutcome out;
    if (art_sum > 1e-8 * b_scale) {
        out.status = LpStatus::Infeasible;
        out.value = maximize ? -std::numeric_limits<double>::infinity()
                             : std::numeric_limits<double>::infinity();
        return out;
    }
    // Drive basic artificials out where possible (their rows carry rhs 0).
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n_struct + n_slack) continue;
        int piv = -1;
        for (int j = 0; j < n_struct + n_slack; ++j)
            if (std::fabs(t(i, j)) > tol.pivot) { piv = j; break; }
        if (piv >= 0) detail::pivot_tableau(t, basis, i, piv);
    }

    // Phase 2: artificial columns are frozen, their reduced costs carry the duals.
    Vec cost2(ncols, 0.0);
    for (int k = 0; k < n_struct; ++k) cost2[k] = obj[cols[k].orig_var] * cols[k].scale;
    const bool bounded = detail::simplex_phase(t, basis, cost2, n_struct + n_slack, tol.pivot);
    if (!bounded) {
        out.status = LpStatus::Unbounded;
        out.value = maximize ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
        return out;
    }

    Vec z(n_struct + n_slack + n_art, 0.0);
    for (int i = 0; i < m; ++i) z[basis[i]] = t(i, rhs);
    Vec x(n, 0.0);
    for (int k = 0; k < n_struct; ++k) x[cols[k].orig_var] += cols[k].scale * z[k];

    out.status = LpStatus::Optimal;
    out.primal_point = x;
    out.value = dot(p.objective, x);
    out.basis = basis;
    std::sort(out.basis.begin(), out.basis.end());

    out.eq_duals.assign(me, 0.0);
    out.ineq_duals.assign(mi, 0.0);
    const double dual_sign = maximize ? -1.0 : 1.0;
    for (int i = 0; i < m; ++i) {
        const int art = n_struct + n_slack + i;
        double r = 0.0; // phase-2 reduced cost of the artificial column
        for (int k = 0; k < m; ++k) {
            const double cb = cost2[basis[k]];
            if (cb != 0.0) r -= cb * t(k, art);
        }
        const double y = dual_sign * row_flip[i] * (-r);
        if (i < me) out.eq_duals[i] = y;
        else out.ineq_duals[i - me] = y;
    }
    return out;
}

enum class RankPolicy { Echelon, Svd };

namespace detail {

inline int rank_echelon(Mat a, double rel_tol) {
    const double thr = rel_tol * a.max_abs();
    int rank = 0;
    for (int col = 0; col < a.cols && rank < a.rows; ++col) {
        int piv = -1;
        double best = thr;
        for (int i = rank; i < a.rows; ++i)
            if (std::fabs(a(i, col)) > best) { best = std::fabs(a(i, col)); piv = i; }
        if (piv < 0) continue;
        for (int j = 0; j < a.cols; ++j) std::swap(a(rank, j), a(piv, j));
        for (int i = rank + 1; i < a.rows; ++i) {
            const double f = a(i, col) / a(rank, col);
            if (f == 0.0) continue;
            for (int j = col; j < a.cols; ++j) a(i, j) -= f * a(rank, j);
        }
        ++rank;
    }
    return rank;
}

inline int rank_svd(const Mat& m, double rel_tol) {
    // One-sided Jacobi on the taller orientation; singular values = column norms.
    Mat a = m;
    if (a.rows < a.cols) { // transpose
        Mat t(m.cols, m.rows);
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
        a = t;
    }
    const int n = a.cols;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0, aqq = 0, apq = 0;
                for (int i = 0; i < a.rows; ++i) {
                    app += a(i, p) * a(i, p);
                    aqq += a(i, q) * a(i, q);
                    apq += a(i, p) * a(i, q);
                }
                if (std::fabs(apq) <= 1e-30 + 1e-15 * std::sqrt(app * aqq)) continue;
                rotated = true;
                const double tau = (aqq - app) / (2.0 * apq);
                const double sgn = tau >= 0 ? 1.0 : -1.0;
                const double tt = sgn / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + tt * tt), s = c * tt;
                for (int i = 0; i < a.rows; ++i) {
                    const double vp = a(i, p), vq = a(i, q);
                    a(i, p) = c * vp - s * vq;
                    a(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }
    Vec sv(n, 0.0);
    double smax = 0.0;
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < a.rows; ++i) s += a(i, j) * a(i, j);
        sv[j] = std::sqrt(s);
        smax = std::max(smax, sv[j]);
    }
    int rank = 0;
    for (double s : sv)
        if (s > rel_tol * smax && smax > 0.0) ++rank;
    return rank;
}

} // namespace detail

/// Rank under relative tolerance rel_tol * (largest entry / singular value).
inline int numerical_rank(const Mat& m, double rel_tol = 1e-8,
                          RankPolicy policy = RankPolicy::Echelon) {
    if (m.rows == 0 || m.cols == 0) return 0;
    return policy == RankPolicy::Echelon ? detail::rank_echelon(m, rel_tol)
                                         : detail::rank_svd(m, rel_tol);
}

struct VertexSet {
    std::vector<Vec> vertices;
    std::vector<std::vector<int>> bases; // active row indices: eq rows, then ineq/sign rows
    bool empty_polyhedron = false;
};

namespace detail {

/// Unique solution of rows*x = rhs (rows may be redundant); nullopt when the
/// system is rank deficient or inconsistent at tolerance.
inline std::optional<Vec> solve_unique(Mat a, Vec b, double rel_tol) {
    const int n = a.cols, m = a.rows;
    if (m < n) return std::nullopt;
    double scale = a.max_abs();
    for (double v : b) scale = std::max(scale, std::fabs(v));
    const double thr = rel_tol * std::max(scale, 1e-300);
    int prow = 0;
    for (int col = 0; col < n; ++col) {
        int piv = -1;
        double best = thr;
        for (int i = prow; i < m; ++i)
            if (std::fabs(a(i, col)) > best) { best = std::fabs(a(i, col)); piv = i; }
        if (piv < 0) return std::nullopt; // rank < n
        for (int j = 0; j < n; ++j) std::swap(a(prow, j), a(piv, j));
        std::swap(b[prow], b[piv]);
        for (int i = 0; i < m; ++i) {
            if (i == prow) continue;
            const double f = a(i, col) / a(prow, col);
            if (f == 0.0) continue;
            for (int j = col; j < n; ++j) a(i, j) -= f * a(prow, j);
            b[i] -= f * b[prow];
        }
        ++prow;
    }
    for (int i = n; i < m; ++i)
        if (std::fabs(b[i]) > thr) return std::nullopt; // inconsistent
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = b[i] / a(i, i);
    return x;
}

inline std::uint64_t binomial_capped(int n, int k, std::uint64_t cap) {
    if (k < 0 || k > n) return 0;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
        if (r > cap) return cap + 1;
    }
    return r;
}

} // namespace detail

/// Exactly the basic feasible solutions of poly, deduplicated at tol.vertex.
/// Basis indices refer to rows of [eq rows; ineq rows; sign rows].
inline VertexSet enumerate_vertices(const Polyhedron& poly, const Tolerances& tol = {},
                                    std::uint64_t case_cap = 5'000'000) {
    poly.validate();
    const int n = poly.num_vars();

    // Collect all inequality-type rows (explicit inequalities, then sign bounds).
    std::vector<Vec> ineq_rows;
    Vec ineq_rhs;
    for (int i = 0; i < poly.ineq_matrix.rows; ++i) {
        ineq_rows.push_back(poly.ineq_matrix.row(i));
        ineq_rhs.push_back(poly.ineq_rhs[i]);
    }
    for (int j = 0; j < n; ++j) {
        if (poly.signs[j] == Sign::Free) continue;
        Vec r(n, 0.0);
        r[j] = poly.signs[j] == Sign::Nonnegative ? -1.0 : 1.0;
        ineq_rows.push_back(r);
        ineq_rhs.push_back(0.0);
    }
    const int ni = static_cast<int>(ineq_rows.size());
    const int ne = poly.eq_matrix.rows;

    const int eq_rank = numerical_rank(poly.eq_matrix, tol.rank);
    const int need = n - eq_rank;

    VertexSet vs;
    if (need >= 0 && detail::binomial_capped(ni, need, case_cap) > case_cap)
        throw CombinatorialBlowup("enumerate_vertices: basis enumeration cap exceeded");

    auto try_active_set = [&](const std::vector<int>& sel) {
        Mat a(ne + static_cast<int>(sel.size()), n);
        Vec b(ne + sel.size());
        for (int i = 0; i < ne; ++i) {
            for (int j = 0; j < n; ++j) a(i, j) = poly.eq_matrix(i, j);
            b[i] = poly.eq_rhs[i];
        }
        for (std::size_t s = 0; s < sel.size(); ++s) {
            for (int j = 0; j < n; ++j) a(ne + static_cast<int>(s), j) = ineq_rows[sel[s]][j];
            b[ne + s] = ineq_rhs[sel[s]];
        }
        auto x = detail::solve_unique(a, b, tol.rank);
        if (!x || !poly.contains(*x, tol.feas)) return;
        for (const Vec& v : vs.vertices)
            if (max_norm_dist(v, *x) <= tol.vertex) return; // keep first basis seen
        vs.vertices.push_back(*x);
        std::vector<int> basis;
        for (int i = 0; i < ne; ++i) basis.push_back(i);
        for (int s : sel) basis.push_back(ne + s);
        vs.bases.push_back(std::move(basis));
    };

    if (need >= 0 && need <= ni) {
        std::vector<int> sel(need);
        for (int i = 0; i < need; ++i) sel[i] = i;
        while (true) {
            try_active_set(sel);
            if (need == 0) break;
            int i = need - 1;
            while (i >= 0 && sel[i] == ni - need + i) --i;
            if (i < 0) break;
            ++sel[i];
            for (int j = i + 1; j < need; ++j) sel[j] = sel[j - 1] + 1;
        }
    }

    if (vs.vertices.empty()) {
        LpProblem feas;
        feas.objective.assign(n, 0.0);
        feas.region = poly;
        vs.empty_polyhedron = (solve_lp(feas, tol).status == LpStatus::Infeasible);
    }
    return vs;
}

} // namespace calmprobe
