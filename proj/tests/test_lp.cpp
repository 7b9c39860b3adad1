#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include "calmprobe/lp.hpp"
#include "calmprobe/sampling.hpp"

using namespace calmprobe;

namespace {

LpProblem make_lp(int nvars, Sense sense, const Vec& obj,
                  const std::vector<std::pair<Vec, double>>& ineqs,
                  const std::vector<std::pair<Vec, double>>& eqs = {},
                  std::vector<Sign> signs = {}) {
    LpProblem p;
    p.objective = obj;
    p.sense = sense;
    p.region.signs = signs.empty() ? std::vector<Sign>(nvars, Sign::Free) : std::move(signs);
    p.region.eq_matrix = Mat(static_cast<int>(eqs.size()), nvars);
    p.region.ineq_matrix = Mat(static_cast<int>(ineqs.size()), nvars);
    for (std::size_t i = 0; i < eqs.size(); ++i) {
        for (int j = 0; j < nvars; ++j) p.region.eq_matrix(static_cast<int>(i), j) = eqs[i].first[j];
        p.region.eq_rhs.push_back(eqs[i].second);
    }
    for (std::size_t i = 0; i < ineqs.size(); ++i) {
        for (int j = 0; j < nvars; ++j)
            p.region.ineq_matrix(static_cast<int>(i), j) = ineqs[i].first[j];
        p.region.ineq_rhs.push_back(ineqs[i].second);
    }
    return p;
}

double dual_objective(const LpProblem& p, const LpOutcome& out) {
    return dot(out.eq_duals, p.region.eq_rhs) + dot(out.ineq_duals, p.region.ineq_rhs);
}

} // namespace

TEST_CASE("solve_lp on one-variable examples") {
    SECTION("minimum at a constraint boundary") {
        // min{y | -y <= 0}, y free
        const auto out = solve_lp(make_lp(1, Sense::Minimize, {1.0}, {{{-1.0}, 0.0}}));
        REQUIRE(out.status == LpStatus::Optimal);
        CHECK(out.value == Catch::Approx(0.0).margin(1e-12));
        CHECK(out.primal_point[0] == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("lower level of the first counterexample at x = 1") {
        // min{-y | 0 <= y <= 1}
        const auto out =
            solve_lp(make_lp(1, Sense::Minimize, {-1.0}, {{{-1.0}, 0.0}, {{1.0}, 1.0}}));
        REQUIRE(out.status == LpStatus::Optimal);
        CHECK(out.value == Catch::Approx(-1.0).margin(1e-12));
        CHECK(out.primal_point[0] == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("contradictory bounds are infeasible") {
        const auto out =
            solve_lp(make_lp(1, Sense::Minimize, {1.0}, {{{1.0}, -1.0}, {{-1.0}, -1.0}}));
        CHECK(out.status == LpStatus::Infeasible);
    }
    SECTION("ray of decrease is unbounded") {
        const auto out = solve_lp(make_lp(1, Sense::Minimize, {1.0}, {{{1.0}, 0.0}}));
        CHECK(out.status == LpStatus::Unbounded);
    }
}

TEST_CASE("solve_lp rejects inconsistent dimensions") {
    auto p = make_lp(2, Sense::Minimize, {1.0, 1.0}, {{{1.0, 1.0}, 1.0}});
    p.objective = {1.0};
    CHECK_THROWS_AS(solve_lp(p), DimensionMismatch);
}

TEST_CASE("enumerate_vertices on hand-solved polyhedra") {
    Tolerances tol;
    SECTION("reflected 1-simplex") {
        // {xi <= 0 | -xi1 - xi2 = 1}
        Polyhedron poly;
        poly.signs = {Sign::Nonpositive, Sign::Nonpositive};
        poly.eq_matrix = Mat(1, 2);
        poly.eq_matrix(0, 0) = -1.0;
        poly.eq_matrix(0, 1) = -1.0;
        poly.eq_rhs = {1.0};
        poly.ineq_matrix = Mat(0, 2);
        const auto vs = enumerate_vertices(poly, tol);
        REQUIRE(vs.vertices.size() == 2);
        bool saw_a = false, saw_b = false;
        for (const auto& v : vs.vertices) {
            if (max_norm_dist(v, {-1.0, 0.0}) <= 1e-9) saw_a = true;
            if (max_norm_dist(v, {0.0, -1.0}) <= 1e-9) saw_b = true;
        }
        CHECK(saw_a);
        CHECK(saw_b);
    }
    SECTION("unit box") {
        Polyhedron poly;
        poly.signs = {Sign::Free, Sign::Free};
        poly.eq_matrix = Mat(0, 2);
        poly.ineq_matrix = Mat(4, 2);
        poly.ineq_rhs = {0.0, 1.0, 0.0, 1.0};
        poly.ineq_matrix(0, 0) = -1.0;
        poly.ineq_matrix(1, 0) = 1.0;
        poly.ineq_matrix(2, 1) = -1.0;
        poly.ineq_matrix(3, 1) = 1.0;
        const auto vs = enumerate_vertices(poly, tol);
        CHECK(vs.vertices.size() == 4);
        for (const auto& v : vs.vertices) CHECK(poly.contains(v, 1e-9));
    }
    SECTION("empty polyhedron is signaled") {
        Polyhedron poly;
        poly.signs = {Sign::Nonnegative};
        poly.eq_matrix = Mat(0, 1);
        poly.ineq_matrix = Mat(1, 1);
        poly.ineq_matrix(0, 0) = 1.0;
        poly.ineq_rhs = {-1.0};
        const auto vs = enumerate_vertices(poly, tol);
        CHECK(vs.vertices.empty());
        CHECK(vs.empty_polyhedron);
    }
    SECTION("enumeration cap guard") {
        Polyhedron poly;
        const int n = 12;
        poly.signs.assign(n, Sign::Free);
        poly.eq_matrix = Mat(0, n);
        poly.ineq_matrix = Mat(2 * n, n);
        poly.ineq_rhs.assign(2 * n, 1.0);
        for (int j = 0; j < n; ++j) {
            poly.ineq_matrix(2 * j, j) = 1.0;
            poly.ineq_matrix(2 * j + 1, j) = -1.0;
        }
        CHECK_THROWS_AS(enumerate_vertices(poly, tol, 100), CombinatorialBlowup);
    }
}

TEST_CASE("numerical_rank on small matrices") {
    SECTION("column with one nonzero") {
        Mat m(2, 1);
        m(0, 0) = 0.0;
        m(1, 0) = 1.0;
        CHECK(numerical_rank(m) == 1);
        CHECK(numerical_rank(m, 1e-8, RankPolicy::Svd) == 1);
    }
    SECTION("stacked objective/constraint rows at x = 2") {
        Mat m(2, 1);
        m(0, 0) = -4.0;
        m(1, 0) = 1.0;
        CHECK(numerical_rank(m) == 1);
    }
    SECTION("rank jump of the row (0, -x^2)") {
        Mat at0(1, 2), at01(1, 2);
        at01(0, 1) = -0.01;
        CHECK(numerical_rank(at0) == 0);
        CHECK(numerical_rank(at01) == 1);
        CHECK(numerical_rank(at0, 1e-8, RankPolicy::Svd) == 0);
        CHECK(numerical_rank(at01, 1e-8, RankPolicy::Svd) == 1);
    }
    SECTION("policies agree on a rank-2 3x3 matrix") {
        Mat m(3, 3);
        const double data[9] = {1, 2, 3, 4, 5, 6, 5, 7, 9}; // row3 = row1 + row2
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = data[3 * i + j];
        CHECK(numerical_rank(m, 1e-8, RankPolicy::Echelon) == 2);
        CHECK(numerical_rank(m, 1e-8, RankPolicy::Svd) == 2);
    }
}

TEST_CASE("random bounded LPs: strong duality and vertex consistency") {
    Rng rng(2024);
    Tolerances tol;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(3));
        const int extra = static_cast<int>(rng.below(4));
        LpProblem p;
        p.objective.resize(n);
        for (double& c : p.objective) c = std::floor(rng.uniform(-4.0, 5.0));
        p.sense = rng.below(2) ? Sense::Maximize : Sense::Minimize;
        p.region.signs.assign(n, Sign::Free);
        p.region.eq_matrix = Mat(0, n);
        // Box |x_j| <= 3 keeps every instance bounded; random extra rows with
        // nonnegative rhs keep the origin feasible.
        p.region.ineq_matrix = Mat(2 * n + extra, n);
        p.region.ineq_rhs.assign(2 * n + extra, 3.0);
        for (int j = 0; j < n; ++j) {
            p.region.ineq_matrix(2 * j, j) = 1.0;
            p.region.ineq_matrix(2 * j + 1, j) = -1.0;
        }
        for (int i = 0; i < extra; ++i) {
            for (int j = 0; j < n; ++j)
                p.region.ineq_matrix(2 * n + i, j) = std::floor(rng.uniform(-3.0, 4.0));
            p.region.ineq_rhs[2 * n + i] = std::floor(rng.uniform(0.0, 4.0));
        }

        const auto out = solve_lp(p, tol);
        REQUIRE(out.status == LpStatus::Optimal);
        CHECK(p.region.max_violation(out.primal_point) <= 1e-9);
        CHECK(std::fabs(dot(p.objective, out.primal_point) - out.value) <= 1e-9);
        CHECK(std::fabs(dual_objective(p, out) - out.value) <= 1e-8);
        for (double y : out.ineq_duals) {
            if (p.sense == Sense::Minimize) CHECK(y <= 1e-8);
            else CHECK(y >= -1e-8);
        }

        const auto vs = enumerate_vertices(p.region, tol);
        REQUIRE_FALSE(vs.vertices.empty());
        double best = p.sense == Sense::Minimize ? std::numeric_limits<double>::infinity()
                                                 : -std::numeric_limits<double>::infinity();
        for (const auto& v : vs.vertices) {
            const double val = dot(p.objective, v);
            best = p.sense == Sense::Minimize ? std::min(best, val) : std::max(best, val);
        }
        CHECK(std::fabs(best - out.value) <= 1e-8);

        // Determinism: an identical call reproduces the outcome bit for bit.
        const auto out2 = solve_lp(p, tol);
        REQUIRE(out2.primal_point.size() == out.primal_point.size());
        CHECK(std::memcmp(out.primal_point.data(), out2.primal_point.data(),
                          out.primal_point.size() * sizeof(double)) == 0);
        CHECK(out.basis == out2.basis);
    }
}

TEST_CASE("duals price equality constraints too") {
    // min{x1 + x2 | x1 + x2 = 2, x1 - x2 <= 0}: value 2, eq dual 1, ineq dual 0.
    const auto p = make_lp(2, Sense::Minimize, {1.0, 1.0}, {{{1.0, -1.0}, 0.0}},
                           {{{1.0, 1.0}, 2.0}});
    const auto out = solve_lp(p);
    REQUIRE(out.status == LpStatus::Optimal);
    CHECK(out.value == Catch::Approx(2.0).margin(1e-10));
    CHECK(out.eq_duals[0] == Catch::Approx(1.0).margin(1e-8));
    CHECK(std::fabs(out.ineq_duals[0]) <= 1e-8);
}
