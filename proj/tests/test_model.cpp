#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "calmprobe/builtins.hpp"
#include "calmprobe/model.hpp"

using namespace calmprobe;

TEST_CASE("bundled models parse with the expected structure") {
    SECTION("first counterexample") {
        const BilevelModel m = builtin_model("example-4-2");
        CHECK(m.n == 1);
        CHECK(m.m == 1);
        CHECK(m.q == 2);
        CHECK(m.form_tag == FormTag::LinearInY);
        REQUIRE(m.candidate.has_value());
        CHECK(m.candidate->x == Vec{0.0});
        CHECK(m.candidate->y == Vec{0.0});
        REQUIRE(m.paths.size() == 1);
    }
    SECTION("nonsmooth-value counterexample has an objective-perturbed lower level") {
        const BilevelModel m = builtin_model("example-4-5");
        CHECK(m.n == 2);
        CHECK(m.m == 1);
        CHECK(m.form_tag == FormTag::ObjectivePerturbed);
        REQUIRE(m.upper_constraints.size() == 1);
        CHECK(m.upper_constraints[0].rel == Relation::Equal);
    }
    SECTION("random instance is fully linear") {
        const BilevelModel m = builtin_model("fully-linear-random", 11);
        CHECK(m.form_tag == FormTag::FullyLinear);
        CHECK(m.n <= 2);
        CHECK(m.m <= 3);
        CHECK(m.q <= 4);
        REQUIRE(m.candidate.has_value());
    }
}

TEST_CASE("parser rejections") {
    CHECK_THROWS_AS(parse_model("[dims] n=1 m=1 q=0\n"), DimensionError);
    CHECK_THROWS_AS(parse_model("[dims] n=1 m=1 q=1\n"), DimensionError); // missing c[1]
    CHECK_THROWS_AS(parse_model("x = 3\n"), SyntaxError);                // content before section
    CHECK_THROWS_AS(parse_model("[dims] n=1 m=1 q=1\n[lower.objective] c[2] = 1\n"),
                    DimensionError);
    CHECK_THROWS_AS(
        parse_model("[dims] n=1 m=1 q=1\n[upper] F = y1/x1\n[lower.objective] c[1] = 1\n"),
        NonPolynomialExpression);
    CHECK_THROWS_AS(parse_model("[dims] n=1 m=1 q=1\n[lower.objective] c[1] = 1\n"
                                "[candidate] x = (0), y = (0, 1)\n"),
                    DimensionError);
    CHECK_THROWS_AS(parse_model("[dims] n=1 m=1 q=1\n[lower.objective] c[1] = 1\n"
                                "[path] y[1](t) = t\nt = (0.5, 0.5)\n"),
                    DimensionError);
}

TEST_CASE("serialize/parse round trip on all builtins") {
    for (const std::string& name : builtin_names()) {
        const BilevelModel m = builtin_model(name, 5);
        const std::string s1 = serialize_model(m);
        const BilevelModel m2 = parse_model(s1);
        CHECK(serialize_model(m2) == s1);
        CHECK(m2.form_tag == m.form_tag);
    }
}

TEST_CASE("instantiate evaluates the coefficient maps exactly") {
    SECTION("first counterexample at x = 3") {
        const BilevelModel m = builtin_model("example-4-2");
        const Instantiated inst = instantiate(m, {3.0});
        CHECK(inst.c == Vec{-9.0});
        CHECK(inst.A == Vec{0.0, -1.0});
        CHECK(inst.B(0, 0) == -1.0);
        CHECK(inst.B(1, 0) == 1.0);
    }
    SECTION("two-dimensional counterexample at x = 0") {
        const BilevelModel m = builtin_model("example-4-4");
        const Instantiated inst = instantiate(m, {0.0});
        CHECK(inst.c == Vec{0.0, 0.0});
        CHECK(inst.B(0, 0) == 0.0);
        CHECK(inst.B(0, 1) == 1.0);
        CHECK(inst.B(1, 0) == 0.0);
        CHECK(inst.B(1, 1) == 1.0);
    }
    SECTION("constant data stays constant") {
        const BilevelModel m = builtin_model("fully-linear-random", 2);
        const Instantiated a = instantiate(m, Vec(m.n, 0.0));
        const Instantiated b = instantiate(m, Vec(m.n, 1.5));
        CHECK(a.c == b.c);
        CHECK(a.B.data == b.B.data);
    }
}

TEST_CASE("upper feasibility and objective evaluation") {
    const BilevelModel e45 = builtin_model("example-4-5");
    CHECK(upper_feasible(e45, {0.01, -0.1}, 1e-9));
    CHECK_FALSE(upper_feasible(e45, {0.02, -0.1}, 1e-9));

    const BilevelModel e42 = builtin_model("example-4-2");
    CHECK(eval_F(e42, {{2.0}, {1.0}}) == -1.0);
    BilevelModel zero = e42;
    zero.F = Poly{};
    CHECK(eval_F(zero, {{2.0}, {1.0}}) == 0.0);
}

TEST_CASE("path evaluation") {
    const BilevelModel e42 = builtin_model("example-4-2");
    const Point p = eval_path(e42.paths[0], 0.1);
    CHECK(p.x == Vec{0.1});
    CHECK(p.y == Vec{0.0});

    const BilevelModel e45 = builtin_model("example-4-5");
    const Point q = eval_path(e45.paths[0], 0.5);
    CHECK(q.x[0] == Catch::Approx(0.25));
    CHECK(q.x[1] == Catch::Approx(-0.5));
    CHECK(q.y[0] == Catch::Approx(-0.5));

    ParametricPath constant;
    constant.x_path = {Poly::constant(2.0)};
    constant.y_path = {Poly::constant(1.0)};
    constant.t_schedule = {0.5, 0.25};
    for (double t : constant.t_schedule) {
        const Point c = eval_path(constant, t);
        CHECK(c.x == Vec{2.0});
        CHECK(c.y == Vec{1.0});
    }
}

TEST_CASE("bundled witness schedules start at the harmonic points") {
    for (const char* name : {"example-4-2", "example-4-4", "example-4-5"}) {
        const BilevelModel m = builtin_model(name);
        REQUIRE_FALSE(m.paths.empty());
        const Vec& ts = m.paths[0].t_schedule;
        REQUIRE(ts.size() >= 19);
        for (int k = 2; k <= 20; ++k) CHECK(ts[k - 2] == 1.0 / k);
    }
}
