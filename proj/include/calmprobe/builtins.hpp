#pragma once

// Bundled models: the three counterexample problems, the positive-case
// candidate, and a seeded fully-linear random generator. All builtins are
// materialized as model-file text so they exercise the parser.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "calmprobe/errors.hpp"
#include "calmprobe/model.hpp"
#include "calmprobe/poly.hpp"
#include "calmprobe/sampling.hpp"
#include "calmprobe/value_function.hpp"

namespace calmprobe {

inline std::vector<std::string> builtin_names() {
    return {"example-4-2", "example-4-3-center", "example-4-4", "example-4-5",
            "fully-linear-random"};
}

namespace detail {

/// Witness-path schedule: 1/k for k = 2..20, then 2^-k for k = 5..20.
inline std::string witness_schedule_text() {
    std::string out = "t = (";
    char buf[40];
    bool first = true;
    auto add = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        if (!first) out += ", ";
        out += buf;
        first = false;
    };
    for (int k = 2; k <= 20; ++k) add(1.0 / k);
    for (int k = 5; k <= 20; ++k) add(std::pow(0.5, k));
    out += ")";
    return out;
}

inline std::string example_4_2_text(const char* candidate) {
    return std::string(
               "# min { -x + y | x <= 2, y in argmin { -x^2 y | y in [0,1] } }\n"
               "[dims] n=1 m=1 q=2\n"
               "[upper] F = -x1 + y1\n"
               "X: x1 - 2 <= 0\n"
               "[lower.objective] c[1] = -x1^2\n"
               "[lower.constraints]\n"
               "A[1] = 0\n"
               "B[1][1] = -1\n"
               "A[2] = -1\n"
               "B[2][1] = 1\n"
               "[candidate] ") +
           candidate +
           "\n"
           "[path]\n"
           "x[1](t) = t\n"
           "y[1](t) = 0\n" +
           witness_schedule_text() + "\n";
}

} // namespace detail

/// Deterministic fully-linear instance: integer data in [-3, 3], affine A(x),
/// constant c and B, rejected until the lower level at x = 0 is feasible and
/// bounded. The candidate is (0, argmin at 0).
inline BilevelModel make_fully_linear_random(std::uint64_t seed) {
    Rng rng(seed);
    auto coeff = [&] { return static_cast<double>(static_cast<long>(rng.below(7)) - 3); };
    for (int attempt = 0; attempt < 500; ++attempt) {
        BilevelModel model;
        model.n = 1 + static_cast<int>(rng.below(2));
        model.m = 1 + static_cast<int>(rng.below(3));
        model.q = model.m + static_cast<int>(rng.below(static_cast<std::uint64_t>(5 - model.m)));
        model.ll_objective.resize(model.m);
        for (int i = 0; i < model.m; ++i)
            model.ll_objective[i] = Poly::constant(coeff());
        model.ll_rhs.resize(model.q);
        model.ll_B.assign(model.q, std::vector<Poly>(model.m));
        for (int j = 0; j < model.q; ++j) {
            Poly a = Poly::constant(coeff());
            for (int l = 0; l < model.n; ++l)
                a = a + Poly::variable({Var::Kind::X, l}).scaled(coeff());
            model.ll_rhs[j] = a;
            for (int i = 0; i < model.m; ++i)
                model.ll_B[j][i] = Poly::constant(coeff());
        }
        Poly f = Poly::constant(coeff());
        for (int l = 0; l < model.n; ++l)
            f = f + Poly::variable({Var::Kind::X, l}).scaled(coeff());
        for (int i = 0; i < model.m; ++i)
            f = f + Poly::variable({Var::Kind::Y, i}).scaled(coeff());
        model.F = f;
        model.form_tag = detail::classify_form(model);

        const Vec x0(model.n, 0.0);
        const LpOutcome at_zero = solve_lp(lower_level_lp(model, x0));
        if (at_zero.status != LpStatus::Optimal) continue;
        model.candidate = Point{x0, at_zero.primal_point};
        return model;
    }
    throw NumericalBreakdown("make_fully_linear_random: no viable instance found");
}

inline std::string builtin_model_text(const std::string& name, std::uint64_t seed = 0) {
    if (name == "example-4-2")
        return detail::example_4_2_text("x = (0), y = (0)");
    if (name == "example-4-3-center")
        return detail::example_4_2_text("x = (2), y = (1)");
    if (name == "example-4-4")
        return std::string(
                   "# min { x y1 | y in argmin { -x^2 y2 | y2 <= 0, -x y1 + y2 <= 0 } }\n"
                   "[dims] n=1 m=2 q=2\n"
                   "[upper] F = x1*y1\n"
                   "[lower.objective]\n"
                   "c[1] = 0\n"
                   "c[2] = -x1^2\n"
                   "[lower.constraints]\n"
                   "A[1] = 0\n"
                   "B[1][2] = 1\n"
                   "A[2] = 0\n"
                   "B[2][1] = -x1\n"
                   "B[2][2] = 1\n"
                   "[candidate] x = (0), y = (0, 0)\n"
                   "[path]\n"
                   "x[1](t) = t\n"
                   "y[1](t) = -t\n"
                   "y[2](t) = -t^2\n") +
               detail::witness_schedule_text() + "\n";
    if (name == "example-4-5")
        return std::string(
                   "# min { x2 (y+1) | x1 = x2^2, y in argmin { x1 y | y in [-1,1] } }\n"
                   "[dims] n=2 m=1 q=2\n"
                   "[upper] F = x2*y1 + x2\n"
                   "X: x1 - x2^2 = 0\n"
                   "[lower.objective] c[1] = x1\n"
                   "[lower.constraints]\n"
                   "A[1] = -1\n"
                   "B[1][1] = -1\n"
                   "A[2] = -1\n"
                   "B[2][1] = 1\n"
                   "[candidate] x = (0, 0), y = (-1)\n"
                   "[path]\n"
                   "x[1](t) = t^2\n"
                   "x[2](t) = -t\n"
                   "y[1](t) = -1 + t\n") +
               detail::witness_schedule_text() + "\n";
    if (name == "fully-linear-random")
        return serialize_model(make_fully_linear_random(seed));
    throw DimensionError("unknown builtin model '" + name + "'");
}

inline BilevelModel builtin_model(const std::string& name, std::uint64_t seed = 0) {
    return parse_model(builtin_model_text(name, seed));
}

} // namespace calmprobe
