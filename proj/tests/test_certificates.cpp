#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "calmprobe/builtins.hpp"
#include "calmprobe/certificates.hpp"
#include "calmprobe/falsifier.hpp"

using namespace calmprobe;

namespace {

Mat column(std::initializer_list<double> entries) {
    Mat m(static_cast<int>(entries.size()), 1);
    int i = 0;
    for (double v : entries) m(i++, 0) = v;
    return m;
}

// The first counterexample's lower level frozen at x = 1: min{-y | y in [0,1]}.
const char* frozen_lower_text =
    "[dims] n=1 m=1 q=2\n"
    "[upper] F = y1\n"
    "[lower.objective] c[1] = -1\n"
    "[lower.constraints]\n"
    "A[1] = 0\nB[1][1] = -1\n"
    "A[2] = -1\nB[2][1] = 1\n";

} // namespace

TEST_CASE("uwsm modulus from hand-enumerated dual polyhedra") {
    SECTION("half-line lower level min{y | y >= 0}") {
        const WsmCertificate cert = uwsm_modulus(Vec{1.0}, column({-1.0}));
        CHECK(cert.modulus_M == Catch::Approx(1.0).margin(1e-9));
        CHECK_FALSE(cert.witness_vertices.vertices.empty());
    }
    SECTION("flat objective min{0 | y in [0,1]} needs no sharpness") {
        const WsmCertificate cert = uwsm_modulus(Vec{0.0}, column({-1.0, 1.0}));
        CHECK(cert.modulus_M <= 1e-9);
    }
    SECTION("certificate validates the sharpness inequality by sampling") {
        const BilevelModel model = parse_model(frozen_lower_text);
        REQUIRE(model.form_tag == FormTag::FullyLinear);
        const WsmCertificate cert = uwsm_modulus(model);
        REQUIRE(std::isfinite(cert.modulus_M));
        Tolerances tol;
        const double phi1 = phi(model, {1.0}, tol).value;
        Rng rng(12);
        for (int s = 0; s < 200; ++s) {
            const double y = rng.uniform(-2.0, 3.0);
            if (!lower_feasible(model, {1.0}, {y}, tol.feas)) continue;
            const double dist = dist_to_solutions(model, {1.0}, {y}, tol).sigma;
            CHECK(dist <= cert.modulus_M * (-y - phi1) + 1e-7);
        }
    }
    SECTION("form guard routes parameter-dependent data to the sweep") {
        CHECK_THROWS_AS(uwsm_modulus(builtin_model("example-4-2")), FormNotSupported);
    }
}

TEST_CASE("modulus sweep exposes the parameter-dependent growth of Q(x)") {
    const BilevelModel e42 = builtin_model("example-4-2");
    const WsmCertificate cert =
        uwsm_modulus_sweep(e42, {{1.0}, {0.5}, {0.25}, {0.125}});
    REQUIRE(cert.per_x_moduli.size() == 4);
    const double expected[] = {1.0, 4.0, 16.0, 64.0}; // M(x) = 1/x^2
    for (int i = 0; i < 4; ++i)
        CHECK(cert.per_x_moduli[i].second == Catch::Approx(expected[i]).margin(1e-6));
    CHECK(cert.modulus_M == Catch::Approx(64.0).margin(1e-6));
    CHECK(cert.modulus_growth_flagged);

    const BilevelModel lin = builtin_model("fully-linear-random", 3);
    const WsmCertificate flat =
        uwsm_modulus_sweep(lin, {Vec(lin.n, 0.0), Vec(lin.n, 0.3), Vec(lin.n, -0.7)});
    for (const auto& [x, m] : flat.per_x_moduli)
        CHECK(m == Catch::Approx(flat.per_x_moduli[0].second).margin(1e-8));
    CHECK_FALSE(flat.modulus_growth_flagged);

    const WsmCertificate single = uwsm_modulus_sweep(e42, {{0.5}});
    CHECK(single.modulus_M == Catch::Approx(4.0).margin(1e-6));
}

TEST_CASE("luwsmc ratio probe") {
    const BilevelModel e42 = builtin_model("example-4-2");
    SECTION("bounded ratios at the global minimizer") {
        const RatioProbeReport rep =
            luwsmc_probe(e42, {{2.0}, {1.0}}, {0.5, 0.25, 0.1}, 600, 9);
        CHECK(rep.trend == Trend::Bounded);
        for (const auto& s : rep.per_radius) {
            CHECK(s.sample_count > 0);
            CHECK(s.alpha_estimate > 0.2);
        }
    }
    SECTION("diverging ratios at the non-calm local minimizer") {
        const RatioProbeReport rep =
            luwsmc_probe(e42, {{0.0}, {0.0}}, {0.5, 0.1, 0.02}, 600, 9);
        CHECK(rep.trend == Trend::Diverging);
    }
    SECTION("center must lie in the solution graph") {
        CHECK_THROWS_AS(luwsmc_probe(e42, {{1.0}, {0.3}}, {0.5}, 10, 9), CenterNotOptimal);
    }
    SECTION("probe reports when no sample yields a ratio") {
        // Lower level pins y to 0, so f - phi vanishes on every feasible sample.
        const BilevelModel pinned = parse_model(
            "[dims] n=1 m=1 q=2\n[upper] F = y1\n[lower.objective] c[1] = -1\n"
            "[lower.constraints]\nA[1] = 0\nB[1][1] = 1\nA[2] = 0\nB[2][1] = -1\n");
        CHECK_THROWS_AS(luwsmc_probe(pinned, {{0.0}, {0.0}}, {0.5}, 50, 9),
                        AllSamplesSkipped);
    }
    SECTION("determinism under a fixed seed") {
        const auto a = luwsmc_probe(e42, {{2.0}, {1.0}}, {0.5, 0.1}, 200, 42);
        const auto b = luwsmc_probe(e42, {{2.0}, {1.0}}, {0.5, 0.1}, 200, 42);
        REQUIRE(a.per_radius.size() == b.per_radius.size());
        for (std::size_t i = 0; i < a.per_radius.size(); ++i) {
            CHECK(a.per_radius[i].worst_ratio == b.per_radius[i].worst_ratio);
            CHECK(a.per_radius[i].sample_count == b.per_radius[i].sample_count);
        }
    }
}

TEST_CASE("r-regularity ratio probe") {
    SECTION("bounded at the global minimizer") {
        const BilevelModel e42 = builtin_model("example-4-2");
        const RatioProbeReport rep = r_regularity_probe(e42, {{2.0}, {1.0}}, {0.5, 0.25, 0.1},
                                                        600, Omega::DomPhi, 9);
        CHECK(rep.trend == Trend::Bounded);
    }
    SECTION("diverging at the rank-deficient center") {
        const BilevelModel e44 = builtin_model("example-4-4");
        const RatioProbeReport rep = r_regularity_probe(e44, {{0.0}, {0.0, 0.0}},
                                                        {0.5, 0.1, 0.02}, 600, Omega::DomPhi, 9);
        CHECK(rep.trend == Trend::Diverging);
    }
    SECTION("domain restriction vs full-space accounting of infeasible parameters") {
        // Lower level min{y | y <= x, y >= 2x+1}: feasible only for x <= -1.
        const BilevelModel model = parse_model(
            "[dims] n=1 m=1 q=2\n[upper] F = y1\n[lower.objective] c[1] = 1\n"
            "[lower.constraints]\nA[1] = -x1\nB[1][1] = 1\nA[2] = 2*x1 + 1\nB[2][1] = -1\n");
        const Point center{{-2.0}, {-3.0}};
        const auto dom = r_regularity_probe(model, center, {1.5}, 400, Omega::DomPhi, 9);
        const auto full = r_regularity_probe(model, center, {1.5}, 400, Omega::FullSpace, 9);
        CHECK(dom.per_radius[0].skipped_phi > 0);
        CHECK(dom.per_radius[0].hard_violations == 0);
        CHECK(full.per_radius[0].hard_violations > 0);
    }
}

TEST_CASE("constant rank check") {
    SECTION("holds at the calm global minimizer") {
        const BilevelModel m = builtin_model("example-4-3-center");
        const RankProfile p = constant_rank_check(m, *m.candidate, 0.5, 24, 9);
        CHECK(p.verdict == RankVerdict::ConstantRankHolds);
        for (const auto& r : p.subset_results) CHECK(r.constant);
    }
    SECTION("fails on the objective row of the rank-jump example") {
        const BilevelModel m = builtin_model("example-4-4");
        const RankProfile p = constant_rank_check(m, *m.candidate, 0.5, 24, 9);
        REQUIRE(p.verdict == RankVerdict::Violated);
        CHECK(p.violated_subset == std::vector<int>{1});
    }
    SECTION("constant coefficients always pass") {
        for (std::uint64_t seed : {4u, 5u, 6u}) {
            const BilevelModel m = builtin_model("fully-linear-random", seed);
            const RankProfile p = constant_rank_check(m, *m.candidate, 0.5, 16, 9);
            CHECK(p.verdict == RankVerdict::ConstantRankHolds);
        }
    }
    SECTION("row scaling does not change any verdict") {
        BilevelModel m = builtin_model("example-4-4");
        BilevelModel scaled = m;
        for (int i = 0; i < m.m; ++i)
            scaled.ll_B[1][static_cast<std::size_t>(i)] =
                scaled.ll_B[1][static_cast<std::size_t>(i)].scaled(5.0);
        scaled.ll_rhs[1] = scaled.ll_rhs[1].scaled(5.0);
        const RankProfile a = constant_rank_check(m, *m.candidate, 0.5, 24, 9);
        const RankProfile b = constant_rank_check(scaled, *scaled.candidate, 0.5, 24, 9);
        REQUIRE(a.subset_results.size() == b.subset_results.size());
        for (std::size_t i = 0; i < a.subset_results.size(); ++i)
            CHECK(a.subset_results[i].constant == b.subset_results[i].constant);
        CHECK(a.verdict == b.verdict);
    }
    SECTION("active-row cap guard") {
        std::string text = "[dims] n=1 m=1 q=13\n[upper] F = y1\n[lower.objective] c[1] = -1\n"
                           "[lower.constraints]\n";
        for (int j = 1; j <= 13; ++j)
            text += "A[" + std::to_string(j) + "] = 0\nB[" + std::to_string(j) + "][1] = 1\n";
        const BilevelModel m = parse_model(text);
        CHECK_THROWS_AS(constant_rank_check(m, {{0.0}, {0.0}}, 0.5, 4, 9), SubsetCapExceeded);
    }
}

TEST_CASE("inner semicontinuity probe") {
    Vec schedule;
    for (int k = 1; k <= 10; ++k) schedule.push_back(std::pow(0.5, k));
    SECTION("violated where the solution map snaps away") {
        const BilevelModel e42 = builtin_model("example-4-2");
        const IscReport rep = inner_semicontinuity_probe(e42, {{0.0}, {0.0}}, schedule, 4, 9);
        CHECK(rep.verdict == IscVerdict::Violated);
        // The relaxed optimality cut widens the face by tol.feas / t^2, which
        // at t = 2^-10 shaves about 1e-3 off the unit distance.
        CHECK(rep.per_t.back().sup_dist == Catch::Approx(1.0).margin(2e-3));
    }
    SECTION("consistent at the other bundled centers") {
        const BilevelModel e44 = builtin_model("example-4-4");
        CHECK(inner_semicontinuity_probe(e44, {{0.0}, {0.0, 0.0}}, schedule, 4, 9).verdict ==
              IscVerdict::Consistent);
        const BilevelModel e43 = builtin_model("example-4-3-center");
        CHECK(inner_semicontinuity_probe(e43, *e43.candidate, schedule, 4, 9).verdict ==
              IscVerdict::Consistent);
    }
}

TEST_CASE("dual witness magnitude never exceeds the certified modulus") {
    const BilevelModel model = parse_model(frozen_lower_text);
    const WsmCertificate cert = uwsm_modulus(model);
    Tolerances tol;
    Rng rng(77);
    for (int s = 0; s < 100; ++s) {
        const Vec x = {rng.uniform(-1.0, 1.0)};
        const Vec y = {rng.uniform(-2.0, 3.0)};
        const DistanceCertificate d = dist_to_solutions(model, x, y, tol);
        CHECK(std::fabs(d.xi3) <= cert.modulus_M + 1e-8);
    }
}

TEST_CASE("probe and falsifier verdicts stay mutually consistent") {
    // A bounded luwsmc ratio at a verified center together with a diverging
    // required penalty along a path through the sampled region would be
    // contradictory; assert the combination never occurs on bundled models.
    for (const char* name : {"example-4-2", "example-4-3-center", "example-4-4", "example-4-5"}) {
        const BilevelModel m = builtin_model(name);
        REQUIRE(m.candidate.has_value());
        const Point center = *m.candidate;
        RatioProbeReport probe;
        try {
            probe = luwsmc_probe(m, center, {0.5, 0.1, 0.02}, 400, 9);
        } catch (const AllSamplesSkipped&) {
            continue;
        }
        bool any_path_falsified = false;
        for (const auto& path : m.paths) {
            const CalmnessVerdict v = path_falsify(m, center, path, {1.0, 10.0});
            any_path_falsified |= v.verdict == Calmness::Falsified;
        }
        CHECK_FALSE((probe.trend == Trend::Bounded && any_path_falsified));
    }
}
