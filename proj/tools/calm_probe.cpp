// calm-probe: diagnostics for partial calmness of bilevel programs with
// parameter-dependent linear lower levels. Subcommands sweep the lower-level
// value function, falsify partial calmness at a candidate point, and collect
// certificate/probe evidence for the known sufficient conditions.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "calmprobe/builtins.hpp"
#include "calmprobe/certificates.hpp"
#include "calmprobe/falsifier.hpp"
#include "calmprobe/model.hpp"
#include "calmprobe/report.hpp"
#include "calmprobe/value_function.hpp"

namespace {

using namespace calmprobe;

struct RunConfig {
    std::string command;
    std::string model_path;
    std::string builtin;
    std::uint64_t seed = 1;
    bool seed_from_env = false;
    Vec radii = {0.5, 0.25, 0.1, 0.02};
    Vec kappa_grid = {1.0, 10.0, 100.0, 1000.0};
    long samples_per_radius = 2500;
    std::string out_path;
    std::vector<std::string> tol_overrides;
    Tolerances tol;
    // phi-sweep
    std::string box_spec;
    int grid_points = 101;
    // report
    std::string in_path;
};

Tolerances apply_tol_overrides(const std::vector<std::string>& overrides) {
    Tolerances tol;
    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--tol", "expected key=value, got '" + ov + "'");
        const std::string key = ov.substr(0, eq);
        double* slot = nullptr;
        if (key == "feas") slot = &tol.feas;
        else if (key == "dual") slot = &tol.dual;
        else if (key == "vertex") slot = &tol.vertex;
        else if (key == "rank") slot = &tol.rank;
        else if (key == "pivot") slot = &tol.pivot;
        else throw CLI::ValidationError("--tol", "unknown tolerance '" + key + "'");
        try {
            *slot = std::stod(ov.substr(eq + 1));
        } catch (const std::exception&) {
            throw CLI::ValidationError("--tol", "malformed value in '" + ov + "'");
        }
    }
    return tol;
}

BilevelModel load_model(const RunConfig& cfg) {
    if (!cfg.builtin.empty()) return builtin_model(cfg.builtin, cfg.seed);
    return parse_model(read_text_file(cfg.model_path));
}

void echo_config(ReportWriter& w, const RunConfig& cfg, const BilevelModel& model) {
    w.section("config");
    w.kv("command", cfg.command);
    w.kv("model", cfg.builtin.empty() ? cfg.model_path : "builtin:" + cfg.builtin);
    w.kv("seed", static_cast<long>(cfg.seed));
    w.kv("radii", cfg.radii);
    w.kv("kappa_grid", cfg.kappa_grid);
    w.kv("samples_per_radius", cfg.samples_per_radius);
    w.kv("tol.feas", cfg.tol.feas);
    w.kv("tol.dual", cfg.tol.dual);
    w.kv("tol.vertex", cfg.tol.vertex);
    w.kv("tol.rank", cfg.tol.rank);
    w.kv("tol.pivot", cfg.tol.pivot);
    w.section("model");
    w.kv("n", model.n);
    w.kv("m", model.m);
    w.kv("q", model.q);
    w.kv("form", to_string(model.form_tag));
    w.kv("F", model.F.to_string());
    if (model.candidate) {
        w.kv("candidate.x", model.candidate->x);
        w.kv("candidate.y", model.candidate->y);
    }
    w.kv("paths", static_cast<long>(model.paths.size()));
}

int emit(const RunConfig& cfg, const ReportWriter& w) {
    std::fputs(w.text().c_str(), stdout);
    if (!cfg.out_path.empty()) write_text_file(cfg.out_path, w.text());
    return 0;
}

/// Per-dimension "lo:hi" list; a degenerate lo = hi pins the coordinate.
std::vector<std::pair<double, double>> parse_box(const std::string& spec, int n) {
    std::vector<std::pair<double, double>> box;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos)
            throw CLI::ValidationError("--box", "expected lo:hi, got '" + part + "'");
        auto bound = [&](const std::string& s) {
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(s, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != s.size() || s.empty())
                throw CLI::ValidationError("--box", "malformed bound in '" + part + "'");
            return v;
        };
        box.emplace_back(bound(part.substr(0, colon)), bound(part.substr(colon + 1)));
    }
    if (static_cast<int>(box.size()) != n)
        throw CLI::ValidationError("--box", "expected " + std::to_string(n) + " ranges");
    for (const auto& [lo, hi] : box)
        if (lo > hi) throw CLI::ValidationError("--box", "lo > hi");
    return box;
}

int cmd_phi_sweep(const RunConfig& cfg) {
    const BilevelModel model = load_model(cfg);
    const auto box = parse_box(cfg.box_spec, model.n);
    if (cfg.grid_points < 1) throw CLI::ValidationError("--points", "need at least 1");

    ReportWriter w;
    echo_config(w, cfg, model);
    w.section("phi-sweep");
    w.kv("box", cfg.box_spec);
    w.kv("points_per_dim", cfg.grid_points);
    w.table("phi", {"x", "status", "value"});
    std::vector<int> idx(static_cast<std::size_t>(model.n), 0);
    while (true) {
        Vec x(model.n);
        for (int j = 0; j < model.n; ++j) {
            const auto [lo, hi] = box[static_cast<std::size_t>(j)];
            x[j] = cfg.grid_points == 1
                       ? lo
                       : lo + (hi - lo) * idx[static_cast<std::size_t>(j)] / (cfg.grid_points - 1);
        }
        const PhiValue pv = phi(model, x, cfg.tol);
        w.row({"\"" + fmt_vec(x) + "\"", to_string(pv.status),
               pv.finite() ? fmt_double(pv.value) : ""});
        int j = 0;
        for (; j < model.n; ++j) {
            if (++idx[static_cast<std::size_t>(j)] < cfg.grid_points) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
        if (j == model.n) break;
    }
    w.end_table();
    return emit(cfg, w);
}

int cmd_falsify(const RunConfig& cfg) {
    const BilevelModel model = load_model(cfg);
    if (!model.candidate) {
        std::fprintf(stderr, "falsify: the model declares no candidate point\n");
        return 1;
    }
    const Point center = *model.candidate;

    ReportWriter w;
    echo_config(w, cfg, model);

    const VerifyCenterResult vc = verify_center(model, center, 0.25, 400, cfg.seed, cfg.tol);
    w.section("verify-center");
    w.kv("ok", vc.ok ? "true" : "false");
    if (!vc.ok) {
        w.kv("reason", vc.reason);
        w.section("verdict");
        w.kv("calmness", to_string(Calmness::CenterRejected));
        emit(cfg, w);
        return 3;
    }

    bool falsified = false;
    const CalmnessVerdict sweep = required_kappa_sweep(model, center, cfg.radii,
                                                       cfg.samples_per_radius, cfg.seed, cfg.tol);
    write_report_sections(w, sweep, "kappa-sweep");
    falsified |= sweep.verdict == Calmness::Falsified;

    for (std::size_t p = 0; p < model.paths.size(); ++p) {
        const CalmnessVerdict pv =
            path_falsify(model, center, model.paths[p], cfg.kappa_grid, cfg.tol);
        write_report_sections(w, pv, "path-" + std::to_string(p + 1));
        falsified |= pv.verdict == Calmness::Falsified;
    }

    w.section("verdict");
    w.kv("calmness", to_string(falsified ? Calmness::Falsified : Calmness::NotFalsified));
    emit(cfg, w);
    return falsified ? 2 : 0;
}

int cmd_certify(const RunConfig& cfg) {
    const BilevelModel model = load_model(cfg);
    ReportWriter w;
    echo_config(w, cfg, model);

    // Center for the sweeps/probes: declared candidate, else the reference
    // parameter with its lower-level argmin.
    std::optional<Point> center = model.candidate;
    if (!center) {
        const Vec x0(model.n, 0.0);
        const LpOutcome out = solve_lp(lower_level_lp(model, x0), cfg.tol);
        if (out.status == LpStatus::Optimal) center = Point{x0, out.primal_point};
    }

    try {
        const WsmCertificate cert = uwsm_modulus(model, cfg.tol);
        write_report_sections(w, cert);
    } catch (const FormNotSupported&) {
        w.section("uwsm-notice");
        w.kv("notice", "coefficients depend on x; falling back to a per-parameter modulus sweep");
        if (center) {
            std::vector<Vec> xs;
            Rng rng(cfg.seed);
            xs.push_back(center->x);
            const double r = cfg.radii.empty() ? 0.5 : cfg.radii.front();
            for (int s = 0; s < 16; ++s) xs.push_back(sample_ball(rng, center->x, r));
            write_report_sections(w, uwsm_modulus_sweep(model, xs, cfg.tol));
        }
    }

    if (!center) {
        w.section("notice");
        w.kv("notice", "no candidate and no lower-level optimum at the reference parameter; "
                       "probes skipped");
        return emit(cfg, w);
    }

    try {
        try {
            write_report_sections(w,
                                  luwsmc_probe(model, *center, cfg.radii,
                                               cfg.samples_per_radius, cfg.seed, cfg.tol),
                                  "luwsmc");
        } catch (const AllSamplesSkipped& e) {
            w.section("luwsmc");
            w.kv("notice", e.what());
        }
        try {
            write_report_sections(w,
                                  r_regularity_probe(model, *center, cfg.radii,
                                                     cfg.samples_per_radius, Omega::DomPhi,
                                                     cfg.seed, cfg.tol),
                                  "r-regularity");
        } catch (const AllSamplesSkipped& e) {
            w.section("r-regularity");
            w.kv("notice", e.what());
        }
        const double rank_radius = cfg.radii.empty() ? 0.5 : cfg.radii.front();
        write_report_sections(
            w, constant_rank_check(model, *center, rank_radius, 32, cfg.seed, cfg.tol));
        Vec t_schedule;
        for (int k = 1; k <= 10; ++k) t_schedule.push_back(std::pow(0.5, k));
        write_report_sections(
            w, inner_semicontinuity_probe(model, *center, t_schedule, 8, cfg.seed, cfg.tol));
    } catch (const CenterNotOptimal& e) {
        w.section("verdict");
        w.kv("calmness", to_string(Calmness::CenterRejected));
        w.kv("reason", e.what());
        emit(cfg, w);
        return 3;
    }
    return emit(cfg, w);
}

int cmd_report(const RunConfig& cfg) {
    const std::string text = read_text_file(cfg.in_path);
    const ParsedReport parsed = parse_report(text);
    std::fputs(parsed.text.c_str(), stdout);
    if (!cfg.out_path.empty()) write_text_file(cfg.out_path, parsed.text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    if (const char* env_seed = std::getenv("CALM_PROBE_SEED")) {
        try {
            cfg.seed = std::stoull(env_seed);
        } catch (const std::exception&) {
            std::fprintf(stderr, "calm-probe: malformed CALM_PROBE_SEED '%s'\n", env_seed);
            return 1;
        }
    }

    CLI::App app{"partial-calmness diagnostics for linear-lower-level bilevel programs"};
    app.require_subcommand(1);

    std::string radii_spec, kappa_spec;
    auto add_common = [&](CLI::App* sub, bool needs_model) {
        auto* model_opt = sub->add_option("--model", cfg.model_path, "model file path");
        auto* builtin_opt =
            sub->add_option("--builtin", cfg.builtin, "bundled model name")
                ->check(CLI::IsMember(builtin_names()));
        model_opt->excludes(builtin_opt);
        if (needs_model) {
            // exactly one source
            sub->callback([model_opt, builtin_opt] {
                if (model_opt->count() + builtin_opt->count() != 1)
                    throw CLI::RequiredError("exactly one of --model/--builtin");
            });
        }
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--radii", radii_spec, "comma-separated radius schedule");
        sub->add_option("--kappa-grid", kappa_spec, "comma-separated penalty grid");
        sub->add_option("--samples", cfg.samples_per_radius, "samples per radius");
        sub->add_option("--out", cfg.out_path, "also write the report to this file");
        sub->add_option("--tol", cfg.tol_overrides, "tolerance override key=val")
            ->allow_extra_args(false);
    };

    auto* sweep = app.add_subcommand("phi-sweep", "tabulate the lower-level value function");
    add_common(sweep, true);
    sweep->add_option("--box", cfg.box_spec, "per-dimension lo:hi ranges")->required();
    sweep->add_option("--points", cfg.grid_points, "grid points per dimension");

    auto* falsify = app.add_subcommand("falsify", "test partial calmness at the candidate");
    add_common(falsify, true);

    auto* certify = app.add_subcommand("certify", "collect sufficient-condition evidence");
    add_common(certify, true);

    auto* report = app.add_subcommand("report", "re-render a stored report");
    report->add_option("--in", cfg.in_path, "stored report file")->required();
    report->add_option("--out", cfg.out_path, "also write the rendering to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const auto parse_csv = [](const std::string& spec) {
        Vec out;
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
        return out;
    };

    const auto t0 = std::chrono::steady_clock::now();
    int rc = 1;
    try {
        if (!radii_spec.empty()) cfg.radii = parse_csv(radii_spec);
        if (!kappa_spec.empty()) cfg.kappa_grid = parse_csv(kappa_spec);
        cfg.tol = apply_tol_overrides(cfg.tol_overrides);
        if (sweep->parsed()) { cfg.command = "phi-sweep"; rc = cmd_phi_sweep(cfg); }
        else if (falsify->parsed()) { cfg.command = "falsify"; rc = cmd_falsify(cfg); }
        else if (certify->parsed()) { cfg.command = "certify"; rc = cmd_certify(cfg); }
        else if (report->parsed()) { cfg.command = "report"; rc = cmd_report(cfg); }
    } catch (const CLI::Error& e) {
        std::fprintf(stderr, "calm-probe: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "calm-probe: %s\n", e.what());
        return 1;
    }
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    // Timing stays on stderr: report bytes must depend only on the run config.
    std::fprintf(stderr, "calm-probe: %s finished in %lld ms\n", cfg.command.c_str(),
                 static_cast<long long>(elapsed.count()));
    return rc;
}
