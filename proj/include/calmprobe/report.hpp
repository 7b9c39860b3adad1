#pragma once

// Structured report text: key-value lines grouped in sections plus embedded
// CSV tables. Every report opens with a config echo so a stored file is
// reproducible byte for byte, and the format round-trips through
// parse_report / render_report.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "calmprobe/certificates.hpp"
#include "calmprobe/errors.hpp"
#include "calmprobe/falsifier.hpp"
#include "calmprobe/matrix.hpp"
#include "calmprobe/value_function.hpp"

namespace calmprobe {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_vec(const Vec& v) {
    std::string out = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += fmt_double(v[i]);
    }
    return out + ")";
}

/// Accumulates report text; sections hold "key = value" lines, tables hold
/// CSV rows terminated by "[end]".
class ReportWriter {
public:
    ReportWriter() { text_ = "calm-probe report v1\n"; }

    void section(const std::string& name) { text_ += "[section " + name + "]\n"; }

    void kv(const std::string& key, const std::string& value) {
        text_ += key + " = " + value + "\n";
    }
    void kv(const std::string& key, double value) { kv(key, fmt_double(value)); }
    void kv(const std::string& key, long value) { kv(key, std::to_string(value)); }
    void kv(const std::string& key, int value) { kv(key, std::to_string(value)); }
    void kv(const std::string& key, const Vec& value) { kv(key, fmt_vec(value)); }

    void table(const std::string& name, const std::vector<std::string>& columns) {
        text_ += "[table " + name + "]\n";
        for (std::size_t i = 0; i < columns.size(); ++i)
            text_ += (i ? "," : "") + columns[i];
        text_ += "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            text_ += (i ? "," : "") + cells[i];
        text_ += "\n";
    }
    void end_table() { text_ += "[end]\n"; }

    const std::string& text() const { return text_; }

private:
    std::string text_;
};

struct ReportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParsedReport {
    std::vector<std::string> sections;
    std::vector<std::string> tables;
    std::string text;
};

/// Validates the report structure; throws ReportError when the header is
/// missing, a table is unterminated, or a line fits no grammar rule.
inline ParsedReport parse_report(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "calm-probe report v1")
        throw ReportError("not a calm-probe report (bad header)");
    ParsedReport parsed;
    parsed.text = text;
    bool in_table = false;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (in_table) {
            if (line == "[end]") in_table = false;
            continue; // CSV payload
        }
        if (line.empty()) continue;
        if (line.rfind("[section ", 0) == 0 && line.back() == ']') {
            parsed.sections.push_back(line.substr(9, line.size() - 10));
            continue;
        }
        if (line.rfind("[table ", 0) == 0 && line.back() == ']') {
            parsed.tables.push_back(line.substr(7, line.size() - 8));
            in_table = true;
            continue;
        }
        if (line.find(" = ") != std::string::npos) continue;
        throw ReportError("malformed report line " + std::to_string(line_no) + ": " + line);
    }
    if (in_table) throw ReportError("unterminated table");
    return parsed;
}

inline void write_report_sections(ReportWriter& w, const RatioProbeReport& r,
                                  const std::string& name) {
    w.section(name);
    w.kv("center.x", r.center.x);
    w.kv("center.y", r.center.y);
    w.kv("trend", to_string(r.trend));
    w.table(name, {"radius", "samples", "worst_ratio", "alpha_estimate", "skipped_phi",
                   "skipped_zero", "hard_violations"});
    for (const auto& s : r.per_radius)
        w.row({fmt_double(s.radius), std::to_string(s.sample_count), fmt_double(s.worst_ratio),
               fmt_double(s.alpha_estimate), std::to_string(s.skipped_phi),
               std::to_string(s.skipped_zero), std::to_string(s.hard_violations)});
    w.end_table();
}

inline void write_report_sections(ReportWriter& w, const WsmCertificate& c) {
    w.section("uwsm");
    w.kv("modulus_M", c.modulus_M);
    w.kv("vertex_count", static_cast<long>(c.witness_vertices.vertices.size()));
    w.kv("modulus_growth_flagged", c.modulus_growth_flagged ? "true" : "false");
    if (!c.per_x_moduli.empty()) {
        w.table("per_x_moduli", {"x", "M"});
        for (const auto& [x, m] : c.per_x_moduli)
            w.row({"\"" + fmt_vec(x) + "\"", fmt_double(m)});
        w.end_table();
    }
}

inline void write_report_sections(ReportWriter& w, const RankProfile& p) {
    w.section("constant-rank");
    w.kv("verdict", to_string(p.verdict));
    std::string active;
    for (std::size_t i = 0; i < p.active_set.size(); ++i)
        active += (i ? "," : "") + std::to_string(p.active_set[i] + 1);
    w.kv("active_rows", "{" + active + "}");
    if (p.verdict == RankVerdict::Violated) {
        std::string j;
        for (std::size_t i = 0; i < p.violated_subset.size(); ++i)
            j += (i ? "," : "") + std::to_string(p.violated_subset[i]);
        w.kv("violated_subset", "{" + j + "}");
        w.kv("witness_x_a", p.witness_x_a);
        w.kv("witness_x_b", p.witness_x_b);
    }
    w.table("rank_subsets", {"subset", "ranks_seen", "constant"});
    for (const auto& r : p.subset_results) {
        std::string j, ranks;
        for (std::size_t i = 0; i < r.subset.size(); ++i)
            j += (i ? ";" : "") + std::to_string(r.subset[i]);
        for (std::size_t i = 0; i < r.ranks_seen.size(); ++i)
            ranks += (i ? ";" : "") + std::to_string(r.ranks_seen[i]);
        w.row({"{" + j + "}", "{" + ranks + "}", r.constant ? "true" : "false"});
    }
    w.end_table();
}

inline void write_report_sections(ReportWriter& w, const IscReport& r) {
    w.section("inner-semicontinuity");
    w.kv("verdict", to_string(r.verdict));
    w.kv("direction_count", static_cast<long>(r.directions.size()));
    if (r.verdict == IscVerdict::Violated) w.kv("witness_direction", r.witness_direction);
    w.table("isc_steps", {"t", "sup_dist", "skipped_phi"});
    for (const auto& s : r.per_t)
        w.row({fmt_double(s.t), fmt_double(s.sup_dist), std::to_string(s.skipped_phi)});
    w.end_table();
}

inline void write_report_sections(ReportWriter& w, const CalmnessVerdict& v,
                                  const std::string& name) {
    w.section(name);
    w.kv("center.x", v.center.x);
    w.kv("center.y", v.center.y);
    w.kv("verdict", to_string(v.verdict));
    w.kv("kappa_hat", v.kappa_hat);
    w.kv("total_samples", v.total_samples);
    if (!v.per_radius.empty()) {
        w.table(name + "_radii",
                {"radius", "accepted", "sup_required_kappa", "sup_infinite", "skipped_phi"});
        for (const auto& s : v.per_radius)
            w.row({fmt_double(s.radius), std::to_string(s.accepted),
                   fmt_double(s.sup_required_kappa), s.sup_infinite ? "true" : "false",
                   std::to_string(s.skipped_phi)});
        w.end_table();
    }
    if (!v.witness_trace.empty() && v.witness_path) {
        std::vector<std::string> cols = {"t", "F", "u", "required_kappa", "infeasible"};
        for (double kappa : v.kappa_grid) cols.push_back("penalized_k" + fmt_double(kappa));
        w.table(name + "_trace", cols);
        for (const auto& row : v.witness_trace) {
            std::vector<std::string> cells = {
                fmt_double(row.t), fmt_double(row.f_upper), fmt_double(row.u),
                row.kappa_infinite ? "inf" : fmt_double(row.required_kappa),
                row.infeasible ? "true" : "false"};
            for (std::size_t k = 0; k < v.kappa_grid.size(); ++k)
                cells.push_back(row.infeasible ? "" : fmt_double(row.penalized[k]));
            w.row(cells);
        }
        w.end_table();
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ReportError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ReportError("cannot write '" + path + "'");
    out << text;
}

} // namespace calmprobe
