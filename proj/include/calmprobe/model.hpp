#pragma once

// Bilevel model data structure and the section-based model-file format.
//
//   [dims] n=1 m=1 q=2
//   [upper] F = -x1 + y1
//   X: x1 - 2 <= 0
//   [lower.objective] c[1] = -x1^2
//   [lower.constraints] A[1] = 0
//   B[1][1] = -1
//   [candidate] x = (0), y = (0)
//   [path] x[1](t) = t
//   y[1](t) = 0
//   t = (0.5, 0.25)
//
// The lower level is min_y { c(x).y | A(x) + B(x) y <= 0 }; all data entries
// are polynomials in x1..xn, the upper objective F is a polynomial in x and y,
// upper constraints describe X via polynomials in x with <= 0 or = 0.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "calmprobe/config.hpp"
#include "calmprobe/errors.hpp"
#include "calmprobe/lp.hpp"
#include "calmprobe/poly.hpp"

namespace calmprobe {

enum class FormTag { LinearInY, RhsPerturbed, ObjectivePerturbed, FullyLinear };

inline const char* to_string(FormTag f) {
    switch (f) {
        case FormTag::LinearInY: return "LinearInY";
        case FormTag::RhsPerturbed: return "RhsPerturbed";
        case FormTag::ObjectivePerturbed: return "ObjectivePerturbed";
        case FormTag::FullyLinear: return "FullyLinear";
    }
    return "?";
}

enum class Relation { LessEqual, Equal };

struct UpperConstraint {
    Poly expr;
    Relation rel;
};

struct Point {
    Vec x;
    Vec y;
};

struct ParametricPath {
    std::vector<Poly> x_path; // n polynomials in t
    std::vector<Poly> y_path; // m polynomials in t
    Vec t_schedule;           // strictly decreasing, positive

    static Vec default_schedule() {
        Vec s;
        double t = 0.5;
        for (int k = 1; k <= 20; ++k, t *= 0.5) s.push_back(t);
        return s;
    }
};

inline Point eval_path(const ParametricPath& path, double t) {
    Point p;
    for (const Poly& px : path.x_path) p.x.push_back(px.eval_t(t));
    for (const Poly& py : path.y_path) p.y.push_back(py.eval_t(t));
    return p;
}

struct BilevelModel {
    int n = 0, m = 0, q = 0;
    Poly F;
    std::vector<UpperConstraint> upper_constraints;
    std::vector<Poly> ll_objective;          // c(x), m entries
    std::vector<Poly> ll_rhs;                // A(x), q entries
    std::vector<std::vector<Poly>> ll_B;     // B(x), q rows of m entries
    FormTag form_tag = FormTag::LinearInY;
    std::optional<Point> candidate;
    std::vector<ParametricPath> paths;
};

struct Instantiated {
    Vec c; // length m
    Vec A; // length q
    Mat B; // q x m
};

inline Instantiated instantiate(const BilevelModel& model, const Vec& x) {
    if (static_cast<int>(x.size()) != model.n)
        throw DimensionMismatch("instantiate: x length");
    Instantiated out;
    out.c.resize(model.m);
    out.A.resize(model.q);
    out.B = Mat(model.q, model.m);
    for (int i = 0; i < model.m; ++i) out.c[i] = model.ll_objective[i].eval_x(x);
    for (int j = 0; j < model.q; ++j) {
        out.A[j] = model.ll_rhs[j].eval_x(x);
        for (int i = 0; i < model.m; ++i) out.B(j, i) = model.ll_B[j][i].eval_x(x);
    }
    return out;
}

inline bool upper_feasible(const BilevelModel& model, const Vec& x, double tol) {
    if (static_cast<int>(x.size()) != model.n)
        throw DimensionMismatch("upper_feasible: x length");
    for (const auto& c : model.upper_constraints) {
        const double v = c.expr.eval_x(x);
        if (c.rel == Relation::LessEqual ? v > tol : std::fabs(v) > tol) return false;
    }
    return true;
}

inline double eval_F(const BilevelModel& model, const Point& p) {
    if (static_cast<int>(p.x.size()) != model.n || static_cast<int>(p.y.size()) != model.m)
        throw DimensionMismatch("eval_F: point dimensions");
    return model.F.eval(p.x, p.y);
}

/// Lower-level objective f(x,y) = c(x).y.
inline double eval_f(const BilevelModel& model, const Vec& x, const Vec& y) {
    const Instantiated inst = instantiate(model, x);
    return dot(inst.c, y);
}

/// Lower-level constraint values g(x,y) = A(x) + B(x) y.
inline Vec eval_g(const BilevelModel& model, const Vec& x, const Vec& y) {
    const Instantiated inst = instantiate(model, x);
    Vec g = mat_vec(inst.B, y);
    for (int j = 0; j < model.q; ++j) g[j] += inst.A[j];
    return g;
}

inline bool lower_feasible(const BilevelModel& model, const Vec& x, const Vec& y, double tol) {
    const Vec g = eval_g(model, x, y);
    for (double v : g)
        if (v > tol) return false;
    return true;
}

/// Gamma(x) = {y | B(x) y <= -A(x)} as a Polyhedron over y.
inline Polyhedron lower_feasible_region(const BilevelModel& model, const Vec& x) {
    const Instantiated inst = instantiate(model, x);
    Polyhedron poly;
    poly.eq_matrix = Mat(0, model.m);
    poly.ineq_matrix = inst.B;
    poly.ineq_rhs.resize(model.q);
    for (int j = 0; j < model.q; ++j) poly.ineq_rhs[j] = -inst.A[j];
    poly.signs.assign(model.m, Sign::Free);
    return poly;
}

inline LpProblem lower_level_lp(const BilevelModel& model, const Vec& x) {
    LpProblem lp;
    lp.objective = instantiate(model, x).c;
    lp.sense = Sense::Minimize;
    lp.region = lower_feasible_region(model, x);
    return lp;
}

namespace detail {

inline FormTag classify_form(const BilevelModel& model) {
    bool c_const = true, c_affine = true, a_const = true, a_affine = true, b_const = true;
    for (const Poly& p : model.ll_objective) {
        if (p.depends_on(Var::Kind::X)) c_const = false;
        if (p.degree_in(Var::Kind::X) > 1) c_affine = false;
    }
    for (const Poly& p : model.ll_rhs) {
        if (p.depends_on(Var::Kind::X)) a_const = false;
        if (p.degree_in(Var::Kind::X) > 1) a_affine = false;
    }
    for (const auto& row : model.ll_B)
        for (const Poly& p : row)
            if (p.depends_on(Var::Kind::X)) b_const = false;
    // Fully linear: the lower level is a linear program in (x, y) jointly,
    // i.e. fixed objective and matrix with an at-most-affine right-hand side.
    if (c_const && b_const && a_affine) return FormTag::FullyLinear;
    if (c_const && b_const) return FormTag::RhsPerturbed;
    if (c_affine && a_const && b_const) return FormTag::ObjectivePerturbed;
    return FormTag::LinearInY;
}

inline std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

/// "(1, 2.5, -3)" -> {1, 2.5, -3}
inline Vec parse_tuple(const std::string& s, int line) {
    std::string t = trim(s);
    if (t.size() < 2 || t.front() != '(' || t.back() != ')')
        throw SyntaxError("expected parenthesized tuple", line, 1);
    Vec out;
    std::string inner = t.substr(1, t.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw SyntaxError("empty tuple entry", line, 1);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw SyntaxError("malformed number '" + item + "'", line, 1);
        }
    }
    return out;
}

} // namespace detail

inline BilevelModel parse_model(std::string_view text) {
    BilevelModel model;
    bool have_dims = false;
    std::vector<bool> c_set, a_set;
    std::vector<std::vector<bool>> b_set;
    std::optional<Vec> cand_x, cand_y;
    ParametricPath* cur_path = nullptr;
    std::string section;

    PolyContext x_ctx, xy_ctx, t_ctx;
    auto refresh_ctx = [&] {
        x_ctx = {true, model.n, false, 0, false};
        xy_ctx = {true, model.n, true, model.m, false};
        t_ctx = {false, 0, false, 0, true};
    };

    std::istringstream stream{std::string(text)};
    std::string raw;
    int line_no = 0;
    auto handle_line = [&](std::string line, int line_num) {
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') return;

        if (section == "dims") {
            std::stringstream ss(line);
            std::string tok;
            while (ss >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos)
                    throw SyntaxError("expected key=value in [dims]", line_num, 1);
                const std::string key = tok.substr(0, eq);
                int val = 0;
                try { val = std::stoi(tok.substr(eq + 1)); }
                catch (const std::exception&) {
                    throw SyntaxError("malformed dimension value", line_num, 1);
                }
                if (key == "n") model.n = val;
                else if (key == "m") model.m = val;
                else if (key == "q") model.q = val;
                else throw SyntaxError("unknown dimension '" + key + "'", line_num, 1);
            }
            if (model.n < 0 || model.m < 1)
                throw DimensionError("dimensions must satisfy n >= 0, m >= 1");
            if (model.q < 1)
                throw DimensionError("q must be at least 1 (empty lower-level constraint block)");
            have_dims = true;
            model.ll_objective.assign(model.m, Poly{});
            model.ll_rhs.assign(model.q, Poly{});
            model.ll_B.assign(model.q, std::vector<Poly>(model.m));
            c_set.assign(model.m, false);
            a_set.assign(model.q, false);
            b_set.assign(model.q, std::vector<bool>(model.m, false));
            refresh_ctx();
            return;
        }
        if (!have_dims) throw SyntaxError("[dims] must come first", line_num, 1);

        auto expect_eq_split = [&](const std::string& s) -> std::pair<std::string, std::string> {
            auto eq = s.find('=');
            if (eq == std::string::npos) throw SyntaxError("expected '='", line_num, 1);
            return {detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1))};
        };

        if (section == "upper") {
            if (line.rfind("F", 0) == 0) {
                auto [lhs, rhs] = expect_eq_split(line);
                if (lhs != "F") throw SyntaxError("expected 'F = <poly>'", line_num, 1);
                model.F = parse_poly(rhs, xy_ctx, line_num);
                return;
            }
            if (line.rfind("X:", 0) == 0) {
                std::string body = detail::trim(line.substr(2));
                Relation rel;
                std::string expr;
                auto le = body.rfind("<=");
                if (le != std::string::npos && detail::trim(body.substr(le + 2)) == "0") {
                    rel = Relation::LessEqual;
                    expr = body.substr(0, le);
                } else {
                    auto eq = body.rfind('=');
                    if (eq == std::string::npos || detail::trim(body.substr(eq + 1)) != "0")
                        throw SyntaxError("upper constraint must end with '<= 0' or '= 0'",
                                          line_num, 1);
                    rel = Relation::Equal;
                    expr = body.substr(0, eq);
                }
                model.upper_constraints.push_back({parse_poly(expr, x_ctx, line_num), rel});
                return;
            }
            throw SyntaxError("unexpected line in [upper]", line_num, 1);
        }

        auto parse_index = [&](const std::string& s, std::size_t& pos, int limit,
                               const char* what) -> int {
            if (pos >= s.size() || s[pos] != '[')
                throw SyntaxError(std::string("expected '[' after ") + what, line_num, 1);
            auto close = s.find(']', pos);
            if (close == std::string::npos) throw SyntaxError("expected ']'", line_num, 1);
            int idx = 0;
            try { idx = std::stoi(s.substr(pos + 1, close - pos - 1)); }
            catch (const std::exception&) {
                throw SyntaxError("malformed index", line_num, 1);
            }
            pos = close + 1;
            if (idx < 1 || idx > limit)
                throw DimensionError(std::string(what) + " index " + std::to_string(idx) +
                                     " out of range (line " + std::to_string(line_num) + ")");
            return idx - 1;
        };

        if (section == "lower.objective") {
            auto [lhs, rhs] = expect_eq_split(line);
            if (lhs.rfind("c", 0) != 0) throw SyntaxError("expected 'c[i] = <poly>'", line_num, 1);
            std::size_t pos = 1;
            const int i = parse_index(lhs, pos, model.m, "c");
            model.ll_objective[i] = parse_poly(rhs, x_ctx, line_num);
            c_set[i] = true;
            return;
        }

        if (section == "lower.constraints") {
            auto [lhs, rhs] = expect_eq_split(line);
            if (lhs.rfind("A", 0) == 0) {
                std::size_t pos = 1;
                const int j = parse_index(lhs, pos, model.q, "A");
                model.ll_rhs[j] = parse_poly(rhs, x_ctx, line_num);
                a_set[j] = true;
                return;
            }
            if (lhs.rfind("B", 0) == 0) {
                std::size_t pos = 1;
                const int j = parse_index(lhs, pos, model.q, "B");
                const int i = parse_index(lhs, pos, model.m, "B");
                model.ll_B[j][i] = parse_poly(rhs, x_ctx, line_num);
                b_set[j][i] = true;
                return;
            }
            throw SyntaxError("expected 'A[j] = ...' or 'B[j][i] = ...'", line_num, 1);
        }

        if (section == "candidate") {
            // "x = (...), y = (...)" on one line, or separate lines
            std::size_t split = std::string::npos;
            int depth = 0;
            for (std::size_t k = 0; k < line.size(); ++k) {
                if (line[k] == '(') ++depth;
                else if (line[k] == ')') --depth;
                else if (line[k] == ',' && depth == 0) { split = k; break; }
            }
            std::vector<std::string> parts;
            if (split == std::string::npos) parts.push_back(line);
            else {
                parts.push_back(detail::trim(line.substr(0, split)));
                parts.push_back(detail::trim(line.substr(split + 1)));
            }
            for (const std::string& part : parts) {
                auto [lhs, rhs] = expect_eq_split(part);
                if (lhs == "x") cand_x = detail::parse_tuple(rhs, line_num);
                else if (lhs == "y") cand_y = detail::parse_tuple(rhs, line_num);
                else throw SyntaxError("expected 'x = (...)' or 'y = (...)'", line_num, 1);
            }
            return;
        }

        if (section == "path") {
            auto [lhs, rhs] = expect_eq_split(line);
            if (lhs == "t") {
                cur_path->t_schedule = detail::parse_tuple(rhs, line_num);
                return;
            }
            const bool is_x = lhs.rfind("x", 0) == 0;
            const bool is_y = lhs.rfind("y", 0) == 0;
            if (!is_x && !is_y)
                throw SyntaxError("expected 'x[i](t) = ...', 'y[i](t) = ...' or 't = (...)'",
                                  line_num, 1);
            std::size_t pos = 1;
            const int idx = parse_index(lhs, pos, is_x ? model.n : model.m, is_x ? "x" : "y");
            if (detail::trim(lhs.substr(pos)) != "(t)")
                throw SyntaxError("expected '(t)' after path component", line_num, 1);
            auto& comp = is_x ? cur_path->x_path : cur_path->y_path;
            if (static_cast<int>(comp.size()) <= idx) comp.resize(idx + 1);
            comp[idx] = parse_poly(rhs, t_ctx, line_num);
            return;
        }

        throw SyntaxError("content before any section header", line_num, 1);
    };

    while (std::getline(stream, raw)) {
        ++line_no;
        std::string line = detail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == '[') {
            auto close = line.find(']');
            if (close == std::string::npos) throw SyntaxError("expected ']'", line_no, 1);
            section = line.substr(1, close - 1);
            if (section != "dims" && section != "upper" && section != "lower.objective" &&
                section != "lower.constraints" && section != "candidate" && section != "path")
                throw SyntaxError("unknown section [" + section + "]", line_no, 1);
            if (section == "path") {
                model.paths.emplace_back();
                cur_path = &model.paths.back();
            }
            std::string rest = detail::trim(line.substr(close + 1));
            if (!rest.empty()) handle_line(rest, line_no);
            continue;
        }
        handle_line(line, line_no);
    }

    if (!have_dims) throw SyntaxError("missing [dims] section", 1, 1);
    for (int i = 0; i < model.m; ++i)
        if (!c_set[i])
            throw DimensionError("missing lower-level objective entry c[" +
                                 std::to_string(i + 1) + "]");

    if (cand_x || cand_y) {
        if (!cand_x || !cand_y) throw DimensionError("candidate needs both x and y");
        if (static_cast<int>(cand_x->size()) != model.n ||
            static_cast<int>(cand_y->size()) != model.m)
            throw DimensionError("candidate dimensions do not match the model");
        model.candidate = Point{*cand_x, *cand_y};
    }

    for (auto& path : model.paths) {
        path.x_path.resize(model.n);
        path.y_path.resize(model.m);
        if (path.t_schedule.empty()) path.t_schedule = ParametricPath::default_schedule();
        for (std::size_t k = 0; k < path.t_schedule.size(); ++k) {
            if (path.t_schedule[k] <= 0.0)
                throw DimensionError("path schedule entries must be positive");
            if (k > 0 && path.t_schedule[k] >= path.t_schedule[k - 1])
                throw DimensionError("path schedule must be strictly decreasing");
        }
    }

    model.form_tag = detail::classify_form(model);
    return model;
}

inline std::string serialize_model(const BilevelModel& model) {
    std::ostringstream out;
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "[dims] n=" << model.n << " m=" << model.m << " q=" << model.q << "\n";
    out << "[upper] F = " << model.F.to_string() << "\n";
    for (const auto& c : model.upper_constraints)
        out << "X: " << c.expr.to_string() << (c.rel == Relation::LessEqual ? " <= 0" : " = 0")
            << "\n";
    out << "[lower.objective]\n";
    for (int i = 0; i < model.m; ++i)
        out << "c[" << i + 1 << "] = " << model.ll_objective[i].to_string() << "\n";
    out << "[lower.constraints]\n";
    for (int j = 0; j < model.q; ++j) {
        out << "A[" << j + 1 << "] = " << model.ll_rhs[j].to_string() << "\n";
        for (int i = 0; i < model.m; ++i)
            if (!model.ll_B[j][i].is_zero())
                out << "B[" << j + 1 << "][" << i + 1 << "] = " << model.ll_B[j][i].to_string()
                    << "\n";
    }
    if (model.candidate) {
        out << "[candidate] x = (";
        for (int i = 0; i < model.n; ++i) out << (i ? ", " : "") << num(model.candidate->x[i]);
        out << "), y = (";
        for (int i = 0; i < model.m; ++i) out << (i ? ", " : "") << num(model.candidate->y[i]);
        out << ")\n";
    }
    for (const auto& path : model.paths) {
        out << "[path]\n";
        for (int i = 0; i < model.n; ++i)
            out << "x[" << i + 1 << "](t) = " << path.x_path[i].to_string() << "\n";
        for (int i = 0; i < model.m; ++i)
            out << "y[" << i + 1 << "](t) = " << path.y_path[i].to_string() << "\n";
        out << "t = (";
        for (std::size_t k = 0; k < path.t_schedule.size(); ++k)
            out << (k ? ", " : "") << num(path.t_schedule[k]);
        out << ")\n";
    }
    return out.str();
}

} // namespace calmprobe
