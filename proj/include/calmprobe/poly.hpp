#pragma once

// Multivariate polynomials over the named variables x1..xn, y1..ym and the
// path parameter t, plus a recursive-descent parser for the model-file
// expression grammar: + - * ^ with integer exponents, parentheses, decimal
// coefficients.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdio>
#include <cstdint>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "calmprobe/errors.hpp"
#include "calmprobe/matrix.hpp"

namespace calmprobe {

struct Var {
    enum class Kind : std::uint8_t { X, Y, T };
    Kind kind = Kind::X;
    int index = 0; // 0-based; always 0 for T
    auto operator<=>(const Var&) const = default;

    std::string name() const {
        switch (kind) {
            case Kind::X: return "x" + std::to_string(index + 1);
            case Kind::Y: return "y" + std::to_string(index + 1);
            case Kind::T: return "t";
        }
        return {};
    }
};

class Poly {
public:
    struct Term {
        double coef = 0.0;
        std::vector<std::pair<Var, int>> powers; // sorted by Var, exponents >= 1
    };

    Poly() = default;

    static Poly constant(double c) {
        Poly p;
        if (c != 0.0) p.terms_.push_back({c, {}});
        return p;
    }

    static Poly variable(Var v) {
        Poly p;
        p.terms_.push_back({1.0, {{v, 1}}});
        return p;
    }

    const std::vector<Term>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    bool is_constant(double* value = nullptr) const {
        if (terms_.empty()) { if (value) *value = 0.0; return true; }
        if (terms_.size() == 1 && terms_[0].powers.empty()) {
            if (value) *value = terms_[0].coef;
            return true;
        }
        return false;
    }

    Poly operator-() const {
        Poly p = *this;
        for (auto& t : p.terms_) t.coef = -t.coef;
        return p;
    }

    Poly scaled(double s) const {
        if (s == 0.0) return {};
        Poly p = *this;
        for (auto& t : p.terms_) t.coef *= s;
        return p;
    }

    friend Poly operator+(const Poly& a, const Poly& b) {
        std::map<std::vector<std::pair<Var, int>>, double> acc;
        for (const auto& t : a.terms_) acc[t.powers] += t.coef;
        for (const auto& t : b.terms_) acc[t.powers] += t.coef;
        return from_map(acc);
    }

    friend Poly operator-(const Poly& a, const Poly& b) { return a + (-b); }

    friend Poly operator*(const Poly& a, const Poly& b) {
        std::map<std::vector<std::pair<Var, int>>, double> acc;
        for (const auto& s : a.terms_) {
            for (const auto& t : b.terms_) {
                std::map<Var, int> pw;
                for (const auto& [v, e] : s.powers) pw[v] += e;
                for (const auto& [v, e] : t.powers) pw[v] += e;
                std::vector<std::pair<Var, int>> key(pw.begin(), pw.end());
                acc[key] += s.coef * t.coef;
            }
        }
        return from_map(acc);
    }

    Poly pow(int e) const {
        if (e < 0) throw NonPolynomialExpression("negative exponent");
        Poly r = constant(1.0);
        Poly base = *this;
        while (e > 0) {
            if (e & 1) r = r * base;
            base = base * base;
            e >>= 1;
        }
        return r;
    }

    double eval(std::span<const double> x, std::span<const double> y, double t = 0.0) const {
        double s = 0.0;
        for (const auto& term : terms_) {
            double v = term.coef;
            for (const auto& [var, e] : term.powers) {
                double base = 0.0;
                switch (var.kind) {
                    case Var::Kind::X: base = x[static_cast<std::size_t>(var.index)]; break;
                    case Var::Kind::Y: base = y[static_cast<std::size_t>(var.index)]; break;
                    case Var::Kind::T: base = t; break;
                }
                for (int k = 0; k < e; ++k) v *= base;
            }
            s += v;
        }
        return s;
    }

    double eval_x(std::span<const double> x) const { return eval(x, {}); }
    double eval_t(double t) const { return eval({}, {}, t); }

    bool depends_on(Var::Kind kind) const {
        for (const auto& term : terms_)
            for (const auto& [v, e] : term.powers)
                if (v.kind == kind) return true;
        return false;
    }

    int degree_in(Var::Kind kind) const {
        int d = 0;
        for (const auto& term : terms_) {
            int td = 0;
            for (const auto& [v, e] : term.powers)
                if (v.kind == kind) td += e;
            d = std::max(d, td);
        }
        return d;
    }

    Poly derivative(Var var) const {
        std::map<std::vector<std::pair<Var, int>>, double> acc;
        for (const auto& term : terms_) {
            for (std::size_t i = 0; i < term.powers.size(); ++i) {
                if (term.powers[i].first != var) continue;
                auto pw = term.powers;
                const int e = pw[i].second;
                if (e == 1) pw.erase(pw.begin() + static_cast<long>(i));
                else pw[i].second = e - 1;
                acc[pw] += term.coef * e;
            }
        }
        return from_map(acc);
    }

    bool operator==(const Poly& o) const {
        if (terms_.size() != o.terms_.size()) return false;
        for (std::size_t i = 0; i < terms_.size(); ++i)
            if (terms_[i].powers != o.terms_[i].powers || terms_[i].coef != o.terms_[i].coef)
                return false;
        return true;
    }

    /// Canonical text; parse_poly(to_string()) reproduces the polynomial.
    std::string to_string() const {
        if (terms_.empty()) return "0";
        std::string out;
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            const Term& t = terms_[i];
            const double mag = std::fabs(t.coef);
            if (i == 0) { if (t.coef < 0) out += "-"; }
            else out += t.coef < 0 ? " - " : " + ";
            std::string mono;
            for (const auto& [v, e] : t.powers) {
                if (!mono.empty()) mono += "*";
                mono += v.name();
                if (e > 1) mono += "^" + std::to_string(e);
            }
            if (mono.empty()) out += format_double(mag);
            else if (mag == 1.0) out += mono;
            else out += format_double(mag) + "*" + mono;
        }
        return out;
    }

private:
    std::vector<Term> terms_;

    static Poly from_map(const std::map<std::vector<std::pair<Var, int>>, double>& acc) {
        Poly p;
        for (const auto& [key, coef] : acc)
            if (coef != 0.0) p.terms_.push_back({coef, key});
        return p;
    }

    static std::string format_double(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }
};

/// Which variables an expression may reference; indices are range-checked.
struct PolyContext {
    bool allow_x = false;
    int n = 0;
    bool allow_y = false;
    int m = 0;
    bool allow_t = false;
};

namespace detail {

class PolyParser {
public:
    PolyParser(std::string_view text, const PolyContext& ctx, int line, int col_offset)
        : text_(text), ctx_(ctx), line_(line), col_offset_(col_offset) {}

    Poly parse() {
        Poly p = expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return p;
    }

private:
    std::string_view text_;
    PolyContext ctx_;
    int line_, col_offset_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) {
        throw SyntaxError(msg, line_, col_offset_ + static_cast<int>(pos_) + 1);
    }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) { ++pos_; return true; }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    Poly expr() {
        bool neg = false;
        if (eat('-')) neg = true;
        else eat('+');
        Poly p = term();
        if (neg) p = -p;
        while (true) {
            if (eat('+')) p = p + term();
            else if (eat('-')) p = p - term();
            else break;
        }
        return p;
    }

    Poly term() {
        Poly p = factor();
        while (true) {
            const char c = peek();
            if (c == '*') { ++pos_; p = p * factor(); }
            else if (c == '/') fail_nonpoly("division is not part of the polynomial grammar");
            else break;
        }
        return p;
    }

    [[noreturn]] void fail_nonpoly(const std::string& msg) {
        throw NonPolynomialExpression(msg + " (line " + std::to_string(line_) + ")");
    }

    Poly factor() {
        Poly base = atom();
        if (eat('^')) {
            skip_ws();
            bool neg = eat('-');
            std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (pos_ == start) fail("expected integer exponent after '^'");
            int e = 0;
            std::from_chars(text_.data() + start, text_.data() + pos_, e);
            if (neg) fail_nonpoly("negative exponent");
            return base.pow(e);
        }
        return base;
    }

    Poly atom() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Poly p = expr();
            if (!eat(')')) fail("expected ')'");
            return p;
        }
        if (c == '-' ) { ++pos_; return -atom(); }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (c == 'x' || c == 'y' || c == 't') return variable();
        fail(std::string("unexpected character '") + c + "'");
    }

    Poly number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            ++pos_;
        // scientific suffix
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
            } else {
                pos_ = save;
            }
        }
        double v = 0.0;
        const std::string tok(text_.substr(start, pos_ - start));
        try {
            std::size_t used = 0;
            v = std::stod(tok, &used);
            if (used != tok.size()) fail("malformed number '" + tok + "'");
        } catch (const std::exception&) {
            fail("malformed number '" + tok + "'");
        }
        return Poly::constant(v);
    }

    Poly variable() {
        const char c = text_[pos_++];
        if (c == 't') {
            if (!ctx_.allow_t) fail("variable 't' is not allowed here");
            return Poly::variable({Var::Kind::T, 0});
        }
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ == start) fail(std::string("expected index after '") + c + "'");
        int idx = 0;
        std::from_chars(text_.data() + start, text_.data() + pos_, idx);
        if (c == 'x') {
            if (!ctx_.allow_x) fail("variable 'x' is not allowed here");
            if (idx < 1 || idx > ctx_.n)
                throw DimensionError("variable x" + std::to_string(idx) + " out of range (n=" +
                                     std::to_string(ctx_.n) + ", line " + std::to_string(line_) + ")");
            return Poly::variable({Var::Kind::X, idx - 1});
        }
        if (!ctx_.allow_y) fail("variable 'y' is not allowed here");
        if (idx < 1 || idx > ctx_.m)
            throw DimensionError("variable y" + std::to_string(idx) + " out of range (m=" +
                                 std::to_string(ctx_.m) + ", line " + std::to_string(line_) + ")");
        return Poly::variable({Var::Kind::Y, idx - 1});
    }
};

} // namespace detail

inline Poly parse_poly(std::string_view text, const PolyContext& ctx,
                       int line = 1, int col_offset = 0) {
    return detail::PolyParser(text, ctx, line, col_offset).parse();
}

} // namespace calmprobe
