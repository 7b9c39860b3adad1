#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "calmprobe/errors.hpp"

namespace calmprobe {

using Vec = std::vector<double>;

/// Dense row-major matrix, sized for desk-scale problems.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    Vec row(int i) const {
        Vec r(cols);
        for (int j = 0; j < cols; ++j) r[j] = (*this)(i, j);
        return r;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data) m = std::max(m, std::fabs(v));
        return m;
    }
};

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline Vec mat_vec(const Mat& m, const Vec& v) {
    if (static_cast<int>(v.size()) != m.cols) throw DimensionMismatch("mat_vec: size mismatch");
    Vec out(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

inline double max_norm(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

inline double max_norm_dist(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionMismatch("max_norm_dist: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

} // namespace calmprobe
