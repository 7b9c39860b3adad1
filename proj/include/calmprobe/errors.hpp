#pragma once

#include <stdexcept>
#include <string>

namespace calmprobe {

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalBreakdown : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CombinatorialBlowup : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SyntaxError : std::runtime_error {
    int line;
    int column;
    SyntaxError(const std::string& msg, int line_, int col_)
        : std::runtime_error(msg + " (line " + std::to_string(line_) +
                             ", column " + std::to_string(col_) + ")"),
          line(line_), column(col_) {}
};

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonPolynomialExpression : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PhiNotFinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormNotSupported : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CenterNotOptimal : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AllSamplesSkipped : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SubsetCapExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PathInfeasibleEverywhere : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace calmprobe
