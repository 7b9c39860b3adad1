#pragma once

namespace calmprobe {

/// Numerical tolerances. Defaults are tuned for double precision at desk scale;
/// every value can be overridden (the CLI exposes them via --tol key=val).
struct Tolerances {
    double feas = 1e-9;    // absolute feasibility
    double dual = 1e-8;    // primal/dual agreement
    double vertex = 1e-8;  // vertex deduplication
    double rank = 1e-8;    // relative rank threshold
    double pivot = 1e-10;  // simplex pivot threshold
};

} // namespace calmprobe
