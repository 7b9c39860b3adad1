#pragma once

// Lower-level optimal value function phi(x), the solution set S(x) as a
// polyhedral face, and the max-norm distance dist(y, S(x)) certified by the
// primal min-sigma LP together with its independently solved dual.

#include <cmath>
#include <string>

#include "calmprobe/config.hpp"
#include "calmprobe/errors.hpp"
#include "calmprobe/lp.hpp"
#include "calmprobe/model.hpp"

namespace calmprobe {

struct PhiValue {
    enum class Status { Finite, PlusInfinity, MinusInfinity };
    Status status = Status::Finite;
    double value = 0.0; // meaningful only when Finite

    bool finite() const { return status == Status::Finite; }
};

inline const char* to_string(PhiValue::Status s) {
    switch (s) {
        case PhiValue::Status::Finite: return "finite";
        case PhiValue::Status::PlusInfinity: return "+inf";
        case PhiValue::Status::MinusInfinity: return "-inf";
    }
    return "?";
}

inline PhiValue phi(const BilevelModel& model, const Vec& x, const Tolerances& tol = {}) {
    const LpOutcome out = solve_lp(lower_level_lp(model, x), tol);
    switch (out.status) {
        case LpStatus::Optimal: return {PhiValue::Status::Finite, out.value};
        case LpStatus::Infeasible: return {PhiValue::Status::PlusInfinity, 0.0};
        case LpStatus::Unbounded: return {PhiValue::Status::MinusInfinity, 0.0};
    }
    return {};
}

/// S(x) described as {y | B(x) y <= -A(x), c(x).y = phi(x)}.
struct SolutionFace {
    Vec base_x;
    double phi_value = 0.0;
    Polyhedron face;
};

inline SolutionFace solution_face(const BilevelModel& model, const Vec& x,
                                  const Tolerances& tol = {}) {
    const PhiValue pv = phi(model, x, tol);
    if (!pv.finite())
        throw PhiNotFinite("solution_face: phi(x) is " + std::string(to_string(pv.status)));
    SolutionFace sf;
    sf.base_x = x;
    sf.phi_value = pv.value;
    sf.face = lower_feasible_region(model, x);
    sf.face.eq_matrix = Mat(1, model.m);
    const Instantiated inst = instantiate(model, x);
    for (int i = 0; i < model.m; ++i) sf.face.eq_matrix(0, i) = inst.c[i];
    sf.face.eq_rhs = {pv.value};
    return sf;
}

/// sigma = dist(y, S(x)) in the max-norm, with the primal minimizer z and the
/// dual vertex (xi1, xi2, xi3, xi4) of Q(x) witnessing it.
struct DistanceCertificate {
    double sigma = 0.0;
    Vec z;               // nearest lower-level optimal point
    Vec xi1, xi2;        // length m each
    double xi3 = 0.0;
    Vec xi4;             // length q
    double primal_value = 0.0;
    double dual_value = 0.0;
    double slack_u = 0.0; // f(x,y) - phi(x)
};

inline DistanceCertificate dist_to_solutions(const BilevelModel& model, const Vec& x,
                                             const Vec& y, const Tolerances& tol = {}) {
    if (static_cast<int>(y.size()) != model.m)
        throw DimensionMismatch("dist_to_solutions: y length");
    const PhiValue pv = phi(model, x, tol);
    if (!pv.finite())
        throw PhiNotFinite("dist_to_solutions: phi(x) is " + std::string(to_string(pv.status)));
    const Instantiated inst = instantiate(model, x);
    const int m = model.m, q = model.q;
    // The optimality cut uses phi relaxed by tol.feas so that the LP tolerance
    // of phi itself cannot empty the face.
    const double phi_cut = pv.value + tol.feas;

    // Primal: min sigma over (sigma, z) with y - z <= sigma e, z - y <= sigma e,
    // c.z <= phi_cut, B z <= -A.
    LpProblem primal;
    primal.objective.assign(1 + m, 0.0);
    primal.objective[0] = 1.0;
    primal.sense = Sense::Minimize;
    Polyhedron& reg = primal.region;
    reg.signs.assign(1 + m, Sign::Free);
    reg.eq_matrix = Mat(0, 1 + m);
    reg.ineq_matrix = Mat(2 * m + 1 + q, 1 + m);
    reg.ineq_rhs.assign(2 * m + 1 + q, 0.0);
    for (int i = 0; i < m; ++i) {
        // y_i - z_i <= sigma
        reg.ineq_matrix(i, 0) = -1.0;
        reg.ineq_matrix(i, 1 + i) = -1.0;
        reg.ineq_rhs[i] = -y[i];
        // z_i - y_i <= sigma
        reg.ineq_matrix(m + i, 0) = -1.0;
        reg.ineq_matrix(m + i, 1 + i) = 1.0;
        reg.ineq_rhs[m + i] = y[i];
    }
    for (int i = 0; i < m; ++i) reg.ineq_matrix(2 * m, 1 + i) = inst.c[i];
    reg.ineq_rhs[2 * m] = phi_cut;
    for (int j = 0; j < q; ++j) {
        for (int i = 0; i < m; ++i) reg.ineq_matrix(2 * m + 1 + j, 1 + i) = inst.B(j, i);
        reg.ineq_rhs[2 * m + 1 + j] = -inst.A[j];
    }
    const LpOutcome po = solve_lp(primal, tol);
    if (po.status != LpStatus::Optimal)
        throw NumericalBreakdown("dist_to_solutions: primal projection LP not optimal");

    // Dual: max y.(xi1 - xi2) + phi xi3 - A.xi4 over Q(x),
    // Q(x) = {xi <= 0 | xi1 - xi2 + c xi3 + B^T xi4 = 0, -e.xi1 - e.xi2 = 1}.
    LpProblem dual;
    const int nd = 2 * m + 1 + q;
    dual.sense = Sense::Maximize;
    dual.objective.assign(nd, 0.0);
    for (int i = 0; i < m; ++i) {
        dual.objective[i] = y[i];
        dual.objective[m + i] = -y[i];
    }
    dual.objective[2 * m] = phi_cut;
    for (int j = 0; j < q; ++j) dual.objective[2 * m + 1 + j] = -inst.A[j];
    Polyhedron& dreg = dual.region;
    dreg.signs.assign(nd, Sign::Nonpositive);
    dreg.ineq_matrix = Mat(0, nd);
    dreg.eq_matrix = Mat(m + 1, nd);
    dreg.eq_rhs.assign(m + 1, 0.0);
    for (int i = 0; i < m; ++i) {
        dreg.eq_matrix(i, i) = 1.0;
        dreg.eq_matrix(i, m + i) = -1.0;
        dreg.eq_matrix(i, 2 * m) = inst.c[i];
        for (int j = 0; j < q; ++j) dreg.eq_matrix(i, 2 * m + 1 + j) = inst.B(j, i);
    }
    for (int i = 0; i < m; ++i) {
        dreg.eq_matrix(m, i) = -1.0;
        dreg.eq_matrix(m, m + i) = -1.0;
    }
    dreg.eq_rhs[m] = 1.0;
    const LpOutcome dmo = solve_lp(dual, tol);
    if (dmo.status != LpStatus::Optimal)
        throw NumericalBreakdown("dist_to_solutions: dual projection LP not optimal");

    DistanceCertificate cert;
    cert.primal_value = po.value;
    cert.dual_value = dmo.value;
    cert.sigma = std::max(0.0, po.value);
    cert.z.assign(po.primal_point.begin() + 1, po.primal_point.end());
    cert.xi1.assign(dmo.primal_point.begin(), dmo.primal_point.begin() + m);
    cert.xi2.assign(dmo.primal_point.begin() + m, dmo.primal_point.begin() + 2 * m);
    cert.xi3 = dmo.primal_point[2 * m];
    cert.xi4.assign(dmo.primal_point.begin() + 2 * m + 1, dmo.primal_point.end());
    cert.slack_u = dot(inst.c, y) - pv.value;
    return cert;
}

inline bool in_solution_set(const BilevelModel& model, const Vec& x, const Vec& y,
                            const Tolerances& tol = {}) {
    return dist_to_solutions(model, x, y, tol).sigma <= tol.feas;
}

} // namespace calmprobe
