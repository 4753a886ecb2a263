#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ppde/bsde.hpp"
#include "ppde/derivatives.hpp"
#include "ppde/functional.hpp"
#include "ppde/generator.hpp"
#include "ppde/tree.hpp"

namespace ppde {

// The semilinear operator at a point:
//   (L u)(t, w) = -dt_u - 1/2 tr(dxx_u) - f(t, w, u, dx_u).
double ppde_operator(const PathFunctional& u, const PathPoint& p, const Generator& f);
double ppde_operator(const DerivativeReport& rep, double u_value, const PathPoint& p,
                     const Generator& f);

enum class ClassicalVerdict { solution, subsolution, supersolution, neither };

struct ClassicalCheckReport {
    ClassicalVerdict verdict = ClassicalVerdict::neither;
    double min_operator = 0.0;
    double max_operator = 0.0;
    int derivative_failures = 0;  // unstable finite differences (kinks etc.)
};

ClassicalCheckReport classical_check(const PathFunctional& u, const Generator& f,
                                     const std::vector<PathPoint>& sample, double tol = 1e-3);

// Test function on the local window of an anchor (t_k, omega): a functional of
// (s - t, shifted path) with analytic derivatives, plus locality parameters
// used to build the exit-time bound.
struct TestFunction {
    PathFunctional phi;  // on re-anchored suffix paths; analytic derivatives required
    std::string name;
    double loc_radius = 0.3;
    int loc_steps = 8;
};

// phi(s, w') = value0 + a (s - t) + b . w'_s + 1/2 w'_s^T q w'_s in local
// coordinates (the shifted path starts at 0, so the anchor equality
// phi(t, 0) = value0 is built in).
TestFunction paraboloid(double value0, double a, std::vector<double> b, std::vector<double> q,
                        std::string name = "paraboloid");

// (L^{t,omega} phi)(t, 0): the shifted operator at the anchor, with f read at
// the anchor point itself.
double shifted_operator_at_anchor(const TestFunction& phi, const PathPoint& anchor,
                                  const Generator& f);

// Value field with a statistical error estimate per evaluation (zero for
// closed-form fields, the Monte Carlo standard error for solver-backed ones).
struct AnchoredValue {
    double value = 0.0;
    double se = 0.0;
};
struct ValueField {
    std::string name;
    std::function<AnchoredValue(const PathPoint&)> eval;
    bool cadlag_extension = true;

    PathFunctional as_functional() const {
        auto e = eval;
        return PathFunctional(name, [e](const PathPoint& p) { return e(p).value; },
                              cadlag_extension);
    }
};
ValueField field_from_functional(const PathFunctional& u);
ValueField field_from_solver(const Generator& f, const TerminalFunctional& g,
                             const U0Options& opt);
ValueField add_time_ramp(const ValueField& u, double c);  // u + c (T - t)

enum class Membership { member, non_member, inconclusive };

struct MembershipResult {
    Membership verdict = Membership::inconclusive;
    double optimum = 0.0;    // optimal stopping value of phi - u^{t,omega}
    double tolerance = 0.0;  // max(abs_tol, 3 * field se)
};

struct MembershipOptions {
    double abs_tol = 1e-3;
    ExecPolicy exec = ExecPolicy::parallel;
};

// Lower side (side = -1): member iff min over stopping rules of the lower
// expectation of (phi - u^{t,omega}) stopped at the exit time is >= -tol
// (it is always <= 0 because stopping immediately gives 0). Upper side
// (side = +1) is the mirror statement. The DP runs exactly on the local
// binary tree; u is evaluated along concatenated tree paths.
MembershipResult membership_test(const TestFunction& phi, const ValueField& u,
                                 const PathPoint& anchor, double L, int side,
                                 const MembershipOptions& opt = {});

// Cached u-values on the local tree of one anchor, shared by a whole family
// of test functions.
struct LocalTreeField {
    TimeGrid local_grid{1.0, 1};
    int levels = 0;
    std::vector<std::vector<double>> u;   // per level/node
    std::vector<std::vector<double>> se;  // per level/node
    double max_se = 0.0;
    double u_anchor = 0.0;
};
LocalTreeField build_local_tree_field(const ValueField& u, const PathPoint& anchor, int steps,
                                      ExecPolicy exec);
MembershipResult membership_test_cached(const TestFunction& phi, const LocalTreeField& field,
                                        double L, int side, const MembershipOptions& opt = {});

struct ViscosityReport {
    int anchor_id = 0;
    std::string phi_id;
    char side = 'L';  // 'L' lower class (subsolution test), 'U' upper class
    Membership membership = Membership::inconclusive;
    double optimum = 0.0;
    double tolerance = 0.0;
    double l_phi = 0.0;
    std::string verdict;  // consistent | violation | vacuous
};

struct FalsifierOptions {
    MembershipOptions membership{};
    double loc_radius = 0.3;
    int loc_steps = 8;
    double l_tolerance = 0.1;
    std::vector<double> operator_offsets{0.0, -0.15, 0.15, -0.5, 0.5};
    std::vector<double> curvature_offsets{0.0, -0.5, 0.5};
    std::vector<TestFunction> extra;  // user-supplied test functions
};

// Refutation harness: a finite paraboloid family built from the anchor's
// Taylor data, with the time slope chosen so that L(phi) equals a prescribed
// offset exactly. It can refute the viscosity property, never certify it.
std::vector<ViscosityReport> viscosity_falsifier(const ValueField& u, const Generator& f,
                                                 double L,
                                                 const std::vector<PathPoint>& anchors,
                                                 const FalsifierOptions& opt = {});

// f~(t, w, y, z) = -lambda y + e^{lambda t} f(t, w, e^{-lambda t} y, e^{-lambda t} z),
// paired with u -> e^{lambda t} u.
Generator generator_transform(const Generator& f, double lambda);
PathFunctional exp_time_scale(const PathFunctional& u, double lambda);

}  // namespace ppde
