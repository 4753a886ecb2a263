#pragma once

#include <vector>

#include "ppde/functional.hpp"
#include "ppde/path.hpp"

namespace ppde {

// Finite-difference estimates of the Dupire derivatives together with the
// steps used and a step-halving (Richardson) gap. The gap is the max
// difference between the step-h and step-h/2 estimates (step-delta vs
// step-2*delta for the time derivative, which is tied to the grid) and is the
// discretization-error proxy every consistency tolerance is built from.
struct DerivativeReport {
    double dt = 0.0;
    std::vector<double> dx;   // size d
    std::vector<double> dxx;  // row-major d x d, symmetrized
    double h = 0.0;
    double delta = 0.0;
    double richardson_gap = 0.0;
};

double default_vertical_step(const DiscretePath& path, int k);

// Central difference (u(bump +h) - u(bump -h)) / 2h per coordinate.
// Throws if u does not extend to cadlag paths.
std::vector<double> vertical_derivative(const PathFunctional& u, const PathPoint& p, double h);

// Second central differences, symmetrized.
std::vector<double> vertical_hessian(const PathFunctional& u, const PathPoint& p, double h);

// Forward difference along the path frozen at node k, with delta = m * dt.
// At k = N the left-limit rule applies: the value at node N-1 is returned.
double horizontal_derivative(const PathFunctional& u, const PathPoint& p, int delta_steps = 1);

// All derivatives (analytic when available, finite differences otherwise)
// plus the Richardson gap of the numerical estimates.
DerivativeReport derivative_report(const PathFunctional& u, const PathPoint& p,
                                   double h = 0.0, int delta_steps = 1);

// Purely numerical report (ignores analytic derivatives); used for
// analytic-vs-numeric consistency checks and stability diagnostics.
DerivativeReport numerical_derivative_report(const PathFunctional& u, const PathPoint& p,
                                             double h = 0.0, int delta_steps = 1);

// max(1e-4, 10 * gap) agreement between supplied analytic derivatives and the
// numerical ones. Returns the worst absolute discrepancy and whether it passed.
struct ConsistencyCheck {
    bool passed = true;
    double worst = 0.0;
    double tolerance = 0.0;
};
ConsistencyCheck check_derivative_consistency(const PathFunctional& u, const PathPoint& p);

}  // namespace ppde
