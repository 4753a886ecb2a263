#pragma once

#include <string>
#include <vector>

#include "ppde/functional.hpp"
#include "ppde/generator.hpp"

namespace ppde {
namespace catalog {

// Named d=1 example functionals with analytic derivatives where they exist.
// "u0" fields (value functions) are built elsewhere; these are the closed-form
// test fields and payoffs the CLI and the test suites address by name.

// u(t, w) = w_t
PathFunctional identity();
// u(t, w) = t
PathFunctional time_functional();
// u(t, w) = w_t^2 - t  (drift-free under the Wiener measure)
PathFunctional square_minus_t();
// u(t, w) = sum_{j<k} w_j * dt  (left-endpoint running integral)
PathFunctional running_integral();
// the same integral of the piecewise-linear interpolant (trapezoid sums);
// its change-of-variable residual is nonzero at grid scale
PathFunctional trapezoid_integral();
// u(t, w) = max_{j<=k} w_j
PathFunctional running_max();
// u(t, w) = exp(-(T-t)/2) cos(w_t), horizon taken from the path grid
PathFunctional heat_cos();
// u(t, w) = cos(w_t)
PathFunctional cos_value();
// u(t, w) = |w_t| (kink at 0; no stable second derivative there)
PathFunctional abs_value();

PathFunctional by_name(const std::string& name);
std::vector<std::string> functional_names();

// Generators (drivers). All bounded, Lipschitz in (y, z).
Generator gen_zero();
Generator gen_linear_decay(double r);       // f = -r y
Generator gen_lower_envelope(double level); // f = -level * ||z||_1
Generator gen_upper_envelope(double level); // f = +level * ||z||_1
Generator gen_smooth_nonlinear(double a);   // f = a (cos y + sin z_1) / 2
Generator generator_by_name(const std::string& name, double param);
std::vector<std::string> generator_names();

// Terminal payoffs.
TerminalFunctional term_value_clipped(double clip);  // clamp(w_T, -clip, clip)
TerminalFunctional term_cos();                       // cos(w_T)
TerminalFunctional term_integral();                  // left-sum integral of w over [0, T]
TerminalFunctional term_running_max_clipped(double clip);
TerminalFunctional term_constant(double c);
TerminalFunctional terminal_by_name(const std::string& name, double param);
std::vector<std::string> terminal_names();

}  // namespace catalog
}  // namespace ppde
