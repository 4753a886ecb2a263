#include "ppde/nonlinear_expectation.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "ppde/catalog.hpp"

namespace ppde {

namespace {

Generator envelope_driver(double L, int sign) {
    return sign < 0 ? catalog::gen_lower_envelope(L) : catalog::gen_upper_envelope(L);
}

NlexpResult envelope(const TerminalFunctional& xi, double L, const BrownianBatch& batch,
                     NlexpMethod method, const BSDESolveOptions& opt, int sign) {
    if (L < 0.0) throw std::invalid_argument("nonlinear expectation: L must be >= 0");

    if (method == NlexpMethod::bsde || L == 0.0) {
        BSDESolution sol = solve_bsde_regression(envelope_driver(L, sign), xi, batch, opt);
        return {sol.y0, sol.y0_se, NlexpMethod::bsde};
    }

    // Greedy feedback control from the fitted continuation gradient: solve the
    // envelope equation once to expose Z, then evaluate the induced feedback
    // tilt by exponential weighting on the same draws.
    auto sol = std::make_shared<BSDESolution>(
        solve_bsde_regression(envelope_driver(L, sign), xi, batch, opt));
    const int k0 = batch.start_index();
    DriftControl control;
    control.bound = L;
    control.description = "greedy sign feedback";
    // The fitted Z of path m at node k is a function of that path's features
    // only; reading it back per (k, path) is the feedback rule. Paths of a
    // batch are stored contiguously, so the index is pointer arithmetic.
    const DiscretePath* base = &batch.path(0);
    const int num_paths = batch.num_paths();
    control.beta = [sol, L, sign, k0, base, num_paths](int k, const PathPoint& p,
                                                       std::span<double> out) {
        const std::ptrdiff_t mi = p.path - base;
        if (mi < 0 || mi >= num_paths || k < k0) {
            for (auto& v : out) v = 0.0;
            return;
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double z = sol->Z(static_cast<int>(mi), k, static_cast<int>(i));
            out[i] = (z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0)) * L * sign;
        }
    };

    PathFunctional terminal_as_functional(
        xi.name, [&xi](const PathPoint& p) { return xi(*p.path); });
    WeightedMean wm = tilted_expectation(terminal_as_functional, batch, control, opt.exec);
    return {wm.value, wm.std_error, NlexpMethod::control_search};
}

}  // namespace

NlexpResult lower_expectation(const TerminalFunctional& xi, double L, const BrownianBatch& batch,
                              NlexpMethod method, const BSDESolveOptions& opt) {
    return envelope(xi, L, batch, method, opt, -1);
}

NlexpResult upper_expectation(const TerminalFunctional& xi, double L, const BrownianBatch& batch,
                              NlexpMethod method, const BSDESolveOptions& opt) {
    return envelope(xi, L, batch, method, opt, +1);
}

double lower_expectation_tree(const TerminalFunctional& xi, double L, const TimeGrid& grid) {
    return solve_bsde_tree(catalog::gen_lower_envelope(L), xi, grid).y0();
}

double upper_expectation_tree(const TerminalFunctional& xi, double L, const TimeGrid& grid) {
    return solve_bsde_tree(catalog::gen_upper_envelope(L), xi, grid).y0();
}

}  // namespace ppde
