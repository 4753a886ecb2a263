#pragma once

#include <vector>

#include "ppde/bsde.hpp"
#include "ppde/functional.hpp"
#include "ppde/nonlinear_expectation.hpp"
#include "ppde/stopping.hpp"
#include "ppde/tree.hpp"

namespace ppde {

// Regression dynamic programming for
//   Y_k = min(X_k, E_lower_k[Y_{k+1}])     (lower; max / E_upper when upper)
// stopped at tau_bound, with the reflected-equation bookkeeping: Y <= X up to
// the bound, dK supported on contact nodes, tau_star = first contact node.
struct StoppingValue {
    TimeGrid grid{1.0, 1};
    int num_paths = 0;
    std::vector<double> y;           // m x (N+1); frozen at the bound
    std::vector<double> x;           // m x (N+1)
    std::vector<double> k_comp;      // m x (N+1), cumulative compensator
    std::vector<int> tau_star;       // per path
    std::vector<int> tau_bound;      // per path
    double y0 = 0.0;
    double y0_se = 0.0;

    double Y(int m, int k) const { return y[static_cast<std::size_t>(m) * (grid.steps() + 1) + k]; }
    double X(int m, int k) const { return x[static_cast<std::size_t>(m) * (grid.steps() + 1) + k]; }
    double K(int m, int k) const {
        return k_comp[static_cast<std::size_t>(m) * (grid.steps() + 1) + k];
    }
};

struct StoppingOptions {
    BasisSpec basis{};
    ExecPolicy exec = ExecPolicy::parallel;
    double payoff_bound = 1e6;  // reject unbounded payoffs beyond this
};

StoppingValue optimal_stop_lower(const PathFunctional& payoff, const GridStoppingTime& tau_bound,
                                 double L, const BrownianBatch& batch,
                                 const StoppingOptions& opt = {});
StoppingValue optimal_stop_upper(const PathFunctional& payoff, const GridStoppingTime& tau_bound,
                                 double L, const BrownianBatch& batch,
                                 const StoppingOptions& opt = {});

// For sampled stopping rules tau~, checks the one-sided envelope property
//   E_lower[Y_{tau~ ^ tau}] >= Y_0 - tol
// and the two-sided (martingale) property with the rules capped at tau_star.
struct SubmartingaleRow {
    std::string rule;
    double value = 0.0;        // E_lower[Y_{tau~ ^ tau}]
    double value_capped = 0.0; // E_lower[Y_{tau~ ^ tau*}]
    double se = 0.0;
};
struct SubmartingaleReport {
    std::vector<SubmartingaleRow> rows;
    double y0 = 0.0;
    bool submartingale_ok = false;
    bool martingale_to_tau_star_ok = false;
    double tolerance = 0.0;
};

// Tree version (exact DP for the outer expectation).
SubmartingaleReport submartingale_check_tree(const TreeStoppingValue& sv, double L,
                                             const std::vector<GridStoppingTime>& rules,
                                             double tolerance = 1e-10);

// Monte Carlo version (regression DP for the outer expectation).
SubmartingaleReport submartingale_check(const StoppingValue& sv, double L,
                                        const std::vector<GridStoppingTime>& rules,
                                        const BrownianBatch& batch,
                                        const StoppingOptions& opt = {});

}  // namespace ppde
