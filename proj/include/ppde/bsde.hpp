#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ppde/brownian.hpp"
#include "ppde/generator.hpp"
#include "ppde/regression.hpp"
#include "ppde/stopping.hpp"
#include "ppde/tree.hpp"

namespace ppde {

struct BSDESolveOptions {
    BasisSpec basis{};
    int picard_iterations = 1;  // corrector passes of the in-y fixed point
    ExecPolicy exec = ExecPolicy::parallel;
};

// Regression solution of
//   Y_k = E[Y_{k+1} | F_k] + f(t_k, path, Y_k, Z_k) dt,
//   Z_k = E[(Y_{k+1} - E[Y_{k+1}|F_k]) dB_k | F_k] / dt
// backward from Y_N = g(path). At the start index the conditional expectation
// is the plain sample mean (the value there is a constant).
struct BSDESolution {
    TimeGrid grid{1.0, 1};
    int dim = 1;
    int num_paths = 0;
    int start_index = 0;
    std::vector<double> y;  // m x (N+1)
    std::vector<double> z;  // m x N x dim
    double y0 = 0.0;
    double y0_se = 0.0;
    double min_r2 = 1.0;
    std::vector<std::string> warnings;

    double Y(int m, int k) const {
        return y[static_cast<std::size_t>(m) * (grid.steps() + 1) + k];
    }
    double Z(int m, int k, int i = 0) const {
        return z[(static_cast<std::size_t>(m) * grid.steps() + k) * dim + i];
    }
};

BSDESolution solve_bsde_regression(const Generator& f, const TerminalFunctional& g,
                                   const BrownianBatch& batch,
                                   const BSDESolveOptions& opt = {});

// Value of the backward equation started at an interior anchor: shifts f and g
// by the prefix, solves on [t_k, T], returns the (constant) value at the
// anchor. Increments are keyed to absolute nodes, so evaluations at nearby
// anchors share noise. Identically-zero drivers take the plain-mean shortcut.
struct U0Options {
    int num_paths = 20000;
    std::uint64_t seed = 7321;
    BSDESolveOptions solve{};
};

struct U0Result {
    double value = 0.0;
    double std_error = 0.0;
};

U0Result u0_value(const PathPoint& prefix, const Generator& f, const TerminalFunctional& g,
                  const U0Options& opt = {});

// The value field as a functional (each evaluation is a fresh solve).
PathFunctional u0_functional(const Generator& f, const TerminalFunctional& g,
                             const U0Options& opt = {});

// |u0(p) - u0(q)| against fitted_c * (d_inf(p,q) + rho(p,q)).
struct ModulusProbeRow {
    double du = 0.0, d_inf = 0.0, rho = 0.0, se = 0.0;
    bool violation = false;
};
struct ModulusProbeReport {
    std::vector<ModulusProbeRow> rows;
    double fitted_c = 0.0;
    int violations = 0;
};
ModulusProbeReport modulus_probe(const Generator& f, const TerminalFunctional& g,
                                 const std::vector<std::pair<PathPoint, PathPoint>>& pairs,
                                 const std::function<double(const PathPoint&, const PathPoint&)>& rho,
                                 const U0Options& opt = {});

// Terminal-order comparison with common random numbers. Requires g1 <= g2
// pathwise on the batch.
struct ComparisonVerdict {
    bool ordered = false;
    double y1_0 = 0.0, y2_0 = 0.0;
    double tolerance = 0.0;
};
ComparisonVerdict comparison_test(const Generator& f, const TerminalFunctional& g1,
                                  const TerminalFunctional& g2, const BrownianBatch& batch,
                                  const BSDESolveOptions& opt = {});

struct TreeComparisonVerdict {
    bool ordered_everywhere = false;
    double worst_gap = 0.0;  // max(Y1 - Y2) over all nodes
};
TreeComparisonVerdict comparison_test_tree(const Generator& f, const TerminalFunctional& g1,
                                           const TerminalFunctional& g2, const TimeGrid& grid);

// Classifies u between stopping times: solve the backward equation on
// [tau1, tau2] with terminal u_tau2 and compare with u_tau1, grouped by the
// tau1 node. u is a martingale for f when the two agree, a submartingale when
// u_tau1 <= rollback, a supermartingale when >=.
enum class MartingaleVerdict { martingale, submartingale, supermartingale, neither };

struct FMartingaleGroup {
    int k1 = 0;
    int count = 0;
    double mean_diff = 0.0;  // u_tau1 - rollback
    double se = 0.0;
};
struct FMartingaleReport {
    MartingaleVerdict verdict = MartingaleVerdict::neither;
    std::vector<FMartingaleGroup> groups;
    double abs_tolerance = 0.0;
};
FMartingaleReport f_martingale_check(const PathFunctional& u, const Generator& f,
                                     const GridStoppingTime& tau1, const GridStoppingTime& tau2,
                                     const BrownianBatch& batch, const BSDESolveOptions& opt = {},
                                     double abs_tolerance = 5e-3);

// |Y^eps_0 - Y_0| for perturbed drivers on a shared batch, against the sampled
// sup-gap of the drivers.
struct StabilityRow {
    double eps = 0.0;
    double y0 = 0.0;
    double gap = 0.0;        // |Y^eps_0 - Y_0|
    double sup_f_gap = 0.0;  // sampled sup |f_eps - f|
};
std::vector<StabilityRow> stability_experiment(
    const Generator& f, const std::function<Generator(double)>& f_eps,
    const std::vector<double>& eps_list, const TerminalFunctional& g,
    const BrownianBatch& batch, const BSDESolveOptions& opt = {});

}  // namespace ppde
