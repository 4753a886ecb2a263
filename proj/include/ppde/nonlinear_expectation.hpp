#pragma once

#include <string>

#include "ppde/bsde.hpp"
#include "ppde/girsanov.hpp"

namespace ppde {

// inf (lower) / sup (upper) of tilted expectations over feedback drifts with
// component bound L. Two routes:
//   bsde:           backward equation with driver -+ L ||z||_1
//   control_search: greedy feedback beta = -+ L sign(Z_fit) from the fitted
//                   continuation gradient, evaluated by Girsanov weighting
// The two must agree within statistical tolerance; the tree DP in tree.hpp is
// the exact oracle at small N.
enum class NlexpMethod { bsde, control_search };

struct NlexpResult {
    double value = 0.0;
    double std_error = 0.0;
    NlexpMethod method = NlexpMethod::bsde;
};

NlexpResult lower_expectation(const TerminalFunctional& xi, double L, const BrownianBatch& batch,
                              NlexpMethod method = NlexpMethod::bsde,
                              const BSDESolveOptions& opt = {});

NlexpResult upper_expectation(const TerminalFunctional& xi, double L, const BrownianBatch& batch,
                              NlexpMethod method = NlexpMethod::bsde,
                              const BSDESolveOptions& opt = {});

// Exact values on the binary tree (d = 1, small N).
double lower_expectation_tree(const TerminalFunctional& xi, double L, const TimeGrid& grid);
double upper_expectation_tree(const TerminalFunctional& xi, double L, const TimeGrid& grid);

}  // namespace ppde
