#pragma once

#include <cstdint>
#include <vector>

#include "ppde/functional.hpp"
#include "ppde/generator.hpp"
#include "ppde/grid.hpp"
#include "ppde/stopping.hpp"

namespace ppde {

// Non-recombining binary tree oracle (d = 1): increments +-sqrt(dt) with
// probability 1/2 each. Node (k, b) has the path whose step j went up iff bit
// j of b is set; 2^N leaf paths in total. Everything here is exact arithmetic
// on the tree; it is the oracle the Monte Carlo solvers are tested against.
class BinaryTree {
public:
    BinaryTree(const TimeGrid& grid);

    const TimeGrid& grid() const { return grid_; }
    int levels() const { return grid_.steps(); }

    // Path of node (k, b), frozen after node k.
    DiscretePath node_path(int k, std::uint32_t b) const;

    // One-step expectation under the tilt that minimizes (sign=-1) or
    // maximizes (sign=+1) over drift bound L: mean +- L*sqrt(dt)*|up-down|/2.
    double one_step(double up, double down, double L, int sign) const;

private:
    TimeGrid grid_;
};

struct TreeSolution {
    TimeGrid grid{1.0, 1};
    std::vector<std::vector<double>> y;  // y[k] has 2^k entries
    std::vector<std::vector<double>> z;  // z[k] has 2^k entries, k < N
    double y0() const { return y[0][0]; }
};

// Exact backward solution of the driver-f equation with terminal g on the
// tree; per-node fixed point in y, path-dependent g evaluated on every leaf.
TreeSolution solve_bsde_tree(const Generator& f, const TerminalFunctional& g,
                             const TimeGrid& grid);

// Same backward pass for given leaf values (used for nonlinear expectations
// of arbitrary leaf-measurable payoffs).
TreeSolution tree_expectation(const std::vector<double>& leaf_values, const TimeGrid& grid,
                              double L, int sign);

// Optimal stopping on the tree under the lower (sign=-1) or upper (sign=+1)
// nonlinear expectation, bounded by the stopping rule tau_bound:
//   lower:  Y_k = min(X_k, E_lower_k[Y_{k+1}]),   Y <= X,  dK = cont - Y
//   upper:  Y_k = max(X_k, E_upper_k[Y_{k+1}]),   Y >= X,  dK = Y - cont
// with dK supported on contact nodes only.
struct TreeStoppingValue {
    TimeGrid grid{1.0, 1};
    std::vector<std::vector<double>> y, x, dk;
    std::vector<std::vector<unsigned char>> contact;  // Y == X at the node
    std::vector<std::vector<int>> stop_index;         // tau_bound if settled at <= k, else -1
    std::vector<int> tau_star;                        // per leaf, first contact node
    std::vector<int> tau_bound;                       // per leaf
    double y0() const { return y[0][0]; }
};

TreeStoppingValue optimal_stop_tree(const PathFunctional& payoff,
                                    const GridStoppingTime& tau_bound, double L,
                                    const TimeGrid& grid, int sign /* -1 lower, +1 upper */);

}  // namespace ppde
