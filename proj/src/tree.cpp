#include "ppde/tree.hpp"

#include <cmath>
#include <stdexcept>

namespace ppde {

namespace {
constexpr int kMaxLevels = 22;

void check_levels(const TimeGrid& grid) {
    if (grid.steps() > kMaxLevels)
        throw std::invalid_argument("binary tree: too many levels (2^N nodes)");
}
}  // namespace

BinaryTree::BinaryTree(const TimeGrid& grid) : grid_(grid) { check_levels(grid); }

DiscretePath BinaryTree::node_path(int k, std::uint32_t b) const {
    DiscretePath p(grid_, 1, PathFlavor::continuous);
    const double s = std::sqrt(grid_.dt());
    for (int j = 0; j < k; ++j)
        p.at(j + 1, 0) = p.value(j, 0) + (((b >> j) & 1u) ? s : -s);
    for (int j = k + 1; j <= grid_.steps(); ++j) p.at(j, 0) = p.value(k, 0);
    return p;
}

double BinaryTree::one_step(double up, double down, double L, int sign) const {
    const double mean = 0.5 * (up + down);
    const double spread = 0.5 * std::abs(up - down);
    return mean + sign * L * std::sqrt(grid_.dt()) * spread;
}

TreeSolution solve_bsde_tree(const Generator& f, const TerminalFunctional& g,
                             const TimeGrid& grid) {
    check_levels(grid);
    BinaryTree tree(grid);
    const int n = grid.steps();
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);

    TreeSolution sol;
    sol.grid = grid;
    sol.y.resize(static_cast<std::size_t>(n) + 1);
    sol.z.resize(static_cast<std::size_t>(n));
    for (int k = 0; k <= n; ++k) sol.y[static_cast<std::size_t>(k)].assign(1ull << k, 0.0);
    for (int k = 0; k < n; ++k) sol.z[static_cast<std::size_t>(k)].assign(1ull << k, 0.0);

    for (std::uint32_t b = 0; b < (1u << n); ++b)
        sol.y[static_cast<std::size_t>(n)][b] = g(tree.node_path(n, b));

    for (int k = n - 1; k >= 0; --k) {
        auto& yk = sol.y[static_cast<std::size_t>(k)];
        auto& zk = sol.z[static_cast<std::size_t>(k)];
        const auto& y_next = sol.y[static_cast<std::size_t>(k) + 1];
        for (std::uint32_t b = 0; b < (1u << k); ++b) {
            const double up = y_next[b | (1u << k)];
            const double down = y_next[b];
            const double mean = 0.5 * (up + down);
            const double z = (up - down) / (2.0 * sqdt);
            DiscretePath path = tree.node_path(k, b);
            const PathPoint p{&path, k};
            const double t = grid.time(k);
            double y = mean;
            for (int it = 0; it < 100; ++it) {
                const double y_new = mean + dt * f(t, p, y, std::span<const double>(&z, 1));
                if (std::abs(y_new - y) <= 1e-15 * (1.0 + std::abs(y_new))) {
                    y = y_new;
                    break;
                }
                y = y_new;
            }
            yk[b] = y;
            zk[b] = z;
        }
    }
    return sol;
}

TreeSolution tree_expectation(const std::vector<double>& leaf_values, const TimeGrid& grid,
                              double L, int sign) {
    check_levels(grid);
    const int n = grid.steps();
    if (leaf_values.size() != (1ull << n))
        throw std::invalid_argument("tree_expectation: leaf count mismatch");
    BinaryTree tree(grid);

    TreeSolution sol;
    sol.grid = grid;
    sol.y.resize(static_cast<std::size_t>(n) + 1);
    sol.z.resize(static_cast<std::size_t>(n));
    sol.y[static_cast<std::size_t>(n)] = leaf_values;
    for (int k = 0; k < n; ++k) sol.z[static_cast<std::size_t>(k)].assign(1ull << k, 0.0);
    const double sqdt = std::sqrt(grid.dt());
    for (int k = n - 1; k >= 0; --k) {
        const auto& y_next = sol.y[static_cast<std::size_t>(k) + 1];
        auto& yk = sol.y[static_cast<std::size_t>(k)];
        yk.assign(1ull << k, 0.0);
        for (std::uint32_t b = 0; b < (1u << k); ++b) {
            const double up = y_next[b | (1u << k)];
            const double down = y_next[b];
            yk[b] = tree.one_step(up, down, L, sign);
            sol.z[static_cast<std::size_t>(k)][b] = (up - down) / (2.0 * sqdt);
        }
    }
    return sol;
}

TreeStoppingValue optimal_stop_tree(const PathFunctional& payoff,
                                    const GridStoppingTime& tau_bound, double L,
                                    const TimeGrid& grid, int sign) {
    check_levels(grid);
    if (sign != -1 && sign != 1) throw std::invalid_argument("optimal_stop_tree: sign");
    BinaryTree tree(grid);
    const int n = grid.steps();

    TreeStoppingValue sv;
    sv.grid = grid;
    sv.y.resize(static_cast<std::size_t>(n) + 1);
    sv.x.resize(static_cast<std::size_t>(n) + 1);
    sv.dk.resize(static_cast<std::size_t>(n) + 1);
    sv.contact.resize(static_cast<std::size_t>(n) + 1);
    sv.stop_index.resize(static_cast<std::size_t>(n) + 1);

    // Settle the bound rule per node first: a node is post-stop when the rule,
    // evaluated on its frozen path, fires at or before its level.
    for (int k = 0; k <= n; ++k) {
        const std::size_t cnt = 1ull << k;
        sv.stop_index[static_cast<std::size_t>(k)].assign(cnt, -1);
        sv.x[static_cast<std::size_t>(k)].assign(cnt, 0.0);
        for (std::uint32_t b = 0; b < cnt; ++b) {
            DiscretePath path = tree.node_path(k, b);
            const int s = tau_bound(path);
            if (s <= k || k == n)
                sv.stop_index[static_cast<std::size_t>(k)][b] = std::min(s, k);
            sv.x[static_cast<std::size_t>(k)][b] = payoff(path, k);
        }
    }

    for (int k = n; k >= 0; --k) {
        const std::size_t cnt = 1ull << k;
        auto& yk = sv.y[static_cast<std::size_t>(k)];
        auto& dkk = sv.dk[static_cast<std::size_t>(k)];
        auto& ck = sv.contact[static_cast<std::size_t>(k)];
        yk.assign(cnt, 0.0);
        dkk.assign(cnt, 0.0);
        ck.assign(cnt, 0);
        for (std::uint32_t b = 0; b < cnt; ++b) {
            const int stop = sv.stop_index[static_cast<std::size_t>(k)][b];
            if (stop >= 0) {
                // settled: value is the payoff at the bound time
                DiscretePath path = tree.node_path(k, b);
                yk[b] = payoff(path, stop);
                ck[b] = 1;
                continue;
            }
            const double up = sv.y[static_cast<std::size_t>(k) + 1][b | (1u << k)];
            const double down = sv.y[static_cast<std::size_t>(k) + 1][b];
            const double cont = tree.one_step(up, down, L, sign);
            const double xk = sv.x[static_cast<std::size_t>(k)][b];
            if (sign < 0) {
                yk[b] = std::min(xk, cont);
                dkk[b] = cont - yk[b];
                ck[b] = (xk <= cont) ? 1 : 0;
            } else {
                yk[b] = std::max(xk, cont);
                dkk[b] = yk[b] - cont;
                ck[b] = (xk >= cont) ? 1 : 0;
            }
        }
    }

    // Per-leaf bound and first-contact times.
    const std::size_t leaves = 1ull << n;
    sv.tau_bound.assign(leaves, n);
    sv.tau_star.assign(leaves, n);
    for (std::uint32_t leaf = 0; leaf < leaves; ++leaf) {
        DiscretePath path = tree.node_path(n, leaf);
        sv.tau_bound[leaf] = tau_bound(path);
        for (int k = 0; k <= n; ++k) {
            const std::uint32_t b = leaf & ((k == 0) ? 0u : ((1u << k) - 1u));
            const int stop = sv.stop_index[static_cast<std::size_t>(k)][b];
            if (stop >= 0) {
                sv.tau_star[leaf] = stop;
                break;
            }
            if (sv.contact[static_cast<std::size_t>(k)][b]) {
                sv.tau_star[leaf] = k;
                break;
            }
        }
    }
    return sv;
}

}  // namespace ppde
