#pragma once

#include <span>
#include <string>
#include <vector>

#include "ppde/brownian.hpp"
#include "ppde/exec.hpp"

namespace ppde {

// Polynomial regression basis over per-path features at a node: the current
// value, the left-sum running integral, the running max and the running min
// (per coordinate), all monomials up to the given total degree. The constant
// is always included, which the solvers rely on (projections preserve means).
struct BasisSpec {
    int degree = 2;
    bool use_value = true;
    bool use_integral = true;
    bool use_max = true;
    bool use_min = true;

    int num_base_features(int dim) const {
        const int flags = (use_value ? 1 : 0) + (use_integral ? 1 : 0) + (use_max ? 1 : 0) +
                          (use_min ? 1 : 0);
        return flags * dim;
    }
};

BasisSpec markov_basis(int degree);

struct RegressionFit {
    std::vector<double> coef;  // per monomial; dropped columns carry 0
    double r2 = 0.0;
    int dropped_columns = 0;
};

// Per-node conditional-expectation estimator on a path batch. set_node builds
// the design matrix and its Gram matrix once; fit/predict reuse them for every
// target at that node. All reductions run in fixed path order, so results are
// independent of the execution policy.
class ConditionalRegression {
public:
    ConditionalRegression(const BrownianBatch& batch, const BasisSpec& spec, ExecPolicy exec);

    int num_monomials() const { return static_cast<int>(expo_.size()); }

    // Active rows are path indices; they must be sorted ascending.
    void set_node(int k, std::span<const int> active);
    void set_node(int k);  // all paths

    int node() const { return node_; }
    const std::vector<int>& active() const { return active_; }

    RegressionFit fit(std::span<const double> targets) const;
    // fitted[i] for active path i (same order as the active list)
    void predict(const RegressionFit& fit, std::span<double> out) const;

    bool had_singular_warning() const { return singular_warning_; }
    std::string warning() const { return warning_; }

private:
    void build_feature_tables();
    void base_features(int m, int k, double* out) const;

    const BrownianBatch& batch_;
    BasisSpec spec_;
    ExecPolicy exec_;
    int nf_;                               // base features
    std::vector<std::vector<int>> expo_;   // monomial exponents over nf_ vars
    std::vector<double> integral_, max_, min_;  // per (m, node, coord) as needed

    int node_ = -1;
    std::vector<int> active_;
    std::vector<double> design_;  // active x p row-major
    std::vector<double> gram_;    // p x p
    mutable bool singular_warning_ = false;
    mutable std::string warning_;
};

// Exponent tuples of all monomials in nf variables with total degree <= degree,
// ordered by total degree then lexicographically (constant first). The solver
// drops columns from the back on singular Gram matrices, i.e. highest degree
// first.
std::vector<std::vector<int>> monomial_exponents(int nf, int degree);

}  // namespace ppde
