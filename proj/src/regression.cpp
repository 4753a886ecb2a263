#include "ppde/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ppde {

BasisSpec markov_basis(int degree) {
    BasisSpec b;
    b.degree = degree;
    b.use_value = true;
    b.use_integral = b.use_max = b.use_min = false;
    return b;
}

std::vector<std::vector<int>> monomial_exponents(int nf, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(nf), 0);
    // enumerate by total degree for a stable drop order
    for (int total = 0; total <= degree; ++total) {
        // recursive enumeration of compositions of `total` into nf parts
        std::vector<std::vector<int>> level;
        std::vector<int> tmp(static_cast<std::size_t>(nf), 0);
        auto rec = [&](auto&& self, int pos, int remaining) -> void {
            if (pos == nf - 1) {
                tmp[static_cast<std::size_t>(pos)] = remaining;
                level.push_back(tmp);
                return;
            }
            for (int e = remaining; e >= 0; --e) {
                tmp[static_cast<std::size_t>(pos)] = e;
                self(self, pos + 1, remaining - e);
            }
        };
        if (nf == 0) {
            if (total == 0) out.push_back({});
            continue;
        }
        rec(rec, 0, total);
        for (auto& v : level) out.push_back(std::move(v));
    }
    (void)cur;
    return out;
}

ConditionalRegression::ConditionalRegression(const BrownianBatch& batch, const BasisSpec& spec,
                                             ExecPolicy exec)
    : batch_(batch), spec_(spec), exec_(exec), nf_(spec.num_base_features(batch.dim())) {
    if (nf_ == 0) {
        spec_.use_value = true;
        nf_ = batch.dim();
    }
    expo_ = monomial_exponents(nf_, spec_.degree);
    build_feature_tables();
}

void ConditionalRegression::build_feature_tables() {
    const int m = batch_.num_paths();
    const int nodes = batch_.grid().steps() + 1;
    const int d = batch_.dim();
    const double dt = batch_.grid().dt();
    const std::size_t sz = static_cast<std::size_t>(m) * nodes * d;
    if (spec_.use_integral) integral_.assign(sz, 0.0);
    if (spec_.use_max) max_.assign(sz, 0.0);
    if (spec_.use_min) min_.assign(sz, 0.0);
    if (!spec_.use_integral && !spec_.use_max && !spec_.use_min) return;

    for_each_index(exec_, m, [&](std::int64_t mi) {
        const DiscretePath& p = batch_.path(static_cast<int>(mi));
        for (int i = 0; i < d; ++i) {
            double acc = 0.0, hi = p.value(0, i), lo = p.value(0, i);
            for (int k = 0; k < nodes; ++k) {
                const std::size_t at = (static_cast<std::size_t>(mi) * nodes + k) * d + i;
                hi = std::max(hi, p.value(k, i));
                lo = std::min(lo, p.value(k, i));
                if (spec_.use_integral) integral_[at] = acc;
                if (spec_.use_max) max_[at] = hi;
                if (spec_.use_min) min_[at] = lo;
                acc += p.value(k, i) * dt;  // left sum: node k enters from k+1 on
            }
        }
    });
}

void ConditionalRegression::base_features(int m, int k, double* out) const {
    const int d = batch_.dim();
    const int nodes = batch_.grid().steps() + 1;
    int at = 0;
    const DiscretePath& p = batch_.path(m);
    for (int i = 0; i < d; ++i) {
        const std::size_t idx = (static_cast<std::size_t>(m) * nodes + k) * d + i;
        if (spec_.use_value) out[at++] = p.value(k, i);
        if (spec_.use_integral) out[at++] = integral_[idx];
        if (spec_.use_max) out[at++] = max_[idx];
        if (spec_.use_min) out[at++] = min_[idx];
    }
}

void ConditionalRegression::set_node(int k) {
    std::vector<int> all(static_cast<std::size_t>(batch_.num_paths()));
    std::iota(all.begin(), all.end(), 0);
    set_node(k, all);
}

void ConditionalRegression::set_node(int k, std::span<const int> active) {
    node_ = k;
    active_.assign(active.begin(), active.end());
    const int rows = static_cast<int>(active_.size());
    const int p = num_monomials();
    design_.assign(static_cast<std::size_t>(rows) * p, 0.0);

    double* X = design_.data();
    const auto& expo = expo_;
    const int nf = nf_;
    for_each_index(exec_, rows, [&](std::int64_t r) {
        std::vector<double> feat(static_cast<std::size_t>(nf));
        base_features(active_[static_cast<std::size_t>(r)], k, feat.data());
        for (int j = 0; j < p; ++j) {
            double v = 1.0;
            const auto& e = expo[static_cast<std::size_t>(j)];
            for (int q = 0; q < nf; ++q)
                for (int rep = 0; rep < e[static_cast<std::size_t>(q)]; ++rep)
                    v *= feat[static_cast<std::size_t>(q)];
            X[static_cast<std::size_t>(r) * p + j] = v;
        }
    });

    // Gram matrix: entry-parallel, path-serial, hence policy-independent.
    gram_.assign(static_cast<std::size_t>(p) * p, 0.0);
    double* G = gram_.data();
    const std::int64_t entries = static_cast<std::int64_t>(p) * (p + 1) / 2;
    for_each_index(exec_, entries, [&](std::int64_t e) {
        // map linear index to (i, j), i <= j
        int i = 0;
        std::int64_t rem = e;
        while (rem >= p - i) {
            rem -= p - i;
            ++i;
        }
        const int j = i + static_cast<int>(rem);
        double s = 0.0;
        for (int r = 0; r < rows; ++r)
            s += X[static_cast<std::size_t>(r) * p + i] * X[static_cast<std::size_t>(r) * p + j];
        G[static_cast<std::size_t>(i) * p + j] = s;
        G[static_cast<std::size_t>(j) * p + i] = s;
    });
}

RegressionFit ConditionalRegression::fit(std::span<const double> targets) const {
    const int rows = static_cast<int>(active_.size());
    const int p = num_monomials();
    if (static_cast<int>(targets.size()) != rows)
        throw std::invalid_argument("ConditionalRegression::fit: target size mismatch");

    // Right-hand side X^T y in fixed path order.
    Eigen::VectorXd b(p);
    for (int j = 0; j < p; ++j) {
        double s = 0.0;
        for (int r = 0; r < rows; ++r)
            s += design_[static_cast<std::size_t>(r) * p + j] * targets[static_cast<std::size_t>(r)];
        b(j) = s;
    }

    // Solve on a shrinking set of leading columns until the Gram matrix is
    // numerically nonsingular; dropped columns get zero coefficients.
    RegressionFit out;
    out.coef.assign(static_cast<std::size_t>(p), 0.0);
    int keep = p;
    Eigen::VectorXd sol;
    while (keep >= 1) {
        Eigen::MatrixXd G(keep, keep);
        for (int i = 0; i < keep; ++i)
            for (int j = 0; j < keep; ++j) G(i, j) = gram_[static_cast<std::size_t>(i) * p + j];
        Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
        bool ok = ldlt.info() == Eigen::Success;
        if (ok) {
            const auto& D = ldlt.vectorD();
            const double dmax = D.cwiseAbs().maxCoeff();
            for (int i = 0; i < keep; ++i)
                if (!(D(i) > 1e-13 * std::max(1.0, dmax))) ok = false;
        }
        if (ok) {
            sol = ldlt.solve(b.head(keep));
            if (sol.allFinite()) break;
            ok = false;
        }
        --keep;
    }
    if (keep < 1) {
        // Constant-only fallback: plain mean.
        keep = 1;
        double mean = 0.0;
        for (int r = 0; r < rows; ++r) mean += targets[static_cast<std::size_t>(r)];
        sol = Eigen::VectorXd::Constant(1, rows > 0 ? mean / rows : 0.0);
    }
    if (keep < p) {
        singular_warning_ = true;
        warning_ = "regression at node " + std::to_string(node_) + ": basis reduced to " +
                   std::to_string(keep) + "/" + std::to_string(p) + " columns";
    }
    for (int j = 0; j < keep; ++j) out.coef[static_cast<std::size_t>(j)] = sol(j);
    out.dropped_columns = p - keep;

    // R^2 against the fitted values.
    double sum = 0.0;
    for (int r = 0; r < rows; ++r) sum += targets[static_cast<std::size_t>(r)];
    const double mean = rows > 0 ? sum / rows : 0.0;
    double ss_tot = 0.0, ss_res = 0.0;
    for (int r = 0; r < rows; ++r) {
        double yhat = 0.0;
        for (int j = 0; j < p; ++j)
            yhat += design_[static_cast<std::size_t>(r) * p + j] * out.coef[static_cast<std::size_t>(j)];
        const double y = targets[static_cast<std::size_t>(r)];
        ss_res += (y - yhat) * (y - yhat);
        ss_tot += (y - mean) * (y - mean);
    }
    out.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return out;
}

void ConditionalRegression::predict(const RegressionFit& fit, std::span<double> out) const {
    const int rows = static_cast<int>(active_.size());
    const int p = num_monomials();
    if (static_cast<int>(out.size()) != rows)
        throw std::invalid_argument("ConditionalRegression::predict: out size mismatch");
    const double* X = design_.data();
    const double* c = fit.coef.data();
    double* o = out.data();
    for_each_index(exec_, rows, [&](std::int64_t r) {
        double s = 0.0;
        for (int j = 0; j < p; ++j) s += X[static_cast<std::size_t>(r) * p + j] * c[j];
        o[r] = s;
    });
}

}  // namespace ppde
