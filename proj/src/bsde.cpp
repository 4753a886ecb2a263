#include "ppde/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ppde/path_ops.hpp"

namespace ppde {

namespace {

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
}

}  // namespace

BSDESolution solve_bsde_regression(const Generator& f, const TerminalFunctional& g,
                                   const BrownianBatch& batch, const BSDESolveOptions& opt) {
    const int n = batch.grid().steps();
    const int d = batch.dim();
    const int m = batch.num_paths();
    const int k0 = batch.start_index();
    const double dt = batch.grid().dt();

    BSDESolution sol;
    sol.grid = batch.grid();
    sol.dim = d;
    sol.num_paths = m;
    sol.start_index = k0;
    sol.y.assign(static_cast<std::size_t>(m) * (n + 1), 0.0);
    sol.z.assign(static_cast<std::size_t>(m) * n * d, 0.0);

    auto Y = [&](int mi, int k) -> double& {
        return sol.y[static_cast<std::size_t>(mi) * (n + 1) + k];
    };
    auto Z = [&](int mi, int k, int i) -> double& {
        return sol.z[(static_cast<std::size_t>(mi) * n + k) * d + i];
    };

    // raw pathwise rollup g + sum f dt: its dispersion is the honest noise
    // estimate for the value at the origin (fitted values are smoothed and
    // would understate it)
    std::vector<double> raw(static_cast<std::size_t>(m));
    // recursion buffer, unclipped: the backward chain preserves sample means
    // (basis spans constants), which the zero-driver shortcut and the linear
    // stability identities rely on
    std::vector<double> ynext(static_cast<std::size_t>(m));
    for_each_index(opt.exec, m, [&](std::int64_t mi) {
        const double gv = g(batch.path(static_cast<int>(mi)));
        Y(static_cast<int>(mi), n) = gv;
        raw[static_cast<std::size_t>(mi)] = gv;
        ynext[static_cast<std::size_t>(mi)] = gv;
    });

    ConditionalRegression reg(batch, opt.basis, opt.exec);
    std::vector<double> target(static_cast<std::size_t>(m));
    std::vector<double> ey(static_cast<std::size_t>(m));
    std::vector<double> ztarget(static_cast<std::size_t>(m));
    std::vector<double> zfit(static_cast<std::size_t>(m));

    // a priori truncation level: |Y_k| <= max(|g| bound, observed |g|) +
    // (T - t_k) |f| bound. The true conditional expectations satisfy it, so
    // clamping the fitted ones only removes extrapolation overshoot.
    double clip_base = g.bound;
    for (int mi = 0; mi < m; ++mi)
        clip_base = std::max(clip_base, std::abs(raw[static_cast<std::size_t>(mi)]));

    for (int k = n - 1; k >= k0; --k) {
        for (int mi = 0; mi < m; ++mi) target[static_cast<std::size_t>(mi)] = ynext[static_cast<std::size_t>(mi)];

        if (k == k0) {
            // constant value at the origin of the solve: plain mean
            double mean = 0.0;
            for (int mi = 0; mi < m; ++mi) mean += target[static_cast<std::size_t>(mi)];
            mean /= m;
            std::fill(ey.begin(), ey.end(), mean);
            for (int i = 0; i < d; ++i) {
                double zm = 0.0;
                for (int mi = 0; mi < m; ++mi)
                    zm += (target[static_cast<std::size_t>(mi)] - mean) *
                          batch.increment(mi, k, i);
                zm /= (m * dt);
                for (int mi = 0; mi < m; ++mi) Z(mi, k, i) = zm;
            }
        } else {
            reg.set_node(k);
            RegressionFit fit = reg.fit(target);
            sol.min_r2 = std::min(sol.min_r2, fit.r2);
            reg.predict(fit, ey);
            for (int i = 0; i < d; ++i) {
                // control variate: project the innovation, not the raw target
                for (int mi = 0; mi < m; ++mi)
                    ztarget[static_cast<std::size_t>(mi)] =
                        (target[static_cast<std::size_t>(mi)] - ey[static_cast<std::size_t>(mi)]) *
                        batch.increment(mi, k, i) / dt;
                RegressionFit zf = reg.fit(ztarget);
                reg.predict(zf, zfit);
                for (int mi = 0; mi < m; ++mi) Z(mi, k, i) = zfit[static_cast<std::size_t>(mi)];
            }
        }

        const double t = batch.grid().time(k);
        const double clip = clip_base + (batch.grid().horizon() - t) * f.bound;
        for_each_index(opt.exec, m, [&](std::int64_t mi) {
            const int mm = static_cast<int>(mi);
            const DiscretePath& path = batch.path(mm);
            const PathPoint p{&path, k};
            std::vector<double> zk(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i) zk[static_cast<std::size_t>(i)] = Z(mm, k, i);
            const double e = ey[static_cast<std::size_t>(mi)];
            double yv = e;
            for (int it = 0; it <= opt.picard_iterations; ++it)
                yv = e + dt * f(t, p, yv, zk);
            ynext[static_cast<std::size_t>(mi)] = yv;
            Y(mm, k) = std::clamp(yv, -clip, clip);
            raw[static_cast<std::size_t>(mi)] += dt * f(t, p, yv, zk);
        });
    }

    if (reg.had_singular_warning()) sol.warnings.push_back(reg.warning());
    sol.y0 = ynext[0];  // constant across paths at the origin, unclipped
    sol.y0_se = sample_sd(raw) / std::sqrt(static_cast<double>(m));
    return sol;
}

U0Result u0_value(const PathPoint& prefix, const Generator& f, const TerminalFunctional& g,
                  const U0Options& opt) {
    const int n = prefix.path->grid().steps();
    if (prefix.k == n) return {g(*prefix.path), 0.0};

    BrownianBatch batch = sample_brownian_from(prefix, opt.num_paths, opt.seed, opt.solve.exec);

    if (f.identically_zero) {
        // chain of mean-preserving projections collapses to the plain mean
        std::vector<double> vals(static_cast<std::size_t>(opt.num_paths));
        for_each_index(opt.solve.exec, opt.num_paths, [&](std::int64_t mi) {
            vals[static_cast<std::size_t>(mi)] = g(batch.path(static_cast<int>(mi)));
        });
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        return {mean, sample_sd(vals) / std::sqrt(static_cast<double>(vals.size()))};
    }

    BSDESolution sol = solve_bsde_regression(f, g, batch, opt.solve);
    return {sol.y0, sol.y0_se};
}

PathFunctional u0_functional(const Generator& f, const TerminalFunctional& g,
                             const U0Options& opt) {
    PathFunctional u("u0[" + f.name + "," + g.name + "]",
                     [f, g, opt](const PathPoint& p) { return u0_value(p, f, g, opt).value; },
                     f.cadlag_extension);
    return u;
}

ModulusProbeReport modulus_probe(
    const Generator& f, const TerminalFunctional& g,
    const std::vector<std::pair<PathPoint, PathPoint>>& pairs,
    const std::function<double(const PathPoint&, const PathPoint&)>& rho, const U0Options& opt) {
    ModulusProbeReport rep;
    rep.rows.reserve(pairs.size());
    for (const auto& [p, q] : pairs) {
        U0Result a = u0_value(p, f, g, opt);
        U0Result b = u0_value(q, f, g, opt);
        ModulusProbeRow row;
        row.du = std::abs(a.value - b.value);
        row.d_inf = dist_inf(p, q);
        row.rho = rho ? rho(p, q) : 0.0;
        row.se = a.std_error + b.std_error;
        rep.rows.push_back(row);
    }
    // least-squares slope through the origin of |du| on (d_inf + rho)
    double num = 0.0, den = 0.0;
    for (const auto& r : rep.rows) {
        const double s = r.d_inf + r.rho;
        num += r.du * s;
        den += s * s;
    }
    rep.fitted_c = den > 0.0 ? num / den : 0.0;
    for (auto& r : rep.rows) {
        const double s = r.d_inf + r.rho;
        r.violation = r.du > rep.fitted_c * s + 3.0 * r.se + 1e-12;
        if (r.violation) ++rep.violations;
    }
    return rep;
}

ComparisonVerdict comparison_test(const Generator& f, const TerminalFunctional& g1,
                                  const TerminalFunctional& g2, const BrownianBatch& batch,
                                  const BSDESolveOptions& opt) {
    for (int mi = 0; mi < batch.num_paths(); ++mi)
        if (g1(batch.path(mi)) > g2(batch.path(mi)) + 1e-12)
            throw std::invalid_argument("comparison_test: g1 <= g2 violated on the batch");
    BSDESolution s1 = solve_bsde_regression(f, g1, batch, opt);
    BSDESolution s2 = solve_bsde_regression(f, g2, batch, opt);
    ComparisonVerdict v;
    v.y1_0 = s1.y0;
    v.y2_0 = s2.y0;
    v.tolerance = 3.0 * (s1.y0_se + s2.y0_se);
    v.ordered = s1.y0 <= s2.y0 + v.tolerance;
    return v;
}

TreeComparisonVerdict comparison_test_tree(const Generator& f, const TerminalFunctional& g1,
                                           const TerminalFunctional& g2, const TimeGrid& grid) {
    BinaryTree tree(grid);
    for (std::uint32_t b = 0; b < (1u << grid.steps()); ++b) {
        DiscretePath leaf = tree.node_path(grid.steps(), b);
        if (g1(leaf) > g2(leaf) + 1e-12)
            throw std::invalid_argument("comparison_test_tree: g1 <= g2 violated");
    }
    TreeSolution s1 = solve_bsde_tree(f, g1, grid);
    TreeSolution s2 = solve_bsde_tree(f, g2, grid);
    TreeComparisonVerdict v;
    v.worst_gap = -1e300;
    for (std::size_t k = 0; k < s1.y.size(); ++k)
        for (std::size_t b = 0; b < s1.y[k].size(); ++b)
            v.worst_gap = std::max(v.worst_gap, s1.y[k][b] - s2.y[k][b]);
    v.ordered_everywhere = v.worst_gap <= 1e-10;
    return v;
}

FMartingaleReport f_martingale_check(const PathFunctional& u, const Generator& f,
                                     const GridStoppingTime& tau1, const GridStoppingTime& tau2,
                                     const BrownianBatch& batch, const BSDESolveOptions& opt,
                                     double abs_tolerance) {
    const int n = batch.grid().steps();
    const int d = batch.dim();
    const int m = batch.num_paths();
    const double dt = batch.grid().dt();

    std::vector<int> k1(static_cast<std::size_t>(m)), k2(static_cast<std::size_t>(m));
    for (int mi = 0; mi < m; ++mi) {
        k1[static_cast<std::size_t>(mi)] = tau1(batch.path(mi));
        k2[static_cast<std::size_t>(mi)] = tau2(batch.path(mi));
        if (k1[static_cast<std::size_t>(mi)] > k2[static_cast<std::size_t>(mi)])
            throw std::invalid_argument("f_martingale_check: tau1 > tau2 on some path");
    }

    std::vector<double> v(static_cast<std::size_t>(m));
    for_each_index(opt.exec, m, [&](std::int64_t mi) {
        v[static_cast<std::size_t>(mi)] =
            u(batch.path(static_cast<int>(mi)), k2[static_cast<std::size_t>(mi)]);
    });

    ConditionalRegression reg(batch, opt.basis, opt.exec);
    const int kmax = *std::max_element(k2.begin(), k2.end());
    const int kmin = *std::min_element(k1.begin(), k1.end());

    std::vector<int> active;
    std::vector<double> target, ey, ztarget, zfit;
    for (int k = kmax - 1; k >= kmin; --k) {
        active.clear();
        for (int mi = 0; mi < m; ++mi)
            if (k1[static_cast<std::size_t>(mi)] <= k && k < k2[static_cast<std::size_t>(mi)])
                active.push_back(mi);
        if (active.empty()) continue;
        const int rows = static_cast<int>(active.size());
        target.resize(static_cast<std::size_t>(rows));
        ey.resize(static_cast<std::size_t>(rows));
        ztarget.resize(static_cast<std::size_t>(rows));
        zfit.resize(static_cast<std::size_t>(rows));
        for (int r = 0; r < rows; ++r)
            target[static_cast<std::size_t>(r)] = v[static_cast<std::size_t>(active[static_cast<std::size_t>(r)])];

        const int p = reg.num_monomials();
        const bool use_mean = rows < 4 * p;
        std::vector<std::vector<double>> zs(static_cast<std::size_t>(d),
                                            std::vector<double>(static_cast<std::size_t>(rows)));
        if (use_mean) {
            double mean = 0.0;
            for (double t : target) mean += t;
            mean /= rows;
            std::fill(ey.begin(), ey.end(), mean);
            for (int i = 0; i < d; ++i) {
                double zm = 0.0;
                for (int r = 0; r < rows; ++r)
                    zm += (target[static_cast<std::size_t>(r)] - mean) *
                          batch.increment(active[static_cast<std::size_t>(r)], k, i);
                zm /= (rows * dt);
                std::fill(zs[static_cast<std::size_t>(i)].begin(),
                          zs[static_cast<std::size_t>(i)].end(), zm);
            }
        } else {
            reg.set_node(k, active);
            RegressionFit fit = reg.fit(target);
            reg.predict(fit, ey);
            for (int i = 0; i < d; ++i) {
                for (int r = 0; r < rows; ++r)
                    ztarget[static_cast<std::size_t>(r)] =
                        (target[static_cast<std::size_t>(r)] - ey[static_cast<std::size_t>(r)]) *
                        batch.increment(active[static_cast<std::size_t>(r)], k, i) / dt;
                RegressionFit zf = reg.fit(ztarget);
                reg.predict(zf, zfit);
                zs[static_cast<std::size_t>(i)] = zfit;
            }
        }

        const double t = batch.grid().time(k);
        for (int r = 0; r < rows; ++r) {
            const int mi = active[static_cast<std::size_t>(r)];
            const DiscretePath& path = batch.path(mi);
            const PathPoint p2{&path, k};
            std::vector<double> zk(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i)
                zk[static_cast<std::size_t>(i)] = zs[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)];
            const double e = ey[static_cast<std::size_t>(r)];
            double yv = e;
            for (int it = 0; it <= opt.picard_iterations; ++it) yv = e + dt * f(t, p2, yv, zk);
            v[static_cast<std::size_t>(mi)] = yv;
        }
    }

    // group differences u_tau1 - rollback by the tau1 node
    FMartingaleReport rep;
    rep.abs_tolerance = abs_tolerance;
    std::vector<double> diff(static_cast<std::size_t>(m));
    for_each_index(opt.exec, m, [&](std::int64_t mi) {
        diff[static_cast<std::size_t>(mi)] =
            u(batch.path(static_cast<int>(mi)), k1[static_cast<std::size_t>(mi)]) -
            v[static_cast<std::size_t>(mi)];
    });
    for (int k = kmin; k <= kmax; ++k) {
        std::vector<double> grp;
        for (int mi = 0; mi < m; ++mi)
            if (k1[static_cast<std::size_t>(mi)] == k) grp.push_back(diff[static_cast<std::size_t>(mi)]);
        if (grp.empty()) continue;
        FMartingaleGroup gr;
        gr.k1 = k;
        gr.count = static_cast<int>(grp.size());
        for (double x : grp) gr.mean_diff += x;
        gr.mean_diff /= gr.count;
        gr.se = sample_sd(grp) / std::sqrt(static_cast<double>(gr.count));
        rep.groups.push_back(gr);
    }

    bool all_zero = true, all_low = true, all_high = true;
    for (const auto& gr : rep.groups) {
        const double tol = std::max(abs_tolerance, 3.0 * gr.se);
        if (std::abs(gr.mean_diff) > tol) all_zero = false;
        if (gr.mean_diff > tol) all_low = false;    // sub: u <= rollback, diff <= 0
        if (gr.mean_diff < -tol) all_high = false;  // super
    }
    if (all_zero)
        rep.verdict = MartingaleVerdict::martingale;
    else if (all_low)
        rep.verdict = MartingaleVerdict::submartingale;
    else if (all_high)
        rep.verdict = MartingaleVerdict::supermartingale;
    else
        rep.verdict = MartingaleVerdict::neither;
    return rep;
}

std::vector<StabilityRow> stability_experiment(
    const Generator& f, const std::function<Generator(double)>& f_eps,
    const std::vector<double>& eps_list, const TerminalFunctional& g, const BrownianBatch& batch,
    const BSDESolveOptions& opt) {
    BSDESolution base = solve_bsde_regression(f, g, batch, opt);
    std::vector<StabilityRow> rows;
    for (double eps : eps_list) {
        Generator fe = f_eps(eps);
        BSDESolution se = solve_bsde_regression(fe, g, batch, opt);
        StabilityRow row;
        row.eps = eps;
        row.y0 = se.y0;
        row.gap = std::abs(se.y0 - base.y0);
        // sampled sup-gap of the drivers over batch nodes and a (y, z) grid
        double sup = 0.0;
        const int probes = std::min(50, batch.num_paths());
        for (int mi = 0; mi < probes; ++mi) {
            const DiscretePath& path = batch.path(mi);
            for (int k = batch.start_index(); k < batch.grid().steps(); k += 5) {
                const PathPoint p{&path, k};
                for (double yv : {-1.0, 0.0, 1.0})
                    for (double zv : {-1.0, 0.0, 1.0}) {
                        const double t = batch.grid().time(k);
                        sup = std::max(sup, std::abs(fe(t, p, yv, std::span<const double>(&zv, 1)) -
                                                     f(t, p, yv, std::span<const double>(&zv, 1))));
                    }
            }
        }
        row.sup_f_gap = sup;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace ppde
