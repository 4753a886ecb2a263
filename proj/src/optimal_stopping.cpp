#include "ppde/optimal_stopping.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ppde {

namespace {

double sd_over_sqrt_m(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0)) /
           std::sqrt(static_cast<double>(v.size()));
}

StoppingValue stop_impl(const PathFunctional& payoff, const GridStoppingTime& tau_bound,
                        double L, const BrownianBatch& batch, const StoppingOptions& opt,
                        int sign) {
    if (L < 0.0) throw std::invalid_argument("optimal stopping: L must be >= 0");
    const int n = batch.grid().steps();
    const int d = batch.dim();
    const int m = batch.num_paths();
    const int k0 = batch.start_index();
    const double dt = batch.grid().dt();

    StoppingValue sv;
    sv.grid = batch.grid();
    sv.num_paths = m;
    sv.y.assign(static_cast<std::size_t>(m) * (n + 1), 0.0);
    sv.x.assign(static_cast<std::size_t>(m) * (n + 1), 0.0);
    sv.k_comp.assign(static_cast<std::size_t>(m) * (n + 1), 0.0);
    sv.tau_bound.assign(static_cast<std::size_t>(m), n);
    sv.tau_star.assign(static_cast<std::size_t>(m), n);

    auto Yv = [&](int mi, int k) -> double& {
        return sv.y[static_cast<std::size_t>(mi) * (n + 1) + k];
    };
    auto Xv = [&](int mi, int k) -> double& {
        return sv.x[static_cast<std::size_t>(mi) * (n + 1) + k];
    };

    std::vector<double> dk(static_cast<std::size_t>(m) * (n + 1), 0.0);
    std::vector<unsigned char> contact(static_cast<std::size_t>(m) * (n + 1), 0);

    for_each_index(opt.exec, m, [&](std::int64_t mi) {
        const int mm = static_cast<int>(mi);
        const DiscretePath& path = batch.path(mm);
        sv.tau_bound[static_cast<std::size_t>(mi)] =
            std::max(k0, std::min(n, tau_bound(path)));
        for (int k = k0; k <= n; ++k) {
            const double xv = payoff(path, k);
            if (!(std::abs(xv) <= opt.payoff_bound))
                throw std::domain_error("optimal stopping: unbounded payoff");
            Xv(mm, k) = xv;
        }
    });

    // terminal / bound layer
    for_each_index(opt.exec, m, [&](std::int64_t mi) {
        const int mm = static_cast<int>(mi);
        const int kb = sv.tau_bound[static_cast<std::size_t>(mi)];
        for (int k = kb; k <= n; ++k) {
            Yv(mm, k) = Xv(mm, kb);
            contact[static_cast<std::size_t>(mm) * (n + 1) + k] = 1;
        }
    });

    ConditionalRegression reg(batch, opt.basis, opt.exec);
    std::vector<int> active;
    std::vector<double> target, ey, ztarget, zfit;

    for (int k = n - 1; k >= k0; --k) {
        active.clear();
        for (int mi = 0; mi < m; ++mi)
            if (k < sv.tau_bound[static_cast<std::size_t>(mi)]) active.push_back(mi);
        if (active.empty()) continue;
        const int rows = static_cast<int>(active.size());
        target.resize(static_cast<std::size_t>(rows));
        ey.resize(static_cast<std::size_t>(rows));
        ztarget.resize(static_cast<std::size_t>(rows));
        zfit.resize(static_cast<std::size_t>(rows));
        for (int r = 0; r < rows; ++r)
            target[static_cast<std::size_t>(r)] = Yv(active[static_cast<std::size_t>(r)], k + 1);

        const int p = reg.num_monomials();
        std::vector<double> znorm(static_cast<std::size_t>(rows), 0.0);
        if (k == k0 || rows < 4 * p) {
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
                for (int r = 0; r < rows; ++r) znorm[static_cast<std::size_t>(r)] += std::abs(zm);
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
                for (int r = 0; r < rows; ++r)
                    znorm[static_cast<std::size_t>(r)] += std::abs(zfit[static_cast<std::size_t>(r)]);
            }
        }

        for (int r = 0; r < rows; ++r) {
            const int mi = active[static_cast<std::size_t>(r)];
            const double cont =
                ey[static_cast<std::size_t>(r)] + sign * L * znorm[static_cast<std::size_t>(r)] * dt;
            const double xv = Xv(mi, k);
            double yv;
            bool touch;
            if (sign < 0) {
                yv = std::min(xv, cont);
                touch = xv <= cont;
                dk[static_cast<std::size_t>(mi) * (n + 1) + k] = cont - yv;
            } else {
                yv = std::max(xv, cont);
                touch = xv >= cont;
                dk[static_cast<std::size_t>(mi) * (n + 1) + k] = yv - cont;
            }
            Yv(mi, k) = yv;
            contact[static_cast<std::size_t>(mi) * (n + 1) + k] = touch ? 1 : 0;
        }
    }

    // cumulative compensator and first contact
    for_each_index(opt.exec, m, [&](std::int64_t mi) {
        const int mm = static_cast<int>(mi);
        double acc = 0.0;
        for (int k = k0; k <= n; ++k) {
            sv.k_comp[static_cast<std::size_t>(mm) * (n + 1) + k] = acc;
            acc += dk[static_cast<std::size_t>(mm) * (n + 1) + k];
        }
        int ts = sv.tau_bound[static_cast<std::size_t>(mi)];
        for (int k = k0; k <= ts; ++k)
            if (contact[static_cast<std::size_t>(mm) * (n + 1) + k]) {
                ts = k;
                break;
            }
        sv.tau_star[static_cast<std::size_t>(mi)] = ts;
    });

    sv.y0 = sv.Y(0, k0);
    // noise proxy: dispersion of the payoff collected at the contact time
    std::vector<double> collected(static_cast<std::size_t>(m));
    for (int mi = 0; mi < m; ++mi)
        collected[static_cast<std::size_t>(mi)] =
            sv.X(mi, sv.tau_star[static_cast<std::size_t>(mi)]);
    sv.y0_se = sd_over_sqrt_m(collected);
    return sv;
}

std::vector<double> stopped_values(const StoppingValue& sv, const GridStoppingTime& rule,
                                   const BrownianBatch& batch, bool cap_at_tau_star) {
    const int m = batch.num_paths();
    std::vector<double> out(static_cast<std::size_t>(m));
    for (int mi = 0; mi < m; ++mi) {
        int k = rule(batch.path(mi));
        k = std::min(k, sv.tau_bound[static_cast<std::size_t>(mi)]);
        if (cap_at_tau_star) k = std::min(k, sv.tau_star[static_cast<std::size_t>(mi)]);
        k = std::max(k, batch.start_index());
        out[static_cast<std::size_t>(mi)] = sv.Y(mi, k);
    }
    return out;
}

}  // namespace

StoppingValue optimal_stop_lower(const PathFunctional& payoff, const GridStoppingTime& tau_bound,
                                 double L, const BrownianBatch& batch,
                                 const StoppingOptions& opt) {
    return stop_impl(payoff, tau_bound, L, batch, opt, -1);
}

StoppingValue optimal_stop_upper(const PathFunctional& payoff, const GridStoppingTime& tau_bound,
                                 double L, const BrownianBatch& batch,
                                 const StoppingOptions& opt) {
    return stop_impl(payoff, tau_bound, L, batch, opt, +1);
}

SubmartingaleReport submartingale_check_tree(const TreeStoppingValue& sv, double L,
                                             const std::vector<GridStoppingTime>& rules,
                                             double tolerance) {
    const int n = sv.grid.steps();
    BinaryTree tree(sv.grid);
    SubmartingaleReport rep;
    rep.y0 = sv.y0();
    rep.tolerance = tolerance;
    rep.submartingale_ok = true;
    rep.martingale_to_tau_star_ok = true;

    const std::size_t leaves = 1ull << n;
    for (const auto& rule : rules) {
        std::vector<double> stopped(leaves), capped(leaves);
        for (std::uint32_t leaf = 0; leaf < leaves; ++leaf) {
            DiscretePath path = tree.node_path(n, leaf);
            int k = std::min(rule(path), sv.tau_bound[leaf]);
            const std::uint32_t b = leaf & ((1u << k) - 1u);
            stopped[leaf] = sv.y[static_cast<std::size_t>(k)][k == 0 ? 0 : b];
            int kc = std::min(k, sv.tau_star[leaf]);
            const std::uint32_t bc = leaf & ((1u << kc) - 1u);
            capped[leaf] = sv.y[static_cast<std::size_t>(kc)][kc == 0 ? 0 : bc];
        }
        SubmartingaleRow row;
        row.rule = rule.description;
        row.value = tree_expectation(stopped, sv.grid, L, -1).y0();
        row.value_capped = tree_expectation(capped, sv.grid, L, -1).y0();
        rep.rows.push_back(row);
        if (row.value < rep.y0 - tolerance) rep.submartingale_ok = false;
        if (std::abs(row.value_capped - rep.y0) > tolerance)
            rep.martingale_to_tau_star_ok = false;
    }
    return rep;
}

SubmartingaleReport submartingale_check(const StoppingValue& sv, double L,
                                        const std::vector<GridStoppingTime>& rules,
                                        const BrownianBatch& batch, const StoppingOptions& opt) {
    SubmartingaleReport rep;
    rep.y0 = sv.y0;
    rep.submartingale_ok = true;
    rep.martingale_to_tau_star_ok = true;

    BSDESolveOptions bopt;
    bopt.basis = opt.basis;
    bopt.exec = opt.exec;
    for (const auto& rule : rules) {
        std::vector<double> stopped = stopped_values(sv, rule, batch, false);
        std::vector<double> capped = stopped_values(sv, rule, batch, true);
        TerminalFunctional ts, tc;
        const DiscretePath* base = &batch.path(0);
        ts.name = "stopped";
        ts.g = [&stopped, base](const DiscretePath& p) {
            return stopped[static_cast<std::size_t>(&p - base)];
        };
        tc.name = "capped";
        tc.g = [&capped, base](const DiscretePath& p) {
            return capped[static_cast<std::size_t>(&p - base)];
        };
        NlexpResult a = lower_expectation(ts, L, batch, NlexpMethod::bsde, bopt);
        NlexpResult c = lower_expectation(tc, L, batch, NlexpMethod::bsde, bopt);
        SubmartingaleRow row;
        row.rule = rule.description;
        row.value = a.value;
        row.value_capped = c.value;
        row.se = a.std_error + c.std_error;
        rep.rows.push_back(row);
        const double tol = std::max(rep.tolerance, 5.0 * row.se + 5e-3);
        if (row.value < rep.y0 - tol) rep.submartingale_ok = false;
        if (std::abs(row.value_capped - rep.y0) > tol) rep.martingale_to_tau_star_ok = false;
    }
    return rep;
}

}  // namespace ppde
