#include "ppde/viscosity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ppde/path_ops.hpp"

namespace ppde {

double ppde_operator(const DerivativeReport& rep, double u_value, const PathPoint& p,
                     const Generator& f) {
    const int d = p.path->dim();
    double trace = 0.0;
    for (int i = 0; i < d; ++i) trace += rep.dxx[static_cast<std::size_t>(i) * d + i];
    return -rep.dt - 0.5 * trace - f(p.time(), p, u_value, rep.dx);
}

double ppde_operator(const PathFunctional& u, const PathPoint& p, const Generator& f) {
    DerivativeReport rep = derivative_report(u, p);
    return ppde_operator(rep, u(p), p, f);
}

ClassicalCheckReport classical_check(const PathFunctional& u, const Generator& f,
                                     const std::vector<PathPoint>& sample, double tol) {
    ClassicalCheckReport rep;
    rep.min_operator = 1e300;
    rep.max_operator = -1e300;
    for (const PathPoint& p : sample) {
        if (!u.has_cadlag_extension()) {
            ++rep.derivative_failures;
            continue;
        }
        DerivativeReport dr = derivative_report(u, p);
        // instability proxy: halving the step moves the estimates by a
        // non-vanishing fraction of their size (kinks, jumps)
        DerivativeReport num = numerical_derivative_report(u, p);
        double scale = std::abs(num.dt);
        for (double v : num.dx) scale = std::max(scale, std::abs(v));
        for (double v : num.dxx) scale = std::max(scale, std::abs(v));
        if (num.richardson_gap > 0.25 * (1.0 + scale)) {
            ++rep.derivative_failures;
            continue;
        }
        const double lv = ppde_operator(dr, u(p), p, f);
        rep.min_operator = std::min(rep.min_operator, lv);
        rep.max_operator = std::max(rep.max_operator, lv);
    }
    if (rep.derivative_failures > 0) {
        rep.verdict = ClassicalVerdict::neither;
        return rep;
    }
    const bool le = rep.max_operator <= tol;
    const bool ge = rep.min_operator >= -tol;
    if (le && ge)
        rep.verdict = ClassicalVerdict::solution;
    else if (le)
        rep.verdict = ClassicalVerdict::subsolution;
    else if (ge)
        rep.verdict = ClassicalVerdict::supersolution;
    else
        rep.verdict = ClassicalVerdict::neither;
    return rep;
}

TestFunction paraboloid(double value0, double a, std::vector<double> b, std::vector<double> q,
                        std::string name) {
    const int d = static_cast<int>(b.size());
    auto bv = std::make_shared<std::vector<double>>(std::move(b));
    auto qv = std::make_shared<std::vector<double>>(std::move(q));
    PathFunctional phi(
        name,
        [value0, a, bv, qv, d](const PathPoint& p) {
            double s = value0 + a * p.time();
            for (int i = 0; i < d; ++i) {
                s += (*bv)[static_cast<std::size_t>(i)] * p.value(i);
                for (int j = 0; j < d; ++j)
                    s += 0.5 * (*qv)[static_cast<std::size_t>(i) * d + j] * p.value(i) *
                         p.value(j);
            }
            return s;
        },
        true);
    phi.with_time_derivative([a](const PathPoint&) { return a; })
        .with_space_derivative([bv, qv, d](const PathPoint& p) {
            std::vector<double> g(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i) {
                g[static_cast<std::size_t>(i)] = (*bv)[static_cast<std::size_t>(i)];
                for (int j = 0; j < d; ++j)
                    g[static_cast<std::size_t>(i)] +=
                        (*qv)[static_cast<std::size_t>(i) * d + j] * p.value(j);
            }
            return g;
        })
        .with_space_hessian([qv](const PathPoint&) { return *qv; });
    TestFunction tf;
    tf.phi = std::move(phi);
    tf.name = std::move(name);
    return tf;
}

double shifted_operator_at_anchor(const TestFunction& phi, const PathPoint& anchor,
                                  const Generator& f) {
    if (!phi.phi.has_analytic_time_derivative() || !phi.phi.has_analytic_space_derivative() ||
        !phi.phi.has_analytic_space_hessian())
        throw std::invalid_argument("test functions need analytic derivatives");
    const int d = anchor.path->dim();
    const int n = anchor.path->grid().steps();
    if (anchor.k >= n) throw std::invalid_argument("anchor must be interior");
    DiscretePath zero_local(anchor.path->grid().suffix(anchor.k), d, PathFlavor::continuous);
    const PathPoint local0{&zero_local, 0};
    const double dt_phi = phi.phi.analytic_time_derivative(local0);
    const std::vector<double> dx_phi = phi.phi.analytic_space_derivative(local0);
    const std::vector<double> dxx_phi = phi.phi.analytic_space_hessian(local0);
    double trace = 0.0;
    for (int i = 0; i < d; ++i) trace += dxx_phi[static_cast<std::size_t>(i) * d + i];
    const double value0 = phi.phi(local0);
    return -dt_phi - 0.5 * trace - f(anchor.time(), anchor, value0, dx_phi);
}

ValueField field_from_functional(const PathFunctional& u) {
    ValueField v;
    v.name = u.name();
    v.cadlag_extension = u.has_cadlag_extension();
    v.eval = [u](const PathPoint& p) { return AnchoredValue{u(p), 0.0}; };
    return v;
}

ValueField field_from_solver(const Generator& f, const TerminalFunctional& g,
                             const U0Options& opt) {
    ValueField v;
    v.name = "u0[" + f.name + "," + g.name + "]";
    v.cadlag_extension = f.cadlag_extension;
    v.eval = [f, g, opt](const PathPoint& p) {
        U0Result r = u0_value(p, f, g, opt);
        return AnchoredValue{r.value, r.std_error};
    };
    return v;
}

ValueField add_time_ramp(const ValueField& u, double c) {
    ValueField v;
    v.name = u.name + "+ramp";
    v.cadlag_extension = u.cadlag_extension;
    auto base = u.eval;
    v.eval = [base, c](const PathPoint& p) {
        AnchoredValue a = base(p);
        const double T = p.path->grid().horizon();
        a.value += c * (T - p.time());
        return a;
    };
    return v;
}

LocalTreeField build_local_tree_field(const ValueField& u, const PathPoint& anchor, int steps,
                                      ExecPolicy exec) {
    const int n = anchor.path->grid().steps();
    const int k0 = anchor.k;
    const int m = std::min(steps, n - k0);
    if (m < 1) throw std::invalid_argument("local tree: anchor too close to the horizon");

    LocalTreeField field;
    field.local_grid = TimeGrid(m * anchor.path->grid().dt(), m);
    field.levels = m;
    field.u.resize(static_cast<std::size_t>(m) + 1);
    field.se.resize(static_cast<std::size_t>(m) + 1);
    field.u_anchor = u.eval(anchor).value;

    const double sqdt = std::sqrt(anchor.path->grid().dt());
    // enumerate nodes level by level; evaluations run in parallel per level
    for (int j = 0; j <= m; ++j) {
        const std::size_t cnt = 1ull << j;
        field.u[static_cast<std::size_t>(j)].assign(cnt, 0.0);
        field.se[static_cast<std::size_t>(j)].assign(cnt, 0.0);
        std::vector<double>& uj = field.u[static_cast<std::size_t>(j)];
        std::vector<double>& sj = field.se[static_cast<std::size_t>(j)];
        for_each_index(exec, static_cast<std::int64_t>(cnt), [&](std::int64_t b) {
            DiscretePath host = *anchor.path;
            double v = host.value(k0, 0);
            for (int l = 0; l < j; ++l) {
                v += ((static_cast<std::uint32_t>(b) >> l) & 1u) ? sqdt : -sqdt;
                host.at(k0 + l + 1, 0) = v;
            }
            for (int l = k0 + j + 1; l <= n; ++l) host.at(l, 0) = host.value(k0 + j, 0);
            AnchoredValue av = u.eval(PathPoint{&host, k0 + j});
            uj[static_cast<std::size_t>(b)] = av.value;
            sj[static_cast<std::size_t>(b)] = av.se;
        });
        for (double s : sj) field.max_se = std::max(field.max_se, s);
    }
    return field;
}

namespace {

// Optimal stopping of phi - u on the local tree, capped at the exit time of
// the radius ball (and the final level).
MembershipResult local_membership_dp(const TestFunction& phi, const LocalTreeField& field,
                                     double L, int side, const MembershipOptions& opt) {
    if (side != -1 && side != 1) throw std::invalid_argument("membership side");
    const int m = field.levels;
    BinaryTree tree(field.local_grid);

    std::vector<std::vector<double>> x(static_cast<std::size_t>(m) + 1);
    std::vector<std::vector<int>> stop(static_cast<std::size_t>(m) + 1);
    for (int j = 0; j <= m; ++j) {
        const std::size_t cnt = 1ull << j;
        x[static_cast<std::size_t>(j)].assign(cnt, 0.0);
        stop[static_cast<std::size_t>(j)].assign(cnt, -1);
        for (std::uint32_t b = 0; b < cnt; ++b) {
            DiscretePath local = tree.node_path(j, b);
            x[static_cast<std::size_t>(j)][b] =
                phi.phi(local, j) - field.u[static_cast<std::size_t>(j)][b];
            // exit rule: first level where |local value| >= radius, else cap at m
            int s = -1;
            double v = 0.0;
            const double sq = std::sqrt(field.local_grid.dt());
            for (int l = 1; l <= j; ++l) {
                v += ((b >> (l - 1)) & 1u) ? sq : -sq;
                if (std::abs(v) >= phi.loc_radius) {
                    s = l;
                    break;
                }
            }
            if (s >= 0 && s <= j)
                stop[static_cast<std::size_t>(j)][b] = s;
            else if (j == m)
                stop[static_cast<std::size_t>(j)][b] = m;
        }
    }

    // backward DP with per-node settling
    std::vector<std::vector<double>> y(static_cast<std::size_t>(m) + 1);
    const double sqdt = std::sqrt(field.local_grid.dt());
    for (int j = m; j >= 0; --j) {
        const std::size_t cnt = 1ull << j;
        y[static_cast<std::size_t>(j)].assign(cnt, 0.0);
        for (std::uint32_t b = 0; b < cnt; ++b) {
            const int s = stop[static_cast<std::size_t>(j)][b];
            if (s >= 0) {
                const std::uint32_t bs = b & ((1u << s) - 1u);
                y[static_cast<std::size_t>(j)][b] = x[static_cast<std::size_t>(s)][bs];
                continue;
            }
            const double up = y[static_cast<std::size_t>(j) + 1][b | (1u << j)];
            const double dn = y[static_cast<std::size_t>(j) + 1][b];
            const double mean = 0.5 * (up + dn);
            const double spread = 0.5 * std::abs(up - dn);
            const double cont = mean + side * L * sqdt * spread;
            const double xv = x[static_cast<std::size_t>(j)][b];
            y[static_cast<std::size_t>(j)][b] = (side < 0) ? std::min(xv, cont)
                                                           : std::max(xv, cont);
        }
    }

    MembershipResult r;
    r.optimum = y[0][0];
    r.tolerance = std::max(opt.abs_tol, 3.0 * field.max_se);
    if (side < 0)
        r.verdict = (r.optimum >= -r.tolerance) ? Membership::member : Membership::non_member;
    else
        r.verdict = (r.optimum <= r.tolerance) ? Membership::member : Membership::non_member;
    return r;
}

}  // namespace

MembershipResult membership_test_cached(const TestFunction& phi, const LocalTreeField& field,
                                        double L, int side, const MembershipOptions& opt) {
    return local_membership_dp(phi, field, L, side, opt);
}

MembershipResult membership_test(const TestFunction& phi, const ValueField& u,
                                 const PathPoint& anchor, double L, int side,
                                 const MembershipOptions& opt) {
    // anchor equality is a precondition
    DiscretePath zero_local(anchor.path->grid().suffix(anchor.k), anchor.path->dim(),
                            PathFlavor::continuous);
    const double phi0 = phi.phi(zero_local, 0);
    const AnchoredValue ua = u.eval(anchor);
    const double tol0 = std::max(opt.abs_tol, 3.0 * ua.se);
    if (std::abs(phi0 - ua.value) > tol0)
        throw std::invalid_argument("membership_test: phi(t,0) != u(t,omega) at the anchor");
    LocalTreeField field = build_local_tree_field(u, anchor, phi.loc_steps, opt.exec);
    return membership_test_cached(phi, field, L, side, opt);
}

std::vector<ViscosityReport> viscosity_falsifier(const ValueField& u, const Generator& f,
                                                 double L,
                                                 const std::vector<PathPoint>& anchors,
                                                 const FalsifierOptions& opt) {
    std::vector<ViscosityReport> reports;
    PathFunctional ufun = u.as_functional();

    for (std::size_t ai = 0; ai < anchors.size(); ++ai) {
        const PathPoint& anchor = anchors[static_cast<std::size_t>(ai)];
        const int d = anchor.path->dim();
        const AnchoredValue ua = u.eval(anchor);

        // Taylor data of the field at the anchor (vertical only; the time
        // slope is then chosen per offset so that L(phi) is exact).
        const double h = default_vertical_step(*anchor.path, anchor.k);
        std::vector<double> b_hat = vertical_derivative(ufun, anchor, h);
        std::vector<double> q_hat = vertical_hessian(ufun, anchor, h);

        LocalTreeField field = build_local_tree_field(u, anchor, opt.loc_steps,
                                                      opt.membership.exec);
        field.u_anchor = ua.value;

        std::vector<TestFunction> family;
        for (double delta : opt.operator_offsets)
            for (double gamma : opt.curvature_offsets) {
                std::vector<double> q = q_hat;
                for (int i = 0; i < d; ++i) q[static_cast<std::size_t>(i) * d + i] += gamma;
                double trace = 0.0;
                for (int i = 0; i < d; ++i) trace += q[static_cast<std::size_t>(i) * d + i];
                const double fval = f(anchor.time(), anchor, ua.value, b_hat);
                const double a = -0.5 * trace - fval - delta;
                char buf[64];
                std::snprintf(buf, sizeof(buf), "pb[d=%+.3f,g=%+.2f]", delta, gamma);
                TestFunction tf = paraboloid(ua.value, a, b_hat, q, buf);
                tf.loc_radius = opt.loc_radius;
                tf.loc_steps = opt.loc_steps;
                family.push_back(std::move(tf));
            }
        for (const TestFunction& extra : opt.extra) family.push_back(extra);

        int members_lower = 0, members_upper = 0;
        for (const TestFunction& tf : family) {
            const double lphi = shifted_operator_at_anchor(tf, anchor, f);
            for (int side : {-1, +1}) {
                MembershipResult mr = membership_test_cached(tf, field, L, side, opt.membership);
                ViscosityReport rep;
                rep.anchor_id = static_cast<int>(ai);
                rep.phi_id = tf.name;
                rep.side = side < 0 ? 'L' : 'U';
                rep.membership = mr.verdict;
                rep.optimum = mr.optimum;
                rep.tolerance = mr.tolerance;
                rep.l_phi = lphi;
                if (mr.verdict == Membership::member) {
                    (side < 0 ? members_lower : members_upper)++;
                    const bool violation =
                        (side < 0) ? (lphi > opt.l_tolerance) : (lphi < -opt.l_tolerance);
                    rep.verdict = violation ? "violation" : "consistent";
                } else {
                    rep.verdict = "consistent";
                }
                reports.push_back(std::move(rep));
            }
        }
        if (members_lower == 0 || members_upper == 0) {
            ViscosityReport rep;
            rep.anchor_id = static_cast<int>(ai);
            rep.phi_id = "(family)";
            rep.side = members_lower == 0 ? 'L' : 'U';
            rep.membership = Membership::inconclusive;
            rep.verdict = "vacuous";
            reports.push_back(std::move(rep));
        }
    }
    return reports;
}

Generator generator_transform(const Generator& f, double lambda) {
    Generator g;
    g.name = f.name + "~scaled";
    g.bound = f.bound;  // over the scaled range actually used
    g.lipschitz = f.lipschitz + std::abs(lambda);
    g.markovian = f.markovian;
    g.cadlag_extension = f.cadlag_extension;
    g.identically_zero = false;
    Generator base = f;
    g.f = [base, lambda](double t, const PathPoint& p, double y, std::span<const double> z) {
        const double down = std::exp(-lambda * t);
        std::vector<double> zs(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) zs[i] = down * z[i];
        return -lambda * y + std::exp(lambda * t) * base(t, p, down * y, zs);
    };
    return g;
}

PathFunctional exp_time_scale(const PathFunctional& u, double lambda) {
    PathFunctional out(
        u.name() + "*exp", [u, lambda](const PathPoint& p) {
            return std::exp(lambda * p.time()) * u(p);
        },
        u.has_cadlag_extension());
    if (u.has_analytic_time_derivative())
        out.with_time_derivative([u, lambda](const PathPoint& p) {
            const double e = std::exp(lambda * p.time());
            return lambda * e * u(p) + e * u.analytic_time_derivative(p);
        });
    if (u.has_analytic_space_derivative())
        out.with_space_derivative([u, lambda](const PathPoint& p) {
            auto g = u.analytic_space_derivative(p);
            const double e = std::exp(lambda * p.time());
            for (double& x : g) x *= e;
            return g;
        });
    if (u.has_analytic_space_hessian())
        out.with_space_hessian([u, lambda](const PathPoint& p) {
            auto m = u.analytic_space_hessian(p);
            const double e = std::exp(lambda * p.time());
            for (double& x : m) x *= e;
            return m;
        });
    return out;
}

}  // namespace ppde
