#include "ppde/derivatives.hpp"

#include <cmath>
#include <stdexcept>

#include "ppde/path_ops.hpp"

namespace ppde {

namespace {

void require_cadlag(const PathFunctional& u) {
    if (!u.has_cadlag_extension())
        throw std::domain_error("vertical derivative: functional '" + u.name() +
                                "' declares no cadlag extension; cannot bump");
}

std::vector<double> vertical_fd(const PathFunctional& u, const PathPoint& p, double h) {
    const DiscretePath& path = *p.path;
    std::vector<double> g(static_cast<std::size_t>(path.dim()), 0.0);
    for (int i = 0; i < path.dim(); ++i) {
        DiscretePath up = bump(path, p.k, i, +h);
        DiscretePath dn = bump(path, p.k, i, -h);
        g[static_cast<std::size_t>(i)] = (u(up, p.k) - u(dn, p.k)) / (2.0 * h);
    }
    return g;
}

std::vector<double> hessian_fd(const PathFunctional& u, const PathPoint& p, double h) {
    const DiscretePath& path = *p.path;
    const int d = path.dim();
    std::vector<double> m(static_cast<std::size_t>(d) * d, 0.0);
    const double u0 = u(p);
    for (int i = 0; i < d; ++i) {
        DiscretePath up = bump(path, p.k, i, +h);
        DiscretePath dn = bump(path, p.k, i, -h);
        m[static_cast<std::size_t>(i) * d + i] = (u(up, p.k) - 2.0 * u0 + u(dn, p.k)) / (h * h);
        for (int j = i + 1; j < d; ++j) {
            std::vector<double> s(static_cast<std::size_t>(d), 0.0);
            auto eval = [&](double hi, double hj) {
                s.assign(static_cast<std::size_t>(d), 0.0);
                s[static_cast<std::size_t>(i)] = hi;
                s[static_cast<std::size_t>(j)] = hj;
                DiscretePath b = bump(path, p.k, std::span<const double>(s));
                return u(b, p.k);
            };
            const double v =
                (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h);
            m[static_cast<std::size_t>(i) * d + j] = v;
            m[static_cast<std::size_t>(j) * d + i] = v;
        }
    }
    return m;
}

double horizontal_fd(const PathFunctional& u, const PathPoint& p, int delta_steps) {
    const DiscretePath& path = *p.path;
    const int n = path.grid().steps();
    if (p.k >= n) {
        // Left-limit rule at the horizon.
        PathPoint q{p.path, n - 1};
        return horizontal_fd(u, q, delta_steps);
    }
    if (delta_steps < 1 || p.k + delta_steps > n)
        throw std::invalid_argument("horizontal_derivative: delta not representable on grid");
    DiscretePath frozen = freeze(path, p.k);
    const double delta = delta_steps * path.grid().dt();
    return (u(frozen, p.k + delta_steps) - u(*p.path, p.k)) / delta;
}

}  // namespace

double default_vertical_step(const DiscretePath& path, int k) {
    return 1e-4 * (1.0 + uniform_norm(path, k));
}

std::vector<double> vertical_derivative(const PathFunctional& u, const PathPoint& p, double h) {
    require_cadlag(u);
    if (!(h > 0.0)) throw std::invalid_argument("vertical_derivative: h must be > 0");
    return vertical_fd(u, p, h);
}

std::vector<double> vertical_hessian(const PathFunctional& u, const PathPoint& p, double h) {
    require_cadlag(u);
    if (!(h > 0.0)) throw std::invalid_argument("vertical_hessian: h must be > 0");
    return hessian_fd(u, p, h);
}

double horizontal_derivative(const PathFunctional& u, const PathPoint& p, int delta_steps) {
    return horizontal_fd(u, p, delta_steps);
}

namespace {

DerivativeReport build_report(const PathFunctional& u, const PathPoint& p, double h,
                              int delta_steps, bool prefer_analytic) {
    const DiscretePath& path = *p.path;
    const int d = path.dim();
    DerivativeReport rep;
    rep.h = (h > 0.0) ? h : default_vertical_step(path, p.k);
    rep.delta = delta_steps * path.grid().dt();

    const bool can_bump = u.has_cadlag_extension();
    double gap = 0.0;

    std::vector<double> dx_h, dx_h2, dxx_h, dxx_h2;
    if (can_bump) {
        dx_h = vertical_fd(u, p, rep.h);
        dx_h2 = vertical_fd(u, p, rep.h / 2.0);
        dxx_h = hessian_fd(u, p, rep.h);
        dxx_h2 = hessian_fd(u, p, rep.h / 2.0);
        for (int i = 0; i < d; ++i)
            gap = std::max(gap, std::abs(dx_h[static_cast<std::size_t>(i)] -
                                         dx_h2[static_cast<std::size_t>(i)]));
        for (std::size_t i = 0; i < dxx_h.size(); ++i)
            gap = std::max(gap, std::abs(dxx_h[i] - dxx_h2[i]));
    }

    double dt_1 = horizontal_fd(u, p, delta_steps);
    const int n = path.grid().steps();
    const int k_eff = std::min(p.k, n - 1);
    if (k_eff + 2 * delta_steps <= n) {
        double dt_2 = horizontal_fd(u, PathPoint{p.path, k_eff}, 2 * delta_steps);
        gap = std::max(gap, std::abs(dt_1 - dt_2));
    }

    if (prefer_analytic && u.has_analytic_time_derivative())
        rep.dt = u.analytic_time_derivative(p);
    else
        rep.dt = dt_1;

    if (prefer_analytic && u.has_analytic_space_derivative())
        rep.dx = u.analytic_space_derivative(p);
    else if (can_bump)
        rep.dx = dx_h2;
    else
        rep.dx.assign(static_cast<std::size_t>(d), 0.0);

    if (prefer_analytic && u.has_analytic_space_hessian())
        rep.dxx = u.analytic_space_hessian(p);
    else if (can_bump)
        rep.dxx = dxx_h2;
    else
        rep.dxx.assign(static_cast<std::size_t>(d) * d, 0.0);

    // Symmetrize whatever we ended up with.
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const std::size_t ij = static_cast<std::size_t>(i) * d + j;
            const std::size_t ji = static_cast<std::size_t>(j) * d + i;
            const double s = 0.5 * (rep.dxx[ij] + rep.dxx[ji]);
            rep.dxx[ij] = rep.dxx[ji] = s;
        }

    rep.richardson_gap = gap;
    return rep;
}

}  // namespace

DerivativeReport derivative_report(const PathFunctional& u, const PathPoint& p, double h,
                                   int delta_steps) {
    return build_report(u, p, h, delta_steps, true);
}

DerivativeReport numerical_derivative_report(const PathFunctional& u, const PathPoint& p,
                                             double h, int delta_steps) {
    return build_report(u, p, h, delta_steps, false);
}

ConsistencyCheck check_derivative_consistency(const PathFunctional& u, const PathPoint& p) {
    DerivativeReport num = numerical_derivative_report(u, p);
    ConsistencyCheck c;
    c.tolerance = std::max(1e-4, 10.0 * num.richardson_gap);
    auto track = [&c](double a, double b) { c.worst = std::max(c.worst, std::abs(a - b)); };
    if (u.has_analytic_time_derivative()) track(u.analytic_time_derivative(p), num.dt);
    if (u.has_analytic_space_derivative()) {
        auto a = u.analytic_space_derivative(p);
        for (std::size_t i = 0; i < a.size(); ++i) track(a[i], num.dx[i]);
    }
    if (u.has_analytic_space_hessian()) {
        auto a = u.analytic_space_hessian(p);
        for (std::size_t i = 0; i < a.size(); ++i) track(a[i], num.dxx[i]);
    }
    c.passed = c.worst <= c.tolerance;
    return c;
}

}  // namespace ppde
