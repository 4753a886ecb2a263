#include "ppde/ito.hpp"

#include <cmath>

#include "ppde/path_ops.hpp"

namespace ppde {

ItoResidualReport ito_residual(const PathFunctional& u, const BrownianBatch& batch,
                               const ItoOptions& opt) {
    const int n = batch.grid().steps();
    const int d = batch.dim();
    const int m = batch.num_paths();
    const int k0 = batch.start_index();
    const double dt = batch.grid().dt();

    ItoResidualReport rep;
    rep.max_abs.assign(static_cast<std::size_t>(m), 0.0);
    rep.rms.assign(static_cast<std::size_t>(m), 0.0);

    for_each_index(opt.exec, m, [&](std::int64_t mi) {
        const DiscretePath& path = batch.path(static_cast<int>(mi));
        double worst = 0.0, sumsq = 0.0;
        double u_k = u(path, k0);
        for (int k = k0; k < n; ++k) {
            const PathPoint p{&path, k};
            const double dt_u = u.has_analytic_time_derivative()
                                    ? u.analytic_time_derivative(p)
                                    : horizontal_derivative(u, p, opt.delta_steps);
            const double h = (opt.h > 0.0) ? opt.h : default_vertical_step(path, k);
            const std::vector<double> dx_u = u.has_analytic_space_derivative()
                                                 ? u.analytic_space_derivative(p)
                                                 : vertical_derivative(u, p, h);
            const std::vector<double> dxx_u = u.has_analytic_space_hessian()
                                                  ? u.analytic_space_hessian(p)
                                                  : vertical_hessian(u, p, h);
            double trace = 0.0;
            for (int i = 0; i < d; ++i) trace += dxx_u[static_cast<std::size_t>(i) * d + i];
            double drift = dt_u * dt + 0.5 * trace * dt;
            double diffusion = 0.0;
            for (int i = 0; i < d; ++i)
                diffusion += dx_u[static_cast<std::size_t>(i)] *
                             batch.value_increment(static_cast<int>(mi), k, i);
            const double u_k1 = u(path, k + 1);
            const double r = (u_k1 - u_k) - drift - diffusion;
            worst = std::max(worst, std::abs(r));
            sumsq += r * r;
            u_k = u_k1;
        }
        rep.max_abs[static_cast<std::size_t>(mi)] = worst;
        rep.rms[static_cast<std::size_t>(mi)] = std::sqrt(sumsq / (n - k0));
    });

    double total = 0.0;
    for (int mi = 0; mi < m; ++mi) {
        rep.max_abs_all = std::max(rep.max_abs_all, rep.max_abs[static_cast<std::size_t>(mi)]);
        const double r = rep.rms[static_cast<std::size_t>(mi)];
        total += r * r;
    }
    rep.rms_all = std::sqrt(total / m);
    return rep;
}

}  // namespace ppde
