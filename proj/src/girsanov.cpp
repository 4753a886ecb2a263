#include "ppde/girsanov.hpp"

#include <cmath>
#include <stdexcept>

namespace ppde {

DriftControl constant_drift(std::vector<double> b) {
    DriftControl c;
    double bound = 0.0;
    for (double x : b) bound = std::max(bound, std::abs(x));
    c.bound = bound;
    c.description = "constant drift";
    c.beta = [b = std::move(b)](int, const PathPoint&, std::span<double> out) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = b[i % b.size()];
    };
    return c;
}

namespace {
void check_beta(std::span<const double> beta, double bound) {
    for (double x : beta)
        if (std::abs(x) > bound + 1e-12)
            throw std::domain_error("drift control exceeds its component bound");
}
}  // namespace

GirsanovWeight girsanov_weight(const BrownianBatch& batch, const DriftControl& control,
                               ExecPolicy exec) {
    const int n = batch.grid().steps();
    const int d = batch.dim();
    const int m = batch.num_paths();
    const int k0 = batch.start_index();
    const double dt = batch.grid().dt();

    GirsanovWeight w;
    w.start_index = k0;
    w.num_paths = m;
    w.nodes = n + 1;
    w.m.assign(static_cast<std::size_t>(m) * (n + 1), 1.0);

    for_each_index(exec, m, [&](std::int64_t mi) {
        const int mm = static_cast<int>(mi);
        const DiscretePath& path = batch.path(mm);
        std::vector<double> beta(static_cast<std::size_t>(d));
        double logm = 0.0;
        for (int k = 0; k <= n; ++k) {
            w.m[static_cast<std::size_t>(mm) * (n + 1) + k] = std::exp(logm);
            if (k == n) break;
            if (k >= k0) {
                control.beta(k, PathPoint{&path, k}, beta);
                check_beta(beta, control.bound);
                double dot = 0.0, b2 = 0.0;
                for (int i = 0; i < d; ++i) {
                    dot += beta[static_cast<std::size_t>(i)] * batch.increment(mm, k, i);
                    b2 += beta[static_cast<std::size_t>(i)] * beta[static_cast<std::size_t>(i)];
                }
                logm += dot - 0.5 * b2 * dt;
            }
        }
    });
    return w;
}

WeightedMean tilted_expectation(const PathFunctional& xi, const BrownianBatch& batch,
                                const DriftControl& control, ExecPolicy exec) {
    const int m = batch.num_paths();
    const int n = batch.grid().steps();
    GirsanovWeight w = girsanov_weight(batch, control, exec);
    std::vector<double> prod(static_cast<std::size_t>(m));
    for_each_index(exec, m, [&](std::int64_t mi) {
        const int mm = static_cast<int>(mi);
        prod[static_cast<std::size_t>(mi)] = w.terminal(mm) * xi(batch.path(mm), n);
    });
    double mean = 0.0;
    for (double v : prod) mean += v;
    mean /= m;
    double ss = 0.0;
    for (double v : prod) ss += (v - mean) * (v - mean);
    const double sd = m > 1 ? std::sqrt(ss / (m - 1)) : 0.0;
    return {mean, sd / std::sqrt(static_cast<double>(m))};
}

WeightedMean tilted_expectation_resim(const PathFunctional& xi, const BrownianBatch& batch,
                                      const DriftControl& control, ExecPolicy exec) {
    const int m = batch.num_paths();
    const int n = batch.grid().steps();
    const int d = batch.dim();
    const int k0 = batch.start_index();
    const double dt = batch.grid().dt();

    std::vector<double> vals(static_cast<std::size_t>(m));
    for_each_index(exec, m, [&](std::int64_t mi) {
        const int mm = static_cast<int>(mi);
        // rebuild the path with the feedback drift folded in
        DiscretePath tilted = batch.path(mm);
        std::vector<double> beta(static_cast<std::size_t>(d));
        for (int k = k0; k < n; ++k) {
            control.beta(k, PathPoint{&tilted, k}, beta);
            check_beta(beta, control.bound);
            for (int i = 0; i < d; ++i)
                tilted.at(k + 1, i) = tilted.value(k, i) +
                                      batch.increment(mm, k, i) +
                                      beta[static_cast<std::size_t>(i)] * dt;
        }
        vals[static_cast<std::size_t>(mi)] = xi(tilted, n);
    });
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= m;
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double sd = m > 1 ? std::sqrt(ss / (m - 1)) : 0.0;
    return {mean, sd / std::sqrt(static_cast<double>(m))};
}

}  // namespace ppde
