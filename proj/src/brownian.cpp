#include "ppde/brownian.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ppde {

double GaussianStream::normal(std::uint64_t path, std::uint64_t node,
                              std::uint64_t coord) const {
    std::uint64_t s = mix(seed ^ (path * 0xd1342543de82ef95ULL));
    s = mix(s ^ (node * 0xaf251af3b0f025b5ULL));
    s = mix(s ^ (coord * 0x9e6c63d0a38271c9ULL));
    const std::uint64_t a = mix(s);
    const std::uint64_t b = mix(s + 0x9e3779b97f4a7c15ULL);
    // (0,1] uniforms from the top 53 bits; u1 bounded away from 0.
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

BrownianBatch sample_brownian(const TimeGrid& grid, int dim, int num_paths, std::uint64_t seed,
                              ExecPolicy exec) {
    DiscretePath origin(grid, dim, PathFlavor::continuous);
    return sample_brownian_from(PathPoint{&origin, 0}, num_paths, seed, exec);
}

BrownianBatch sample_brownian_from(const PathPoint& prefix, int num_paths, std::uint64_t seed,
                                   ExecPolicy exec) {
    if (num_paths < 1) throw std::invalid_argument("sample_brownian: need at least one path");
    const DiscretePath& pre = *prefix.path;
    const TimeGrid& grid = pre.grid();
    const int n = grid.steps();
    const int d = pre.dim();
    const int k0 = prefix.k;
    if (k0 < 0 || k0 >= n) throw std::invalid_argument("sample_brownian_from: bad anchor");

    BrownianBatch batch;
    batch.grid_ = grid;
    batch.dim_ = d;
    batch.m_ = num_paths;
    batch.seed_ = seed;
    batch.start_ = k0;
    batch.inc_.assign(static_cast<std::size_t>(num_paths) * n * d, 0.0);
    batch.paths_.assign(static_cast<std::size_t>(num_paths), pre);

    const GaussianStream gs{seed};
    const double sqdt = std::sqrt(grid.dt());
    double* inc = batch.inc_.data();
    DiscretePath* paths = batch.paths_.data();

    for_each_index(exec, num_paths, [&](std::int64_t m) {
        DiscretePath& p = paths[m];
        for (int k = k0; k < n; ++k) {
            for (int i = 0; i < d; ++i) {
                const double z = gs.normal(static_cast<std::uint64_t>(m),
                                           static_cast<std::uint64_t>(k),
                                           static_cast<std::uint64_t>(i)) *
                                 sqdt;
                inc[(static_cast<std::size_t>(m) * n + k) * d + i] = z;
                p.at(k + 1, i) = p.value(k, i) + z;
            }
        }
    });
    return batch;
}

BrownianBatch sample_sign_walk(const TimeGrid& grid, int dim, int num_paths, std::uint64_t seed,
                               ExecPolicy exec) {
    if (num_paths < 1) throw std::invalid_argument("sample_sign_walk: need at least one path");
    BrownianBatch batch;
    batch.grid_ = grid;
    batch.dim_ = dim;
    batch.m_ = num_paths;
    batch.seed_ = seed;
    batch.start_ = 0;
    const int n = grid.steps();
    batch.inc_.assign(static_cast<std::size_t>(num_paths) * n * dim, 0.0);
    batch.paths_.assign(static_cast<std::size_t>(num_paths),
                        DiscretePath(grid, dim, PathFlavor::continuous));

    const GaussianStream gs{seed};
    const double sqdt = std::sqrt(grid.dt());
    double* inc = batch.inc_.data();
    DiscretePath* paths = batch.paths_.data();
    for_each_index(exec, num_paths, [&](std::int64_t m) {
        DiscretePath& p = paths[m];
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < dim; ++i) {
                const std::uint64_t bits =
                    GaussianStream::mix(gs.seed ^ GaussianStream::mix(
                        static_cast<std::uint64_t>(m) * 0x9e3779b97f4a7c15ULL +
                        static_cast<std::uint64_t>(k) * 0xd1342543de82ef95ULL +
                        static_cast<std::uint64_t>(i)));
                const double z = (bits & 1ull) ? sqdt : -sqdt;
                inc[(static_cast<std::size_t>(m) * n + k) * dim + i] = z;
                p.at(k + 1, i) = p.value(k, i) + z;
            }
    });
    return batch;
}

MomentSummary increment_moments(const BrownianBatch& batch) {
    const int n = batch.grid().steps();
    const int d = batch.dim();
    const int m = batch.num_paths();
    const double dt = batch.grid().dt();
    MomentSummary s;
    for (int k = batch.start_index(); k < n; ++k)
        for (int i = 0; i < d; ++i) {
            double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
            for (int p = 0; p < m; ++p) {
                const double x = batch.increment(p, k, i);
                sum += x;
                sum2 += x * x;
                sum4 += x * x * x * x;
            }
            const double mean = sum / m;
            const double var = sum2 / m - mean * mean;
            const double se_mean = std::sqrt(var / m);
            const double var_of_var = std::max(0.0, sum4 / m - var * var);
            const double se_var = std::sqrt(var_of_var / m);
            s.mean_worst_z = std::max(s.mean_worst_z, std::abs(mean) / se_mean);
            s.var_worst_z = std::max(s.var_worst_z, std::abs(var - dt) / se_var);
        }
    return s;
}

}  // namespace ppde
