#pragma once

#include <cstdint>
#include <vector>

#include "ppde/exec.hpp"
#include "ppde/grid.hpp"
#include "ppde/path.hpp"

namespace ppde {

// Counter-based standard normal stream: the draw for (path, node, coordinate)
// is a pure function of (seed, path, node, coordinate). This keeps batches
// reproducible independent of thread count, and it gives common random
// numbers across simulation windows: a solve on [t_k, T] consumes exactly the
// increments of nodes k..N-1, so value functions evaluated at nearby anchors
// or bumped prefixes share noise and difference quotients stay smooth.
struct GaussianStream {
    std::uint64_t seed = 0;

    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    double normal(std::uint64_t path, std::uint64_t node, std::uint64_t coord) const;
};

// M simulated Brownian paths on a uniform grid. Increments are N(0, dt I_d);
// path values are their running sums, stored as DiscretePath objects
// (optionally sitting on top of a fixed prefix, for solves started at an
// interior anchor).
class BrownianBatch {
public:
    const TimeGrid& grid() const { return grid_; }
    int dim() const { return dim_; }
    int num_paths() const { return m_; }
    std::uint64_t seed() const { return seed_; }
    int start_index() const { return start_; }

    const DiscretePath& path(int m) const { return paths_[static_cast<std::size_t>(m)]; }
    double increment(int m, int k, int i = 0) const {
        return inc_[(static_cast<std::size_t>(m) * grid_.steps() + k) * dim_ + i];
    }
    // Increment recomputed as a value difference; use this when exact
    // telescoping against path values matters.
    double value_increment(int m, int k, int i = 0) const {
        const DiscretePath& p = paths_[static_cast<std::size_t>(m)];
        return p.value(k + 1, i) - p.value(k, i);
    }

    friend BrownianBatch sample_brownian(const TimeGrid&, int, int, std::uint64_t, ExecPolicy);
    friend BrownianBatch sample_brownian_from(const PathPoint&, int, std::uint64_t, ExecPolicy);
    friend BrownianBatch sample_sign_walk(const TimeGrid&, int, int, std::uint64_t, ExecPolicy);

private:
    TimeGrid grid_{1.0, 1};
    int dim_ = 1;
    int m_ = 0;
    std::uint64_t seed_ = 0;
    int start_ = 0;  // nodes < start_ are a shared deterministic prefix
    std::vector<double> inc_;
    std::vector<DiscretePath> paths_;
};

BrownianBatch sample_brownian(const TimeGrid& grid, int dim, int num_paths, std::uint64_t seed,
                              ExecPolicy exec = ExecPolicy::parallel);

// Paths equal to the prefix up to its node index, Brownian afterwards. The
// increments at absolute node j are the same draws sample_brownian would
// produce at node j (window-independent stream).
BrownianBatch sample_brownian_from(const PathPoint& prefix, int num_paths, std::uint64_t seed,
                                   ExecPolicy exec = ExecPolicy::parallel);

// Symmetric random walk with increments +-sqrt(dt): the measure the binary
// tree computes under exactly. Used wherever the tree is the oracle.
BrownianBatch sample_sign_walk(const TimeGrid& grid, int dim, int num_paths, std::uint64_t seed,
                               ExecPolicy exec = ExecPolicy::parallel);

struct MomentSummary {
    double mean_worst_z = 0.0;  // worst |mean| / SE over (node, coord)
    double var_worst_z = 0.0;   // worst |var - dt| / SE(var)
};
MomentSummary increment_moments(const BrownianBatch& batch);

}  // namespace ppde
