#pragma once

#include "ppde/path.hpp"

namespace ppde {

// sup-norm of the path over nodes 0..k: max |path(t_j)| (Euclidean per node).
double uniform_norm(const DiscretePath& path, int k);

// d_infty((t_k, p), (t_j, q)) = |t_k - t_j| + sup_s |p(t_k ^ s) - q(t_j ^ s)|,
// the sup running over all nodes of the common grid, each path frozen past
// its own time index.
double dist_inf(const PathPoint& p, const PathPoint& q);

// Path equal to omega before node t_index and omega(t_index) + omega2 after.
// omega2 lives on the suffix grid re-anchored at 0 and must start at 0.
DiscretePath concat(const DiscretePath& omega, int t_index, const DiscretePath& omega2);

// Values after node k replaced by the value at k.
DiscretePath freeze(const DiscretePath& path, int k);

// Cadlag copy with coordinate i at node k shifted by h; the bump is recorded.
DiscretePath bump(const DiscretePath& path, int k, int i, double h);

// Vector-valued bump at a single node (used by mixed second differences).
DiscretePath bump(const DiscretePath& path, int k, std::span<const double> shift);

// Suffix of the path starting at node k, re-anchored: time starts at 0 and
// values are offset so the new path starts at 0 (canonical shifted space).
DiscretePath suffix_path(const DiscretePath& path, int k);

}  // namespace ppde
