#include "ppde/path_ops.hpp"

#include <cmath>

namespace ppde {

double uniform_norm(const DiscretePath& path, int k) {
    if (k < 0 || k > path.grid().steps())
        throw std::out_of_range("uniform_norm: index out of range");
    double best = 0.0;
    for (int j = 0; j <= k; ++j) {
        double s = 0.0;
        for (int i = 0; i < path.dim(); ++i) s += path.value(j, i) * path.value(j, i);
        best = std::max(best, s);
    }
    return std::sqrt(best);
}

double dist_inf(const PathPoint& p, const PathPoint& q) {
    const DiscretePath& a = *p.path;
    const DiscretePath& b = *q.path;
    if (a.grid() != b.grid()) throw std::invalid_argument("dist_inf: incompatible grids");
    if (a.dim() != b.dim()) throw std::invalid_argument("dist_inf: dimension mismatch");
    const int n = a.grid().steps();
    double sup = 0.0;
    for (int s = 0; s <= n; ++s) {
        const int ka = std::min(s, p.k);
        const int kb = std::min(s, q.k);
        double d2 = 0.0;
        for (int i = 0; i < a.dim(); ++i) {
            const double d = a.value(ka, i) - b.value(kb, i);
            d2 += d * d;
        }
        sup = std::max(sup, d2);
    }
    return std::abs(a.grid().time(p.k) - b.grid().time(q.k)) + std::sqrt(sup);
}

DiscretePath concat(const DiscretePath& omega, int t_index, const DiscretePath& omega2) {
    const int n = omega.grid().steps();
    if (t_index < 0 || t_index > n) throw std::invalid_argument("concat: bad node");
    if (omega2.grid().steps() != n - t_index || omega2.grid() != omega.grid().suffix(t_index))
        throw std::invalid_argument("concat: suffix grid mismatch");
    if (omega2.dim() != omega.dim()) throw std::invalid_argument("concat: dimension mismatch");
    for (int i = 0; i < omega2.dim(); ++i)
        if (omega2.value(0, i) != 0.0)
            throw std::invalid_argument("concat: shifted path must start at 0");

    DiscretePath out(omega.grid(), omega.dim(), omega.flavor());
    for (int k = 0; k <= n; ++k)
        for (int i = 0; i < omega.dim(); ++i)
            out.at(k, i) = (k <= t_index)
                               ? omega.value(k, i)
                               : omega.value(t_index, i) + omega2.value(k - t_index, i);
    return out;
}

DiscretePath freeze(const DiscretePath& path, int k) {
    if (k < 0 || k > path.grid().steps()) throw std::out_of_range("freeze: index");
    DiscretePath out = path;
    for (int j = k + 1; j <= path.grid().steps(); ++j)
        for (int i = 0; i < path.dim(); ++i) out.at(j, i) = path.value(k, i);
    return out;
}

DiscretePath bump(const DiscretePath& path, int k, int i, double h) {
    if (i < 0 || i >= path.dim()) throw std::out_of_range("bump: coordinate out of range");
    std::vector<double> shift(path.dim(), 0.0);
    shift[static_cast<std::size_t>(i)] = h;
    return bump(path, k, std::span<const double>(shift));
}

DiscretePath bump(const DiscretePath& path, int k, std::span<const double> shift) {
    if (static_cast<int>(shift.size()) != path.dim())
        throw std::invalid_argument("bump: shift size mismatch");
    DiscretePath out = path;
    out.set_flavor(PathFlavor::cadlag);
    for (int i = 0; i < path.dim(); ++i) out.at(k, i) += shift[static_cast<std::size_t>(i)];
    out.set_bump_marker(BumpMarker{k, std::vector<double>(shift.begin(), shift.end())});
    return out;
}

DiscretePath suffix_path(const DiscretePath& path, int k) {
    const int n = path.grid().steps();
    if (k < 0 || k >= n) throw std::out_of_range("suffix_path: index");
    DiscretePath out(path.grid().suffix(k), path.dim(), path.flavor());
    for (int j = k; j <= n; ++j)
        for (int i = 0; i < path.dim(); ++i)
            out.at(j - k, i) = path.value(j, i) - path.value(k, i);
    return out;
}

}  // namespace ppde
