#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ppde/grid.hpp"

namespace ppde {

// Continuous paths are read as piecewise-linear between nodes and must start
// at 0; cadlag paths are piecewise-constant right-continuous and may carry a
// vertical bump marker. The bump is what vertical (space) derivatives probe.
enum class PathFlavor { continuous, cadlag };

struct BumpMarker {
    int node = 0;
    std::vector<double> shift;  // size d
};

class DiscretePath {
public:
    DiscretePath(TimeGrid grid, int dim, PathFlavor flavor)
        : grid_(grid), dim_(dim), flavor_(flavor),
          values_(static_cast<std::size_t>(grid.steps() + 1) * dim, 0.0) {
        if (dim < 1) throw std::invalid_argument("DiscretePath: dim must be >= 1");
    }

    static DiscretePath from_values(TimeGrid grid, int dim, PathFlavor flavor,
                                    std::vector<double> values) {
        DiscretePath p(grid, dim, flavor);
        if (values.size() != p.values_.size())
            throw std::invalid_argument("DiscretePath: values size mismatch");
        p.values_ = std::move(values);
        if (flavor == PathFlavor::continuous) {
            for (int i = 0; i < dim; ++i)
                if (p.values_[i] != 0.0)
                    throw std::invalid_argument("DiscretePath: continuous paths start at 0");
        }
        return p;
    }

    const TimeGrid& grid() const { return grid_; }
    int dim() const { return dim_; }
    int nodes() const { return grid_.steps() + 1; }
    PathFlavor flavor() const { return flavor_; }

    double value(int k, int i = 0) const { return values_[idx(k, i)]; }
    std::span<const double> node(int k) const {
        return {values_.data() + idx(k, 0), static_cast<std::size_t>(dim_)};
    }
    std::span<const double> raw() const { return values_; }

    const std::optional<BumpMarker>& bump_marker() const { return bump_; }

    // Mutating access for builders; library operations treat paths as
    // immutable and return modified copies.
    double& at(int k, int i = 0) { return values_[idx(k, i)]; }
    void set_flavor(PathFlavor f) { flavor_ = f; }
    void set_bump_marker(BumpMarker b) { bump_ = std::move(b); }

private:
    std::size_t idx(int k, int i) const {
        if (k < 0 || k > grid_.steps()) throw std::out_of_range("DiscretePath: node index");
        if (i < 0 || i >= dim_) throw std::out_of_range("DiscretePath: coordinate index");
        return static_cast<std::size_t>(k) * dim_ + i;
    }

    TimeGrid grid_;
    int dim_;
    PathFlavor flavor_;
    std::vector<double> values_;
    std::optional<BumpMarker> bump_;
};

// A point (t_k, path restricted to [0, t_k]). Functional evaluation at a
// PathPoint may only read values up to index k; the paths test suite checks
// that property for every functional in the catalog.
struct PathPoint {
    const DiscretePath* path = nullptr;
    int k = 0;

    double time() const { return path->grid().time(k); }
    double value(int i = 0) const { return path->value(k, i); }
};

inline PathPoint at_node(const DiscretePath& p, int k) { return PathPoint{&p, k}; }

}  // namespace ppde
