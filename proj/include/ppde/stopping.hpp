#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <utility>

#include "ppde/functional.hpp"
#include "ppde/path.hpp"

namespace ppde {

// A stopping rule valued on grid nodes. The rule must be non-anticipative:
// the returned index may depend only on the path up to that index (property
// tested by modifying the path strictly after the returned index).
struct GridStoppingTime {
    std::function<int(const DiscretePath&)> rule;
    std::string description;

    int operator()(const DiscretePath& path) const {
        int k = rule(path);
        return std::clamp(k, 0, path.grid().steps());
    }
};

// First node k with u(t_k, path) >= c, else N.
inline GridStoppingTime first_hitting(const PathFunctional& u, double c) {
    return GridStoppingTime{
        [u, c](const DiscretePath& path) {
            const int n = path.grid().steps();
            for (int k = 0; k <= n; ++k)
                if (u(path, k) >= c) return k;
            return n;
        },
        "first k with " + u.name() + " >= " + std::to_string(c)};
}

inline GridStoppingTime fixed_time(int k) {
    return GridStoppingTime{[k](const DiscretePath&) { return k; },
                            "deterministic node " + std::to_string(k)};
}

}  // namespace ppde
