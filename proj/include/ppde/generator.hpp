#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>

#include "ppde/path.hpp"

namespace ppde {

// Driver f(t, path prefix, y, z) of the backward equation, with its bound and
// Lipschitz constant in (y, z). Drivers must be evaluable on cadlag paths
// (bump-carrying prefixes) whenever cadlag_extension is set; the library only
// probes vertical derivatives through such drivers.
struct Generator {
    using Fn = std::function<double(double t, const PathPoint&, double y,
                                    std::span<const double> z)>;

    std::string name;
    Fn f;
    double bound = 0.0;
    double lipschitz = 0.0;  // L0
    bool markovian = false;
    bool cadlag_extension = true;
    bool identically_zero = false;

    double operator()(double t, const PathPoint& p, double y, std::span<const double> z) const {
        return f(t, p, y, z);
    }
};

inline Generator zero_generator() {
    Generator g;
    g.name = "zero";
    g.f = [](double, const PathPoint&, double, std::span<const double>) { return 0.0; };
    g.bound = 0.0;
    g.lipschitz = 0.0;
    g.markovian = true;
    g.identically_zero = true;
    return g;
}

// Terminal payoff g(path on [0, T]).
struct TerminalFunctional {
    std::string name;
    std::function<double(const DiscretePath&)> g;
    double bound = 0.0;
    std::string modulus;  // description of the continuity modulus in the path

    double operator()(const DiscretePath& path) const { return g(path); }
};

}  // namespace ppde
