#include "ppde/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ppde {
namespace catalog {

namespace {
std::vector<double> vec1(double x) { return {x}; }
}  // namespace

PathFunctional identity() {
    PathFunctional u("identity", [](const PathPoint& p) { return p.value(0); });
    u.with_time_derivative([](const PathPoint&) { return 0.0; })
        .with_space_derivative([](const PathPoint&) { return vec1(1.0); })
        .with_space_hessian([](const PathPoint&) { return vec1(0.0); });
    return u;
}

PathFunctional time_functional() {
    PathFunctional u("time", [](const PathPoint& p) { return p.time(); });
    u.with_time_derivative([](const PathPoint&) { return 1.0; })
        .with_space_derivative([](const PathPoint&) { return vec1(0.0); })
        .with_space_hessian([](const PathPoint&) { return vec1(0.0); });
    return u;
}

PathFunctional square_minus_t() {
    PathFunctional u("square_minus_t",
                     [](const PathPoint& p) { return p.value(0) * p.value(0) - p.time(); });
    u.with_time_derivative([](const PathPoint&) { return -1.0; })
        .with_space_derivative([](const PathPoint& p) { return vec1(2.0 * p.value(0)); })
        .with_space_hessian([](const PathPoint&) { return vec1(2.0); });
    return u;
}

PathFunctional running_integral() {
    auto eval = [](const PathPoint& p) {
        const double dt = p.path->grid().dt();
        double s = 0.0;
        for (int j = 0; j < p.k; ++j) s += p.path->value(j, 0) * dt;
        return s;
    };
    PathFunctional u("running_integral", eval);
    // Frozen continuation integrates the constant current value; a bump at the
    // current node carries no dt-mass in a left-endpoint sum.
    u.with_time_derivative([](const PathPoint& p) { return p.value(0); })
        .with_space_derivative([](const PathPoint&) { return vec1(0.0); })
        .with_space_hessian([](const PathPoint&) { return vec1(0.0); });
    return u;
}

PathFunctional trapezoid_integral() {
    auto eval = [](const PathPoint& p) {
        const double dt = p.path->grid().dt();
        double s = 0.0;
        for (int j = 0; j < p.k; ++j)
            s += 0.5 * (p.path->value(j, 0) + p.path->value(j + 1, 0)) * dt;
        return s;
    };
    PathFunctional u("trapezoid_integral", eval);
    u.with_time_derivative([](const PathPoint& p) { return p.value(0); });
    // Space derivatives of the trapezoid sum at the running node are h/2-sized
    // at grid scale; left to finite differences on purpose.
    return u;
}

PathFunctional running_max() {
    auto eval = [](const PathPoint& p) {
        double s = p.path->value(0, 0);
        for (int j = 1; j <= p.k; ++j) s = std::max(s, p.path->value(j, 0));
        return s;
    };
    return PathFunctional("running_max", eval);
}

PathFunctional heat_cos() {
    auto eval = [](const PathPoint& p) {
        const double T = p.path->grid().horizon();
        return std::exp(-(T - p.time()) / 2.0) * std::cos(p.value(0));
    };
    PathFunctional u("heat_cos", eval);
    u.with_time_derivative([](const PathPoint& p) {
         const double T = p.path->grid().horizon();
         return 0.5 * std::exp(-(T - p.time()) / 2.0) * std::cos(p.value(0));
     })
        .with_space_derivative([](const PathPoint& p) {
            const double T = p.path->grid().horizon();
            return vec1(-std::exp(-(T - p.time()) / 2.0) * std::sin(p.value(0)));
        })
        .with_space_hessian([](const PathPoint& p) {
            const double T = p.path->grid().horizon();
            return vec1(-std::exp(-(T - p.time()) / 2.0) * std::cos(p.value(0)));
        });
    return u;
}

PathFunctional cos_value() {
    PathFunctional u("cos_value", [](const PathPoint& p) { return std::cos(p.value(0)); });
    u.with_time_derivative([](const PathPoint&) { return 0.0; })
        .with_space_derivative([](const PathPoint& p) { return vec1(-std::sin(p.value(0))); })
        .with_space_hessian([](const PathPoint& p) { return vec1(-std::cos(p.value(0))); });
    return u;
}

PathFunctional abs_value() {
    return PathFunctional("abs_value", [](const PathPoint& p) { return std::abs(p.value(0)); });
}

PathFunctional by_name(const std::string& name) {
    if (name == "identity") return identity();
    if (name == "time") return time_functional();
    if (name == "square_minus_t") return square_minus_t();
    if (name == "running_integral") return running_integral();
    if (name == "trapezoid_integral") return trapezoid_integral();
    if (name == "running_max") return running_max();
    if (name == "heat_cos") return heat_cos();
    if (name == "cos_value") return cos_value();
    if (name == "abs_value") return abs_value();
    throw std::invalid_argument("unknown functional: " + name);
}

std::vector<std::string> functional_names() {
    return {"identity",          "time",        "square_minus_t",
            "running_integral",  "trapezoid_integral", "running_max",
            "heat_cos",          "cos_value",   "abs_value"};
}

Generator gen_zero() { return zero_generator(); }

Generator gen_linear_decay(double r) {
    Generator g;
    g.name = "linear_decay";
    g.f = [r](double, const PathPoint&, double y, std::span<const double>) { return -r * y; };
    g.bound = std::abs(r) * 10.0;  // bound over the |y| <= 10 range the lab uses
    g.lipschitz = std::abs(r);
    g.markovian = true;
    return g;
}

namespace {
double l1(std::span<const double> z) {
    double s = 0.0;
    for (double v : z) s += std::abs(v);
    return s;
}
}  // namespace

Generator gen_lower_envelope(double level) {
    Generator g;
    g.name = "lower_envelope";
    g.f = [level](double, const PathPoint&, double, std::span<const double> z) {
        return -level * l1(z);
    };
    g.bound = level * 10.0;
    g.lipschitz = level;
    g.markovian = true;
    return g;
}

Generator gen_upper_envelope(double level) {
    Generator g;
    g.name = "upper_envelope";
    g.f = [level](double, const PathPoint&, double, std::span<const double> z) {
        return level * l1(z);
    };
    g.bound = level * 10.0;
    g.lipschitz = level;
    g.markovian = true;
    return g;
}

Generator gen_smooth_nonlinear(double a) {
    Generator g;
    g.name = "smooth_nonlinear";
    g.f = [a](double, const PathPoint&, double y, std::span<const double> z) {
        return 0.5 * a * (std::cos(y) + std::sin(z.empty() ? 0.0 : z[0]));
    };
    g.bound = std::abs(a);
    g.lipschitz = 0.5 * std::abs(a);
    g.markovian = true;
    return g;
}

Generator generator_by_name(const std::string& name, double param) {
    if (name == "zero") return gen_zero();
    if (name == "linear_decay") return gen_linear_decay(param);
    if (name == "lower_envelope") return gen_lower_envelope(param);
    if (name == "upper_envelope") return gen_upper_envelope(param);
    if (name == "smooth_nonlinear") return gen_smooth_nonlinear(param);
    throw std::invalid_argument("unknown generator: " + name);
}

std::vector<std::string> generator_names() {
    return {"zero", "linear_decay", "lower_envelope", "upper_envelope", "smooth_nonlinear"};
}

TerminalFunctional term_value_clipped(double clip) {
    TerminalFunctional t;
    t.name = "value_clipped";
    t.g = [clip](const DiscretePath& p) {
        return std::clamp(p.value(p.grid().steps(), 0), -clip, clip);
    };
    t.bound = clip;
    t.modulus = "1-Lipschitz in the terminal value";
    return t;
}

TerminalFunctional term_cos() {
    TerminalFunctional t;
    t.name = "cos_terminal";
    t.g = [](const DiscretePath& p) { return std::cos(p.value(p.grid().steps(), 0)); };
    t.bound = 1.0;
    t.modulus = "1-Lipschitz in the terminal value";
    return t;
}

TerminalFunctional term_integral() {
    TerminalFunctional t;
    t.name = "integral";
    t.g = [](const DiscretePath& p) {
        const double dt = p.grid().dt();
        double s = 0.0;
        for (int j = 0; j < p.grid().steps(); ++j) s += p.value(j, 0) * dt;
        return s;
    };
    t.bound = 50.0;
    t.modulus = "T-Lipschitz in the uniform norm";
    return t;
}

TerminalFunctional term_running_max_clipped(double clip) {
    TerminalFunctional t;
    t.name = "running_max_clipped";
    t.g = [clip](const DiscretePath& p) {
        double s = p.value(0, 0);
        for (int j = 1; j <= p.grid().steps(); ++j) s = std::max(s, p.value(j, 0));
        return std::clamp(s, -clip, clip);
    };
    t.bound = clip;
    t.modulus = "1-Lipschitz in the uniform norm";
    return t;
}

TerminalFunctional term_constant(double c) {
    TerminalFunctional t;
    t.name = "constant";
    t.g = [c](const DiscretePath&) { return c; };
    t.bound = std::abs(c);
    t.modulus = "constant";
    return t;
}

TerminalFunctional terminal_by_name(const std::string& name, double param) {
    if (name == "value_clipped") return term_value_clipped(param);
    if (name == "cos_terminal") return term_cos();
    if (name == "integral") return term_integral();
    if (name == "running_max_clipped") return term_running_max_clipped(param);
    if (name == "constant") return term_constant(param);
    throw std::invalid_argument("unknown terminal: " + name);
}

std::vector<std::string> terminal_names() {
    return {"value_clipped", "cos_terminal", "integral", "running_max_clipped", "constant"};
}

}  // namespace catalog
}  // namespace ppde
