#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ppde/path.hpp"
#include "ppde/path_ops.hpp"

namespace ppde {

// Progressively measurable map (t_k, path) -> value. Analytic derivatives are
// optional; when present the numerical finite-difference machinery defers to
// them and the test suite cross-checks the two.
//
// A functional must declare whether it extends to cadlag (bumped) paths;
// probing a vertical derivative of a continuous-only functional is an error.
class PathFunctional {
public:
    using Eval = std::function<double(const PathPoint&)>;
    using GradEval = std::function<std::vector<double>(const PathPoint&)>;

    PathFunctional() = default;
    PathFunctional(std::string name, Eval eval, bool cadlag_extension = true)
        : name_(std::move(name)), eval_(std::move(eval)), cadlag_(cadlag_extension) {}

    PathFunctional& with_time_derivative(Eval dt) {
        dt_ = std::move(dt);
        return *this;
    }
    PathFunctional& with_space_derivative(GradEval dx) {
        dx_ = std::move(dx);
        return *this;
    }
    // Row-major d x d matrix.
    PathFunctional& with_space_hessian(GradEval dxx) {
        dxx_ = std::move(dxx);
        return *this;
    }

    double operator()(const PathPoint& p) const { return eval_(p); }
    double operator()(const DiscretePath& path, int k) const {
        return eval_(PathPoint{&path, k});
    }

    bool has_cadlag_extension() const { return cadlag_; }
    bool has_analytic_time_derivative() const { return static_cast<bool>(dt_); }
    bool has_analytic_space_derivative() const { return static_cast<bool>(dx_); }
    bool has_analytic_space_hessian() const { return static_cast<bool>(dxx_); }

    double analytic_time_derivative(const PathPoint& p) const { return dt_(p); }
    std::vector<double> analytic_space_derivative(const PathPoint& p) const { return dx_(p); }
    std::vector<double> analytic_space_hessian(const PathPoint& p) const { return dxx_(p); }

    const std::string& name() const { return name_; }
    bool valid() const { return static_cast<bool>(eval_); }

private:
    std::string name_;
    Eval eval_;
    bool cadlag_ = true;
    Eval dt_;
    GradEval dx_, dxx_;
};

// xi shifted by the prefix (t_index, omega): evaluating the result at
// (s, omega2) on the re-anchored suffix grid equals evaluating xi at the same
// absolute time on the concatenation of omega and omega2.
inline PathFunctional shift_functional(const PathFunctional& xi, int t_index,
                                       const DiscretePath& omega) {
    auto prefix = std::make_shared<DiscretePath>(omega);
    PathFunctional out(
        xi.name() + "^shifted",
        [xi, prefix, t_index](const PathPoint& p) {
            DiscretePath cat = concat(*prefix, t_index, *p.path);
            return xi(cat, t_index + p.k);
        },
        xi.has_cadlag_extension());
    if (xi.has_analytic_time_derivative())
        out.with_time_derivative([xi, prefix, t_index](const PathPoint& p) {
            DiscretePath cat = concat(*prefix, t_index, *p.path);
            return xi.analytic_time_derivative(PathPoint{&cat, t_index + p.k});
        });
    if (xi.has_analytic_space_derivative())
        out.with_space_derivative([xi, prefix, t_index](const PathPoint& p) {
            DiscretePath cat = concat(*prefix, t_index, *p.path);
            return xi.analytic_space_derivative(PathPoint{&cat, t_index + p.k});
        });
    if (xi.has_analytic_space_hessian())
        out.with_space_hessian([xi, prefix, t_index](const PathPoint& p) {
            DiscretePath cat = concat(*prefix, t_index, *p.path);
            return xi.analytic_space_hessian(PathPoint{&cat, t_index + p.k});
        });
    return out;
}

}  // namespace ppde
