#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ppde/brownian.hpp"
#include "ppde/catalog.hpp"
#include "ppde/derivatives.hpp"
#include "ppde/ito.hpp"
#include "ppde/path_ops.hpp"
#include "ppde/stopping.hpp"

using namespace ppde;

namespace {

DiscretePath constant_value_path(const TimeGrid& g, double x) {
    DiscretePath p(g, 1, PathFlavor::continuous);
    for (int k = 1; k <= g.steps(); ++k) p.at(k, 0) = x;
    return p;
}

}  // namespace

TEST_CASE("vertical derivative examples") {
    TimeGrid g(1.0, 10);
    DiscretePath w = constant_value_path(g, 1.0);

    PathFunctional square("square", [](const PathPoint& p) { return p.value(0) * p.value(0); });
    auto d = vertical_derivative(square, at_node(w, 5), 1e-4);
    CHECK(d[0] == doctest::Approx(2.0).epsilon(1e-6));

    // a node bump carries no dt-mass in a left-endpoint integral
    auto di = vertical_derivative(catalog::running_integral(), at_node(w, 5), 1e-4);
    CHECK(di[0] == doctest::Approx(0.0));

    // running max with the current value strictly below the peak: small bumps
    // leave the max unchanged, so the quotient is exactly 0
    DiscretePath peaked = w;
    peaked.at(2, 0) = 2.0;
    peaked.at(3, 0) = 1.0;
    auto dm = vertical_derivative(catalog::running_max(), at_node(peaked, 6), 1e-4);
    CHECK(dm[0] == 0.0);

    CHECK_THROWS(vertical_derivative(square, at_node(w, 5), 0.0));
    PathFunctional gated("gated", [](const PathPoint& p) { return p.value(0); }, false);
    CHECK_THROWS(vertical_derivative(gated, at_node(w, 5), 1e-4));
}

TEST_CASE("vertical hessian examples") {
    TimeGrid g(1.0, 10);

    // |w_t|^2 in two dimensions: hessian is 2 I
    DiscretePath w2(g, 2, PathFlavor::continuous);
    w2.at(5, 0) = 0.3;
    w2.at(5, 1) = -0.7;
    PathFunctional sq2("sq2", [](const PathPoint& p) {
        return p.value(0) * p.value(0) + p.value(1) * p.value(1);
    });
    auto h = vertical_hessian(sq2, at_node(w2, 5), 1e-4);
    CHECK(h[0] == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(h[3] == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(h[1] == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(h[2] == doctest::Approx(h[1]).epsilon(1e-12));  // symmetrized

    // linear functional: zero curvature
    DiscretePath w(g, 1, PathFlavor::continuous);
    PathFunctional lin("lin", [](const PathPoint& p) { return 3.0 * p.value(0); });
    auto hl = vertical_hessian(lin, at_node(w, 4), 1e-4);
    CHECK(hl[0] == doctest::Approx(0.0).epsilon(1e-8));

    // cos at the origin: second derivative -cos(0) = -1
    auto hc = vertical_hessian(catalog::cos_value(), at_node(w, 4), 1e-4);
    CHECK(hc[0] == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("horizontal derivative examples") {
    TimeGrid g(1.0, 10);
    DiscretePath w = constant_value_path(g, 0.8);

    CHECK(horizontal_derivative(catalog::time_functional(), at_node(w, 3)) ==
          doctest::Approx(1.0));
    // frozen integrand is the constant current value
    CHECK(horizontal_derivative(catalog::running_integral(), at_node(w, 3)) ==
          doctest::Approx(0.8));
    // freezing fixes the value, so value-only functionals have zero slope
    PathFunctional square("square", [](const PathPoint& p) { return p.value(0) * p.value(0); });
    CHECK(horizontal_derivative(square, at_node(w, 3)) == doctest::Approx(0.0));

    // at the horizon the left-limit rule reads the previous node
    CHECK(horizontal_derivative(catalog::time_functional(), at_node(w, 10)) ==
          doctest::Approx(1.0));
    CHECK_THROWS(horizontal_derivative(catalog::time_functional(), at_node(w, 3), 8));
}

TEST_CASE("analytic and numerical derivatives agree on the catalog") {
    TimeGrid g(1.0, 16);
    BrownianBatch batch = sample_brownian(g, 1, 3, 17);
    for (const std::string& name :
         {std::string("identity"), std::string("square_minus_t"), std::string("heat_cos"),
          std::string("cos_value"), std::string("running_integral")}) {
        PathFunctional u = catalog::by_name(name);
        for (int m = 0; m < 3; ++m)
            for (int k : {4, 8, 12}) {
                ConsistencyCheck cc = check_derivative_consistency(u, at_node(batch.path(m), k));
                INFO(name, " at k=", k, " worst=", cc.worst, " tol=", cc.tolerance);
                CHECK(cc.passed);
            }
    }
}

TEST_CASE("derivatives are local to the stopped region") {
    // two functionals agreeing before the first exit of |w| from a band have
    // the same derivatives strictly before the exit
    TimeGrid g(1.0, 20);
    BrownianBatch batch = sample_brownian(g, 1, 8, 41);
    const double band = 0.6;
    PathFunctional base = catalog::square_minus_t();
    PathFunctional excess("excess", [band](const PathPoint& p) {
        double m = 0.0;
        for (int j = 0; j <= p.k; ++j) m = std::max(m, std::abs(p.path->value(j, 0)));
        const double over = std::max(0.0, m - band);
        return p.value(0) * p.value(0) - p.time() + over * over;
    });
    PathFunctional absband("absband", [](const PathPoint& p) { return std::abs(p.value(0)); });
    GridStoppingTime exit_rule = first_hitting(absband, band);

    int checked = 0;
    for (int m = 0; m < 8; ++m) {
        const DiscretePath& p = batch.path(m);
        const int exit_k = exit_rule(p);
        for (int k = 1; k + 1 < exit_k; ++k) {
            // margin so the probe bumps stay inside the band
            double running = 0.0;
            for (int j = 0; j <= k; ++j) running = std::max(running, std::abs(p.value(j, 0)));
            if (running > band - 0.05) continue;
            DerivativeReport a = numerical_derivative_report(base, at_node(p, k));
            DerivativeReport b = numerical_derivative_report(excess, at_node(p, k));
            CHECK(a.dt == doctest::Approx(b.dt).epsilon(1e-10));
            CHECK(a.dx[0] == doctest::Approx(b.dx[0]).epsilon(1e-10));
            CHECK(a.dxx[0] == doctest::Approx(b.dxx[0]).epsilon(1e-8));
            ++checked;
        }
    }
    CHECK(checked > 10);
}

TEST_CASE("hessian output is symmetric") {
    TimeGrid g(1.0, 8);
    BrownianBatch batch = sample_brownian(g, 2, 4, 53);
    PathFunctional mixed("mixed", [](const PathPoint& p) {
        return std::sin(p.value(0)) * std::cos(0.5 * p.value(1)) + p.value(0) * p.value(1);
    });
    for (int m = 0; m < 4; ++m) {
        auto h = vertical_hessian(mixed, at_node(batch.path(m), 5), 1e-4);
        double norm = 0.0, asym = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                norm += h[static_cast<std::size_t>(i) * 2 + j] * h[static_cast<std::size_t>(i) * 2 + j];
                const double d = h[static_cast<std::size_t>(i) * 2 + j] -
                                 h[static_cast<std::size_t>(j) * 2 + i];
                asym += d * d;
            }
        CHECK(std::sqrt(asym) <= 1e-8 * (1.0 + std::sqrt(norm)));
    }
}

TEST_CASE("change-of-variable residual is exactly zero for the identity") {
    BrownianBatch batch = sample_brownian(TimeGrid(1.0, 32), 1, 200, 7);
    ItoResidualReport rep = ito_residual(catalog::identity(), batch);
    CHECK(rep.max_abs_all == 0.0);
    CHECK(rep.rms_all == 0.0);
}

TEST_CASE("squared path residual is the quadratic variation defect") {
    // residual_k = (dB_k)^2 - dt, path by path and step by step
    BrownianBatch batch = sample_brownian(TimeGrid(1.0, 16), 1, 50, 13);
    ItoResidualReport rep = ito_residual(catalog::square_minus_t(), batch);
    for (int m = 0; m < 10; ++m) {
        double worst = 0.0, ss = 0.0;
        for (int k = 0; k < 16; ++k) {
            const double db = batch.value_increment(m, k, 0);
            const double expected = db * db - batch.grid().dt();
            worst = std::max(worst, std::abs(expected));
            ss += expected * expected;
        }
        CHECK(rep.max_abs[static_cast<std::size_t>(m)] == doctest::Approx(worst).epsilon(1e-12));
        CHECK(rep.rms[static_cast<std::size_t>(m)] ==
              doctest::Approx(std::sqrt(ss / 16)).epsilon(1e-12));
    }
}

TEST_CASE("residual rms shrinks when the grid is refined") {
    const std::uint64_t seed = 2024;
    double prev_sq = 1e9, prev_tr = 1e9;
    for (int n : {32, 64, 128}) {
        BrownianBatch batch = sample_brownian(TimeGrid(1.0, n), 1, 400, seed);
        const double rms_sq = ito_residual(catalog::square_minus_t(), batch).rms_all;
        const double rms_tr = ito_residual(catalog::trapezoid_integral(), batch).rms_all;
        const double rms_id = ito_residual(catalog::identity(), batch).rms_all;
        CHECK(rms_sq < prev_sq);
        CHECK(rms_tr < prev_tr);
        CHECK(rms_id <= 1e-15);
        // the quadratic-variation defect halves with the step
        CHECK(rms_sq == doctest::Approx(std::sqrt(2.0) / n).epsilon(0.25));
        prev_sq = rms_sq;
        prev_tr = rms_tr;
    }
}

TEST_CASE("pure drift functional keeps a small residual") {
    BrownianBatch batch = sample_brownian(TimeGrid(1.0, 64), 1, 200, 3);
    ItoResidualReport rep = ito_residual(catalog::trapezoid_integral(), batch);
    // left-sum versus trapezoid discrepancy: one half-step of the increment
    CHECK(rep.rms_all > 0.0);
    CHECK(rep.rms_all < batch.grid().dt());
    ItoResidualReport exact = ito_residual(catalog::running_integral(), batch);
    CHECK(exact.max_abs_all <= 1e-14);
}

TEST_CASE("derivative report carries the step-halving gap") {
    TimeGrid g(1.0, 10);
    BrownianBatch batch = sample_brownian(g, 1, 1, 19);
    DerivativeReport rep = derivative_report(catalog::heat_cos(), at_node(batch.path(0), 5));
    CHECK(rep.h > 0.0);
    CHECK(rep.delta == doctest::Approx(g.dt()));
    CHECK(rep.richardson_gap >= 0.0);
    CHECK(rep.richardson_gap < 1e-2);
}
