#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ppde/catalog.hpp"
#include "ppde/girsanov.hpp"
#include "ppde/nonlinear_expectation.hpp"
#include "ppde/optimal_stopping.hpp"

using namespace ppde;

namespace {

TerminalFunctional terminal_value() {
    TerminalFunctional t;
    t.name = "terminal_value";
    t.g = [](const DiscretePath& p) { return p.value(p.grid().steps(), 0); };
    t.bound = 100.0;
    return t;
}

// bounded pseudo-random payoff mixing terminal value, integral and extrema
TerminalFunctional random_bounded_payoff(std::uint64_t tag) {
    const double a = 2.0 * (GaussianStream::mix(tag) % 1000) / 1000.0 - 1.0;
    const double b = 2.0 * (GaussianStream::mix(tag + 1) % 1000) / 1000.0 - 1.0;
    const double c = 2.0 * (GaussianStream::mix(tag + 2) % 1000) / 1000.0 - 1.0;
    TerminalFunctional t;
    t.name = "random_payoff_" + std::to_string(tag);
    t.bound = 1.0;
    t.g = [a, b, c](const DiscretePath& p) {
        const int n = p.grid().steps();
        double integral = 0.0, hi = 0.0;
        for (int k = 0; k < n; ++k) {
            integral += p.value(k, 0) * p.grid().dt();
            hi = std::max(hi, p.value(k, 0));
        }
        return std::clamp(a * p.value(n, 0) + b * integral + c * hi, -1.0, 1.0);
    };
    return t;
}

double plain_mean(const TerminalFunctional& xi, const BrownianBatch& batch) {
    double s = 0.0;
    for (int m = 0; m < batch.num_paths(); ++m) s += xi(batch.path(m));
    return s / batch.num_paths();
}

}  // namespace

TEST_CASE("brownian batches are reproducible and well scaled") {
    TimeGrid g(1.0, 20);
    BrownianBatch a = sample_brownian(g, 1, 500, 42);
    BrownianBatch b = sample_brownian(g, 1, 500, 42);
    for (int m = 0; m < 500; m += 37)
        for (int k = 0; k <= 20; ++k)
            CHECK(a.path(m).value(k, 0) == b.path(m).value(k, 0));

    BrownianBatch c = sample_brownian(g, 1, 500, 43);
    CHECK(c.path(0).value(20, 0) != a.path(0).value(20, 0));

    // single draw shape
    BrownianBatch tiny = sample_brownian(TimeGrid(1.0, 1), 1, 1, 9);
    CHECK(tiny.path(0).value(0, 0) == 0.0);
    CHECK(std::abs(tiny.path(0).value(1, 0)) < 6.0);

    // moments within 5 standard errors
    BrownianBatch big = sample_brownian(TimeGrid(1.0, 8), 2, 100000, 4242);
    MomentSummary ms = increment_moments(big);
    CHECK(ms.mean_worst_z < 5.0);
    CHECK(ms.var_worst_z < 5.0);

    // terminal variance close to T
    double ss = 0.0;
    for (int m = 0; m < big.num_paths(); ++m) {
        const double x = big.path(m).value(8, 0);
        ss += x * x;
    }
    const double var = ss / big.num_paths();
    CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / big.num_paths()));
}

TEST_CASE("exponential weights") {
    TimeGrid g(1.0, 25);
    BrownianBatch batch = sample_brownian(g, 1, 20000, 7);

    // zero drift: weights identically one
    GirsanovWeight w0 = girsanov_weight(batch, constant_drift({0.0}));
    for (int m = 0; m < 100; ++m)
        for (int k = 0; k <= 25; ++k) CHECK(w0.at(m, k) == 1.0);

    // constant drift: positivity and the unit-mean property
    GirsanovWeight w = girsanov_weight(batch, constant_drift({0.7}));
    double mean = 0.0, ss = 0.0;
    for (int m = 0; m < batch.num_paths(); ++m) {
        CHECK(w.terminal(m) > 0.0);
        mean += w.terminal(m);
    }
    mean /= batch.num_paths();
    for (int m = 0; m < batch.num_paths(); ++m) {
        const double d = w.terminal(m) - mean;
        ss += d * d;
    }
    const double se = std::sqrt(ss / batch.num_paths() / batch.num_paths());
    CHECK(std::abs(mean - 1.0) < 5.0 * se);

    // control beyond its bound is rejected
    DriftControl bad;
    bad.bound = 0.1;
    bad.beta = [](int, const PathPoint&, std::span<double> out) { out[0] = 0.5; };
    CHECK_THROWS(girsanov_weight(batch, bad));
}

TEST_CASE("tilted expectations: weighting vs drift resimulation") {
    TimeGrid g(1.0, 25);
    BrownianBatch batch = sample_brownian(g, 1, 40000, 11);
    PathFunctional terminal("terminal", [](const PathPoint& p) {
        return p.path->value(p.path->grid().steps(), 0);
    });
    const double b = 0.6;
    WeightedMean ww = tilted_expectation(terminal, batch, constant_drift({b}));
    WeightedMean wr = tilted_expectation_resim(terminal, batch, constant_drift({b}));
    CHECK(std::abs(ww.value - b) < 5.0 * ww.std_error);
    CHECK(std::abs(wr.value - b) < 5.0 * wr.std_error);
    CHECK(std::abs(ww.value - wr.value) < 5.0 * (ww.std_error + wr.std_error));

    // constant payoff reweights to itself up to weight noise
    PathFunctional five("five", [](const PathPoint&) { return 5.0; });
    WeightedMean wc = tilted_expectation(five, batch, constant_drift({b}));
    CHECK(std::abs(wc.value - 5.0) < 5.0 * wc.std_error + 1e-12);
}

TEST_CASE("envelope closed form for the terminal value") {
    TimeGrid g(1.0, 50);
    BrownianBatch batch = sample_brownian(g, 1, 60000, 3);
    TerminalFunctional xi = terminal_value();
    const double L = 0.5;

    NlexpResult lo = lower_expectation(xi, L, batch, NlexpMethod::bsde);
    NlexpResult hi = upper_expectation(xi, L, batch, NlexpMethod::bsde);
    CHECK(lo.value == doctest::Approx(-0.5).epsilon(0.02));
    CHECK(hi.value == doctest::Approx(+0.5).epsilon(0.02));

    NlexpResult lo_cs = lower_expectation(xi, L, batch, NlexpMethod::control_search);
    NlexpResult hi_cs = upper_expectation(xi, L, batch, NlexpMethod::control_search);
    CHECK(lo_cs.value == doctest::Approx(-0.5).epsilon(0.05));
    CHECK(hi_cs.value == doctest::Approx(+0.5).epsilon(0.05));

    // L = 0 collapses both to the plain mean
    NlexpResult plain = lower_expectation(xi, 0.0, batch, NlexpMethod::bsde);
    CHECK(plain.value == doctest::Approx(plain_mean(xi, batch)).epsilon(1e-10));

    // constants are fixed points for any L
    NlexpResult c = lower_expectation(catalog::term_constant(3.25), L, batch);
    CHECK(c.value == doctest::Approx(3.25).epsilon(1e-10));

    CHECK_THROWS(lower_expectation(xi, -1.0, batch));
}

TEST_CASE("envelope properties") {
    TimeGrid g(1.0, 30);
    BrownianBatch batch = sample_brownian(g, 1, 20000, 31);

    for (std::uint64_t tag : {10ull, 20ull, 30ull, 40ull, 50ull}) {
        TerminalFunctional xi = random_bounded_payoff(tag);
        const double mean = plain_mean(xi, batch);
        NlexpResult lo1 = lower_expectation(xi, 0.25, batch);
        NlexpResult lo2 = lower_expectation(xi, 0.75, batch);
        NlexpResult hi1 = upper_expectation(xi, 0.25, batch);
        NlexpResult hi2 = upper_expectation(xi, 0.75, batch);
        const double tol = 5.0 * (lo1.std_error + lo2.std_error) + 1e-6;

        // monotone in the drift bound, and sandwiching the plain mean
        CHECK(lo2.value <= lo1.value + tol);
        CHECK(hi1.value <= hi2.value + tol);
        CHECK(lo1.value <= mean + tol);
        CHECK(mean <= hi1.value + tol);

        // duality lower(xi) = -upper(-xi), exact for the backward route
        TerminalFunctional neg = xi;
        auto base = xi.g;
        neg.g = [base](const DiscretePath& p) { return -base(p); };
        NlexpResult dual = upper_expectation(neg, 0.25, batch);
        CHECK(lo1.value == doctest::Approx(-dual.value).epsilon(1e-12));

        // constant shift equivariance
        TerminalFunctional shifted = xi;
        shifted.g = [base](const DiscretePath& p) { return base(p) + 2.0; };
        NlexpResult lo_sh = lower_expectation(shifted, 0.25, batch);
        CHECK(lo_sh.value == doctest::Approx(lo1.value + 2.0).epsilon(1e-8));

        // positive homogeneity
        TerminalFunctional scaled = xi;
        scaled.g = [base](const DiscretePath& p) { return 3.0 * base(p); };
        NlexpResult lo_sc = lower_expectation(scaled, 0.25, batch);
        CHECK(lo_sc.value == doctest::Approx(3.0 * lo1.value).epsilon(1e-8));
    }
}

TEST_CASE("control search agrees with the backward route") {
    TimeGrid g(1.0, 30);
    BrownianBatch batch = sample_brownian(g, 1, 40000, 77);
    TerminalFunctional xi = random_bounded_payoff(123);
    NlexpResult a = lower_expectation(xi, 0.5, batch, NlexpMethod::bsde);
    NlexpResult b = lower_expectation(xi, 0.5, batch, NlexpMethod::control_search);
    CHECK(std::abs(a.value - b.value) < 5.0 * (a.std_error + b.std_error) + 5e-3);
    // the greedy feedback is feasible, so it can only overshoot the infimum
    CHECK(b.value >= a.value - 5.0 * (a.std_error + b.std_error) - 5e-3);
}

TEST_CASE("tree envelopes match the closed form exactly") {
    TimeGrid g(1.0, 10);
    CHECK(lower_expectation_tree(terminal_value(), 0.5, g) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(upper_expectation_tree(terminal_value(), 0.5, g) == doctest::Approx(+0.5).epsilon(1e-12));
}

TEST_CASE("optimal stopping: deterministic decreasing payoff stops at the bound") {
    TimeGrid g(1.0, 12);
    // X(t) = 1 - t decreases, so the infimum waits until the bound
    PathFunctional payoff("one_minus_t", [](const PathPoint& p) { return 1.0 - p.time(); });
    TreeStoppingValue sv = optimal_stop_tree(payoff, fixed_time(12), 0.0, g, -1);
    CHECK(sv.y0() == doctest::Approx(0.0).epsilon(1e-12));
    for (std::uint32_t leaf = 0; leaf < (1u << 12); leaf += 97)
        CHECK(sv.tau_star[leaf] == 12);
}

TEST_CASE("optimal stopping: constant payoff is flat with zero compensator") {
    TimeGrid g(1.0, 8);
    PathFunctional payoff("c", [](const PathPoint&) { return 2.5; });
    TreeStoppingValue sv = optimal_stop_tree(payoff, fixed_time(8), 0.4, g, -1);
    for (int k = 0; k <= 8; ++k)
        for (std::uint32_t b = 0; b < (1u << k); ++b) {
            CHECK(sv.y[static_cast<std::size_t>(k)][b] == doctest::Approx(2.5));
            CHECK(sv.dk[static_cast<std::size_t>(k)][b] == doctest::Approx(0.0));
        }
}

namespace {

// independent oracle: enumerate every adapted stopping rule on the tree
// (a stop/continue bit per interior node) and take the best expectation
double enumerate_all_rules(const PathFunctional& payoff, const TimeGrid& grid) {
    BinaryTree tree(grid);
    const int n = grid.steps();
    int interior = 0;
    std::vector<int> level_offset(static_cast<std::size_t>(n), 0);
    for (int k = 0; k < n; ++k) {
        level_offset[static_cast<std::size_t>(k)] = interior;
        interior += 1 << k;
    }
    REQUIRE(interior <= 20);  // 2^interior rules

    // payoff per node
    std::vector<std::vector<double>> x(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        x[static_cast<std::size_t>(k)].assign(1ull << k, 0.0);
        for (std::uint32_t b = 0; b < (1u << k); ++b) {
            DiscretePath path = tree.node_path(k, b);
            x[static_cast<std::size_t>(k)][b] = payoff(path, k);
        }
    }

    double best = 1e300;
    for (std::uint64_t rule = 0; rule < (1ull << interior); ++rule) {
        double value = 0.0;
        const std::uint32_t leaves = 1u << n;
        for (std::uint32_t leaf = 0; leaf < leaves; ++leaf) {
            double collected = x[static_cast<std::size_t>(n)][leaf];
            for (int k = 0; k < n; ++k) {
                const std::uint32_t b = leaf & ((1u << k) - 1u);
                const int bit = level_offset[static_cast<std::size_t>(k)] + static_cast<int>(b);
                if ((rule >> bit) & 1ull) {
                    collected = x[static_cast<std::size_t>(k)][b];
                    break;
                }
            }
            value += collected;
        }
        best = std::min(best, value / leaves);
    }
    return best;
}

}  // namespace

TEST_CASE("snell recursion equals the exhaustive rule enumeration at depth 4") {
    TimeGrid g(1.0, 4);
    PathFunctional payoff("put_like", [](const PathPoint& p) {
        return std::max(0.4 - p.value(0), 0.0);
    });
    TreeStoppingValue sv = optimal_stop_tree(payoff, fixed_time(4), 0.0, g, -1);
    const double oracle = enumerate_all_rules(payoff, g);
    CHECK(sv.y0() == doctest::Approx(oracle).epsilon(1e-14));
}

TEST_CASE("reflected bookkeeping invariants on the tree") {
    TimeGrid g(1.0, 10);
    PathFunctional payoff("kinked", [](const PathPoint& p) {
        return std::max(0.3 - p.value(0), 0.0) + 0.05 * p.time();
    });
    TreeStoppingValue sv = optimal_stop_tree(payoff, fixed_time(10), 0.3, g, -1);
    for (int k = 0; k <= 10; ++k)
        for (std::uint32_t b = 0; b < (1u << k); ++b) {
            const double y = sv.y[static_cast<std::size_t>(k)][b];
            const double x = sv.x[static_cast<std::size_t>(k)][b];
            const double dk = sv.dk[static_cast<std::size_t>(k)][b];
            if (sv.stop_index[static_cast<std::size_t>(k)][b] < 0) {
                CHECK(y <= x + 1e-12);                 // lower problem: Y <= X
                CHECK(dk >= -1e-15);                   // compensator nondecreasing
                if (dk > 1e-12) CHECK(sv.contact[static_cast<std::size_t>(k)][b] == 1);
                if (sv.contact[static_cast<std::size_t>(k)][b])
                    CHECK(y == doctest::Approx(x).epsilon(1e-14));  // contact at tau*
            }
        }
    // first contact achieves the value along every leaf
    for (std::uint32_t leaf = 0; leaf < (1u << 10); leaf += 11) {
        const int ts = sv.tau_star[leaf];
        const std::uint32_t b = leaf & ((1u << ts) - 1u);
        CHECK(sv.y[static_cast<std::size_t>(ts)][b] ==
              doctest::Approx(sv.x[static_cast<std::size_t>(ts)][b]).epsilon(1e-12));
    }
}

TEST_CASE("envelope submartingale property of the stopped value") {
    TimeGrid g(1.0, 8);
    PathFunctional payoff("put_like", [](const PathPoint& p) {
        return std::max(0.3 - p.value(0), 0.0);
    });
    const double L = 0.25;
    TreeStoppingValue sv = optimal_stop_tree(payoff, fixed_time(8), L, g, -1);
    std::vector<GridStoppingTime> rules{fixed_time(2), fixed_time(5), fixed_time(8),
                                        first_hitting(catalog::running_max(), 0.2)};
    SubmartingaleReport rep = submartingale_check_tree(sv, L, rules, 1e-10);
    CHECK(rep.submartingale_ok);
    CHECK(rep.martingale_to_tau_star_ok);

    // deterministic strictly increasing payoff: strict submartingale
    PathFunctional rising("rising", [](const PathPoint& p) { return p.time(); });
    TreeStoppingValue sv2 = optimal_stop_tree(rising, fixed_time(8), L, g, -1);
    SubmartingaleReport rep2 = submartingale_check_tree(sv2, L, {fixed_time(8)}, 1e-10);
    CHECK(rep2.submartingale_ok);
    CHECK(rep2.rows[0].value > rep2.y0 + 1e-6);
}

TEST_CASE("regression stopping agrees with the tree oracle") {
    TimeGrid g(1.0, 8);
    PathFunctional payoff("put_like", [](const PathPoint& p) {
        return std::max(0.4 - p.value(0), 0.0);
    });
    TreeStoppingValue tree_sv = optimal_stop_tree(payoff, fixed_time(8), 0.0, g, -1);

    BrownianBatch batch = sample_brownian(g, 1, 40000, 4);
    StoppingOptions opt;
    StoppingValue sv = optimal_stop_lower(payoff, fixed_time(8), 0.0, batch, opt);
    CHECK(std::abs(sv.y0 - tree_sv.y0()) < 3.0 * sv.y0_se + 0.01);

    // invariants on the batch
    for (int m = 0; m < batch.num_paths(); m += 997) {
        for (int k = 0; k <= sv.tau_bound[static_cast<std::size_t>(m)]; ++k) {
            CHECK(sv.Y(m, k) <= sv.X(m, k) + 1e-10);
            CHECK(sv.K(m, k) >= -1e-12);
            if (k > 0) CHECK(sv.K(m, k) >= sv.K(m, k - 1) - 1e-12);
        }
        const int ts = sv.tau_star[static_cast<std::size_t>(m)];
        CHECK(sv.Y(m, ts) == doctest::Approx(sv.X(m, ts)).epsilon(1e-10));
    }
}

TEST_CASE("upper stopping mirrors the lower one") {
    TimeGrid g(1.0, 8);
    PathFunctional payoff("call_like", [](const PathPoint& p) {
        return std::max(p.value(0) - 0.1, 0.0);
    });
    TreeStoppingValue up = optimal_stop_tree(payoff, fixed_time(8), 0.2, g, +1);
    for (int k = 0; k <= 8; ++k)
        for (std::uint32_t b = 0; b < (1u << k); ++b)
            if (up.stop_index[static_cast<std::size_t>(k)][b] < 0)
                CHECK(up.y[static_cast<std::size_t>(k)][b] >=
                      up.x[static_cast<std::size_t>(k)][b] - 1e-12);
}
