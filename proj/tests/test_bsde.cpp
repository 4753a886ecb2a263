#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ppde/bsde.hpp"
#include "ppde/catalog.hpp"
#include "ppde/path_ops.hpp"

using namespace ppde;

TEST_CASE("martingale terminal value prices to zero") {
    BrownianBatch batch = sample_brownian(TimeGrid(1.0, 25), 1, 40000, 5);
    BSDESolution sol =
        solve_bsde_regression(catalog::gen_zero(), catalog::term_value_clipped(100.0), batch);
    CHECK(std::abs(sol.y0) < 5.0 * sol.y0_se);
    // terminal condition holds path by path
    for (int m = 0; m < batch.num_paths(); m += 1999)
        CHECK(sol.Y(m, 25) == doctest::Approx(batch.path(m).value(25, 0)));
}

TEST_CASE("gaussian cosine closed form") {
    BrownianBatch batch = sample_brownian(TimeGrid(1.0, 50), 1, 100000, 8);
    BSDESolution sol = solve_bsde_regression(catalog::gen_zero(), catalog::term_cos(), batch);
    CHECK(sol.y0 == doctest::Approx(std::exp(-0.5)).epsilon(0.01));
}

TEST_CASE("linear decay driver discounts a constant terminal") {
    BrownianBatch batch = sample_brownian(TimeGrid(1.0, 50), 1, 20000, 12);
    BSDESolution sol = solve_bsde_regression(catalog::gen_linear_decay(0.1),
                                             catalog::term_constant(1.0), batch);
    CHECK(sol.y0 == doctest::Approx(std::exp(-0.1)).epsilon(0.01));
}

TEST_CASE("tree solver exact values") {
    TimeGrid g(1.0, 10);
    TreeSolution zero = solve_bsde_tree(catalog::gen_zero(), catalog::term_value_clipped(1e9), g);
    CHECK(zero.y0() == doctest::Approx(0.0).epsilon(1e-14));

    TreeSolution integral = solve_bsde_tree(catalog::gen_zero(), catalog::term_integral(), g);
    CHECK(integral.y0() == doctest::Approx(0.0).epsilon(1e-14));

    // driver -L|z| with the terminal value: z is 1 at every node, so each
    // step subtracts exactly L dt
    TreeSolution lower =
        solve_bsde_tree(catalog::gen_lower_envelope(0.4), catalog::term_value_clipped(1e9), g);
    CHECK(lower.y0() == doctest::Approx(-0.4).epsilon(1e-12));
    for (int k = 0; k < 10; ++k)
        for (std::uint32_t b = 0; b < (1u << k); ++b)
            CHECK(lower.z[static_cast<std::size_t>(k)][b] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tree vs regression on the model catalog") {
    // the tree computes under the +-sqrt(dt) walk; the regression solver is
    // run under the same measure so the tree is a genuine oracle even for
    // path-dependent payoffs at small N
    const TimeGrid g(1.0, 10);
    BrownianBatch batch = sample_sign_walk(g, 1, 100000, 21);
    std::vector<Generator> drivers{catalog::gen_zero(), catalog::gen_linear_decay(0.2),
                                   catalog::gen_lower_envelope(0.3),
                                   catalog::gen_upper_envelope(0.3),
                                   catalog::gen_smooth_nonlinear(0.5)};
    std::vector<TerminalFunctional> terminals{
        catalog::term_value_clipped(1.5), catalog::term_cos(), catalog::term_integral(),
        catalog::term_running_max_clipped(1.5)};
    for (const auto& f : drivers)
        for (const auto& gt : terminals) {
            TreeSolution ts = solve_bsde_tree(f, gt, g);
            BSDESolution rs = solve_bsde_regression(f, gt, batch);
            INFO(f.name, " / ", gt.name, " tree=", ts.y0(), " reg=", rs.y0, " se=", rs.y0_se);
            CHECK(std::abs(rs.y0 - ts.y0()) < 3.0 * rs.y0_se + 0.01);
        }
}

TEST_CASE("a priori bound is preserved pathwise") {
    BrownianBatch batch = sample_brownian(TimeGrid(1.0, 20), 1, 5000, 33);
    Generator f = catalog::gen_smooth_nonlinear(0.8);  // |f| <= 0.8
    TerminalFunctional gt = catalog::term_cos();       // |g| <= 1
    BSDESolution sol = solve_bsde_regression(f, gt, batch);
    const double bound = gt.bound + batch.grid().horizon() * 0.8 + 1e-9;
    for (int m = 0; m < batch.num_paths(); ++m)
        for (int k = 0; k <= 20; ++k) CHECK(std::abs(sol.Y(m, k)) <= bound);
}

TEST_CASE("value field at interior anchors") {
    TimeGrid g(1.0, 20);
    BrownianBatch prefixes = sample_brownian(g, 1, 4, 44);
    U0Options opt;
    opt.num_paths = 30000;
    opt.seed = 7;

    // the anchor at the origin reproduces the plain solve
    DiscretePath trivial(g, 1, PathFlavor::continuous);
    U0Result at0 = u0_value(at_node(trivial, 0), catalog::gen_zero(), catalog::term_cos(), opt);
    BrownianBatch batch = sample_brownian(g, 1, opt.num_paths, opt.seed);
    BSDESolution direct = solve_bsde_regression(catalog::gen_zero(), catalog::term_cos(), batch);
    CHECK(at0.value == doctest::Approx(direct.y0).epsilon(1e-9));

    for (int m = 0; m < 4; ++m)
        for (int k : {5, 10, 15}) {
            const PathPoint p = at_node(prefixes.path(m), k);
            const double t = g.time(k);
            const double x = p.value(0);

            // integral payoff: prefix part + frozen drift of the remainder
            U0Result ui = u0_value(p, catalog::gen_zero(), catalog::term_integral(), opt);
            double prefix_sum = 0.0;
            for (int j = 0; j < k; ++j) prefix_sum += prefixes.path(m).value(j, 0) * g.dt();
            const double expected_int = prefix_sum + x * (1.0 - t);
            CHECK(std::abs(ui.value - expected_int) < 5.0 * ui.std_error + 1e-9);

            // cosine payoff: heat kernel around the prefix endpoint
            U0Result uc = u0_value(p, catalog::gen_zero(), catalog::term_cos(), opt);
            CHECK(uc.value ==
                  doctest::Approx(std::exp(-(1.0 - t) / 2.0) * std::cos(x)).epsilon(0.02));
        }

    // at the horizon the value is the terminal functional itself
    U0Result end = u0_value(at_node(prefixes.path(0), 20), catalog::gen_zero(),
                            catalog::term_cos(), opt);
    CHECK(end.value == doctest::Approx(std::cos(prefixes.path(0).value(20, 0))));
    CHECK(end.std_error == 0.0);
}

TEST_CASE("zero-driver shortcut matches the full recursion") {
    TimeGrid g(1.0, 16);
    BrownianBatch prefixes = sample_brownian(g, 1, 2, 99);
    const PathPoint p = at_node(prefixes.path(0), 6);
    U0Options opt;
    opt.num_paths = 5000;
    U0Result fast = u0_value(p, catalog::gen_zero(), catalog::term_cos(), opt);

    Generator slow_zero = catalog::gen_zero();
    slow_zero.identically_zero = false;  // force the regression path
    U0Result slow = u0_value(p, slow_zero, catalog::term_cos(), opt);
    CHECK(fast.value == doctest::Approx(slow.value).epsilon(1e-9));
}

TEST_CASE("modulus probe") {
    TimeGrid g(1.0, 16);
    BrownianBatch prefixes = sample_brownian(g, 1, 6, 13);
    U0Options opt;
    opt.num_paths = 20000;

    auto rho = [](const PathPoint&, const PathPoint&) { return 0.0; };

    // identical pair: zero gap
    std::vector<std::pair<PathPoint, PathPoint>> same{{at_node(prefixes.path(0), 8),
                                                       at_node(prefixes.path(0), 8)}};
    ModulusProbeReport r0 =
        modulus_probe(catalog::gen_zero(), catalog::term_cos(), same, rho, opt);
    CHECK(r0.rows[0].du == doctest::Approx(0.0));
    CHECK(r0.violations == 0);

    // markovian data: anchors sharing (t, w_t) give equal values up to noise
    DiscretePath a = prefixes.path(0);
    DiscretePath b = prefixes.path(1);
    {
        DiscretePath b_adj = b;
        b_adj.at(8, 0) = a.value(8, 0);
        std::vector<std::pair<PathPoint, PathPoint>> pairs;
        auto pa = std::make_shared<DiscretePath>(a);
        auto pb = std::make_shared<DiscretePath>(b_adj);
        pairs.emplace_back(PathPoint{pa.get(), 8}, PathPoint{pb.get(), 8});
        ModulusProbeReport rm =
            modulus_probe(catalog::gen_zero(), catalog::term_cos(), pairs, rho, opt);
        CHECK(rm.rows[0].du < 5.0 * rm.rows[0].se + 1e-9);
    }

    // lipschitz payoff: gaps scale with the distance, slope roughly stable
    std::vector<std::pair<PathPoint, PathPoint>> pairs;
    std::vector<std::shared_ptr<DiscretePath>> keep;
    for (double shift : {0.4, 0.2, 0.1, 0.05}) {
        auto shifted = std::make_shared<DiscretePath>(a);
        for (int k = 1; k <= 16; ++k) shifted->at(k, 0) += shift;
        keep.push_back(shifted);
        auto base = std::make_shared<DiscretePath>(a);
        keep.push_back(base);
        pairs.emplace_back(PathPoint{base.get(), 8}, PathPoint{shifted.get(), 8});
    }
    ModulusProbeReport rl = modulus_probe(catalog::gen_zero(),
                                          catalog::term_value_clipped(10.0), pairs, rho, opt);
    CHECK(rl.fitted_c > 0.0);
    CHECK(rl.rows[0].du > rl.rows[3].du);  // bigger distance, bigger gap
    CHECK(rl.violations == 0);
}

TEST_CASE("terminal comparison with common randomness") {
    TimeGrid g(1.0, 20);
    BrownianBatch batch = sample_brownian(g, 1, 20000, 61);
    Generator f = catalog::gen_linear_decay(0.3);

    TerminalFunctional g1 = catalog::term_cos();
    TerminalFunctional g2 = g1;
    g2.name = "cos_plus_one";
    auto base = g1.g;
    g2.g = [base](const DiscretePath& p) { return base(p) + 1.0; };
    g2.bound = 2.0;

    ComparisonVerdict v = comparison_test(f, g1, g2, batch);
    CHECK(v.ordered);
    // linear-in-y driver: the gap is the discounted shift
    const double gap = v.y2_0 - v.y1_0;
    CHECK(gap >= std::exp(-0.3) - 0.02);
    CHECK(gap <= std::exp(+0.3) + 0.02);

    TreeComparisonVerdict tv = comparison_test_tree(f, g1, g2, TimeGrid(1.0, 10));
    CHECK(tv.ordered_everywhere);

    // violated precondition is rejected
    CHECK_THROWS(comparison_test(f, g2, g1, batch));
}

TEST_CASE("driver-martingale classification") {
    TimeGrid g(1.0, 16);
    BrownianBatch batch = sample_brownian(g, 1, 3000, 71);
    BSDESolveOptions opt;

    GridStoppingTime tau1 = fixed_time(4);
    GridStoppingTime tau2 = fixed_time(12);

    // constants are martingales for the zero driver
    PathFunctional c("c", [](const PathPoint&) { return 1.5; });
    FMartingaleReport rc =
        f_martingale_check(c, catalog::gen_zero(), tau1, tau2, batch, opt);
    CHECK(rc.verdict == MartingaleVerdict::martingale);

    // the value field of the same driver/terminal is a martingale
    U0Options u0opt;
    u0opt.num_paths = 8000;
    PathFunctional u0 = u0_functional(catalog::gen_zero(), catalog::term_cos(), u0opt);
    FMartingaleReport rm =
        f_martingale_check(u0, catalog::gen_zero(), tau1, tau2, batch, opt, 8e-3);
    CHECK(rm.verdict == MartingaleVerdict::martingale);

    // adding a decreasing time ramp makes it a strict supermartingale
    PathFunctional ramped("u0_ramp", [u0](const PathPoint& p) {
        return u0(p) + 0.2 * (p.path->grid().horizon() - p.time());
    });
    FMartingaleReport rs =
        f_martingale_check(ramped, catalog::gen_zero(), tau1, tau2, batch, opt, 8e-3);
    CHECK(rs.verdict == MartingaleVerdict::supermartingale);

    // and the mirrored ramp a submartingale
    PathFunctional dipped("u0_dip", [u0](const PathPoint& p) {
        return u0(p) - 0.2 * (p.path->grid().horizon() - p.time());
    });
    FMartingaleReport rb =
        f_martingale_check(dipped, catalog::gen_zero(), tau1, tau2, batch, opt, 8e-3);
    CHECK(rb.verdict == MartingaleVerdict::submartingale);
}

TEST_CASE("stability of the value in the driver") {
    TimeGrid g(1.0, 25);
    BrownianBatch batch = sample_brownian(g, 1, 20000, 81);
    Generator f = catalog::gen_zero();
    auto fe = [&f](double e) {
        Generator shifted = f;
        shifted.identically_zero = false;
        shifted.name = "zero+eps";
        shifted.f = [e](double, const PathPoint&, double, std::span<const double>) { return e; };
        shifted.bound = std::abs(e);
        return shifted;
    };
    std::vector<StabilityRow> rows =
        stability_experiment(f, fe, {0.1, 0.05, 0.025, 0.0}, catalog::term_cos(), batch);
    // constant driver shift moves the value by eps * T, with common noise
    for (const auto& r : rows) {
        CHECK(r.gap == doctest::Approx(r.eps * 1.0).epsilon(1e-8));
        CHECK(r.sup_f_gap == doctest::Approx(r.eps).epsilon(1e-12));
    }
    CHECK(rows[0].gap > rows[1].gap);
    CHECK(rows[1].gap > rows[2].gap);
    CHECK(rows[3].gap == doctest::Approx(0.0));

    // driver -L|z| vs -(L+eps)|z| on the terminal value: gap eps*T on the tree
    TimeGrid tg(1.0, 10);
    TreeSolution a =
        solve_bsde_tree(catalog::gen_lower_envelope(0.3), catalog::term_value_clipped(1e9), tg);
    TreeSolution b =
        solve_bsde_tree(catalog::gen_lower_envelope(0.35), catalog::term_value_clipped(1e9), tg);
    CHECK(std::abs(a.y0() - b.y0()) == doctest::Approx(0.05).epsilon(1e-10));
}

TEST_CASE("markovian anchors with equal state agree") {
    TimeGrid g(1.0, 20);
    BrownianBatch prefixes = sample_brownian(g, 1, 10, 91);
    U0Options opt;
    opt.num_paths = 20000;
    Generator f = catalog::gen_smooth_nonlinear(0.4);  // markovian, nonlinear
    TerminalFunctional gt = catalog::term_cos();
    for (int pair = 0; pair < 5; ++pair) {
        DiscretePath a = prefixes.path(2 * pair);
        DiscretePath b = prefixes.path(2 * pair + 1);
        const int k = 10;
        DiscretePath b_adj = b;
        b_adj.at(k, 0) = a.value(k, 0);
        U0Result ua = u0_value(at_node(a, k), f, gt, opt);
        U0Result ub = u0_value(at_node(b_adj, k), f, gt, opt);
        CHECK(std::abs(ua.value - ub.value) < 3.0 * (ua.std_error + ub.std_error) + 2e-3);
    }
}
