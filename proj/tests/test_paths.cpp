#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ppde/brownian.hpp"
#include "ppde/catalog.hpp"
#include "ppde/csv.hpp"
#include "ppde/path_ops.hpp"
#include "ppde/stopping.hpp"

using namespace ppde;

namespace {

DiscretePath line_path(const TimeGrid& grid) {
    DiscretePath p(grid, 1, PathFlavor::continuous);
    for (int k = 0; k <= grid.steps(); ++k) p.at(k, 0) = grid.time(k);
    return p;
}

DiscretePath from_list(const TimeGrid& grid, std::initializer_list<double> vals,
                       PathFlavor flavor = PathFlavor::continuous) {
    return DiscretePath::from_values(grid, 1, flavor, std::vector<double>(vals));
}

}  // namespace

TEST_CASE("uniform norm") {
    TimeGrid g(1.0, 4);
    CHECK(uniform_norm(line_path(g), 4) == doctest::Approx(1.0));
    CHECK(uniform_norm(DiscretePath(g, 1, PathFlavor::continuous), 3) == 0.0);

    TimeGrid g2(1.0, 2);
    DiscretePath p = from_list(g2, {0.0, -2.0, 1.0});
    CHECK(uniform_norm(p, 2) == doctest::Approx(2.0));
    CHECK(uniform_norm(p, 1) == doctest::Approx(2.0));
    CHECK(uniform_norm(p, 0) == 0.0);
    CHECK_THROWS(uniform_norm(p, 3));
}

TEST_CASE("distance between path points") {
    TimeGrid g(1.0, 10);
    DiscretePath zero(g, 1, PathFlavor::continuous);
    CHECK(dist_inf(at_node(zero, 4), at_node(zero, 4)) == 0.0);

    // both paths flat zero, times 0.3 and 0.5
    CHECK(dist_inf(at_node(zero, 3), at_node(zero, 5)) == doctest::Approx(0.2));

    // zero path at t=0.5 against the constant-one cadlag path at t=1:
    // |dt| + sup = 0.5 + 1
    TimeGrid g2(1.0, 2);
    DiscretePath one = from_list(g2, {1.0, 1.0, 1.0}, PathFlavor::cadlag);
    DiscretePath zero2(g2, 1, PathFlavor::continuous);
    CHECK(dist_inf(at_node(zero2, 1), at_node(one, 2)) == doctest::Approx(1.5));
}

TEST_CASE("distance triangle inequality on random triples") {
    TimeGrid g(1.0, 16);
    BrownianBatch batch = sample_brownian(g, 1, 12, 99);
    for (int trial = 0; trial < 60; ++trial) {
        const int a = trial % 12, b = (trial * 5 + 1) % 12, c = (trial * 7 + 2) % 12;
        const int ka = static_cast<int>(GaussianStream::mix(trial) % 17);
        const int kb = static_cast<int>(GaussianStream::mix(trial + 100) % 17);
        const int kc = static_cast<int>(GaussianStream::mix(trial + 200) % 17);
        PathPoint pa = at_node(batch.path(a), ka), pb = at_node(batch.path(b), kb),
                  pc = at_node(batch.path(c), kc);
        CHECK(dist_inf(pa, pc) <= dist_inf(pa, pb) + dist_inf(pb, pc) + 1e-12);
        CHECK(dist_inf(pa, pb) == doctest::Approx(dist_inf(pb, pa)));
    }
}

TEST_CASE("concatenation") {
    TimeGrid g(1.0, 4);
    DiscretePath w = from_list(g, {0.0, 0.5, 1.0, 1.5, 2.0});

    // suffix identically zero: frozen extension
    DiscretePath zero_suffix(g.suffix(2), 1, PathFlavor::continuous);
    DiscretePath frozen = concat(w, 2, zero_suffix);
    for (int k = 0; k <= 4; ++k)
        CHECK(frozen.value(k, 0) == doctest::Approx(w.value(std::min(k, 2), 0)));

    // concat at 0 with the trivial prefix returns the suffix itself
    DiscretePath trivial(g, 1, PathFlavor::continuous);
    DiscretePath w2 = from_list(g, {0.0, -1.0, 0.25, 0.5, -1.0});
    DiscretePath back = concat(trivial, 0, w2);
    for (int k = 0; k <= 4; ++k) CHECK(back.value(k, 0) == w2.value(k, 0));

    // additivity of the endpoints: prefix ends at 1, suffix ends at -3
    DiscretePath tail = DiscretePath::from_values(g.suffix(2), 1, PathFlavor::continuous,
                                                  {0.0, -2.0, -3.0});
    CHECK(concat(w, 2, tail).value(4, 0) == doctest::Approx(1.0 - 3.0));

    // split-rejoin identity, exactly on the nodes
    BrownianBatch batch = sample_brownian(TimeGrid(2.0, 8), 1, 3, 5);
    for (int m = 0; m < 3; ++m) {
        const DiscretePath& full = batch.path(m);
        for (int split : {1, 4, 7}) {
            DiscretePath rejoined = concat(full, split, suffix_path(full, split));
            for (int k = 0; k <= 8; ++k)
                CHECK(rejoined.value(k, 0) == doctest::Approx(full.value(k, 0)).epsilon(1e-15));
        }
    }
}

TEST_CASE("freeze and bump") {
    TimeGrid g(1.0, 4);
    DiscretePath w = line_path(g);
    DiscretePath f2 = freeze(w, 2);
    CHECK(f2.value(3, 0) == doctest::Approx(0.5));
    CHECK(f2.value(4, 0) == doctest::Approx(0.5));
    DiscretePath fN = freeze(w, 4);
    for (int k = 0; k <= 4; ++k) CHECK(fN.value(k, 0) == w.value(k, 0));
    DiscretePath f0 = freeze(DiscretePath(g, 1, PathFlavor::continuous), 0);
    for (int k = 0; k <= 4; ++k) CHECK(f0.value(k, 0) == 0.0);

    DiscretePath b0 = bump(w, 2, 0, 0.0);
    CHECK(b0.flavor() == PathFlavor::cadlag);
    for (int k = 0; k <= 4; ++k) CHECK(b0.value(k, 0) == w.value(k, 0));

    DiscretePath b = bump(w, 2, 0, 0.25);
    CHECK(b.value(2, 0) == doctest::Approx(w.value(2, 0) + 0.25));
    CHECK(b.value(0, 0) == w.value(0, 0));
    CHECK(b.value(1, 0) == w.value(1, 0));
    CHECK(b.bump_marker().has_value());
    CHECK(b.bump_marker()->node == 2);
    CHECK_THROWS(bump(w, 2, 3, 0.1));
}

TEST_CASE("shifted functionals") {
    TimeGrid g(1.0, 10);

    // terminal value: shift turns it into prefix endpoint + local terminal
    PathFunctional term("terminal", [](const PathPoint& p) {
        return p.path->value(p.path->grid().steps(), 0);
    });
    BrownianBatch batch = sample_brownian(g, 1, 2, 11);
    const DiscretePath& w = batch.path(0);
    PathFunctional shifted = shift_functional(term, 4, w);
    DiscretePath local = suffix_path(batch.path(1), 4);
    CHECK(shifted(local, local.grid().steps()) ==
          doctest::Approx(w.value(4, 0) + local.value(local.grid().steps(), 0)));

    // shift at zero is the identity on functionals
    DiscretePath trivial(g, 1, PathFlavor::continuous);
    PathFunctional id_shift = shift_functional(term, 0, trivial);
    CHECK(id_shift(batch.path(1), 10) == doctest::Approx(term(batch.path(1), 10)));

    // running integral: the shifted value splits at the anchor (left sums)
    PathFunctional integral = catalog::running_integral();
    PathFunctional s_int = shift_functional(integral, 4, w);
    const double dt = g.dt();
    double prefix_sum = 0.0;
    for (int j = 0; j < 4; ++j) prefix_sum += w.value(j, 0) * dt;
    double suffix_sum = 0.0;
    for (int j = 0; j < local.grid().steps(); ++j)
        suffix_sum += (w.value(4, 0) + local.value(j, 0)) * dt;
    CHECK(s_int(local, local.grid().steps()) ==
          doctest::Approx(prefix_sum + suffix_sum).epsilon(1e-12));
}

TEST_CASE("first hitting rules") {
    TimeGrid g(1.0, 10);
    GridStoppingTime tau = first_hitting(catalog::time_functional(), 0.5);
    DiscretePath zero(g, 1, PathFlavor::continuous);
    CHECK(tau(zero) == 5);

    GridStoppingTime never = first_hitting(catalog::time_functional(), 99.0);
    CHECK(never(zero) == 10);

    PathFunctional absmax("absmax", [](const PathPoint& p) {
        double s = 0.0;
        for (int j = 0; j <= p.k; ++j) s = std::max(s, std::abs(p.path->value(j, 0)));
        return s;
    });
    CHECK(first_hitting(absmax, 0.0)(zero) == 0);
}

TEST_CASE("progressive measurability of the catalog") {
    TimeGrid g(1.0, 8);
    BrownianBatch batch = sample_brownian(g, 1, 4, 21);
    for (const std::string& name : catalog::functional_names()) {
        PathFunctional u = catalog::by_name(name);
        for (int m = 0; m < 4; ++m) {
            const DiscretePath& p = batch.path(m);
            for (int k = 0; k <= 6; k += 3) {
                const double before = u(p, k);
                DiscretePath mangled = p;
                for (int j = k + 1; j <= 8; ++j) mangled.at(j, 0) = 77.0 + j;
                CHECK(u(mangled, k) == doctest::Approx(before).epsilon(1e-15));
            }
        }
    }
}

TEST_CASE("stopping rules are non-anticipative") {
    TimeGrid g(1.0, 12);
    BrownianBatch batch = sample_brownian(g, 1, 6, 31);
    PathFunctional absval("absval", [](const PathPoint& p) { return std::abs(p.value(0)); });
    GridStoppingTime tau = first_hitting(absval, 0.4);
    for (int m = 0; m < 6; ++m) {
        const DiscretePath& p = batch.path(m);
        const int k = tau(p);
        DiscretePath mangled = p;
        for (int j = k + 1; j <= 12; ++j) mangled.at(j, 0) = -99.0;
        CHECK(tau(mangled) == k);
    }
}

TEST_CASE("path batch round trip through the csv format") {
    TimeGrid g(0.5, 6);
    BrownianBatch batch = sample_brownian(g, 2, 5, 77);
    write_paths_csv(batch, "/tmp/ppde_paths_test.csv");
    ParsedPaths parsed = read_paths_csv("/tmp/ppde_paths_test.csv");
    REQUIRE(parsed.paths.size() == 5);
    CHECK(parsed.dim == 2);
    CHECK(parsed.grid.steps() == 6);
    CHECK(parsed.grid.horizon() == doctest::Approx(0.5));
    for (int m = 0; m < 5; ++m)
        for (int k = 0; k <= 6; ++k)
            for (int i = 0; i < 2; ++i)
                CHECK(parsed.paths[static_cast<std::size_t>(m)].value(k, i) ==
                      doctest::Approx(batch.path(m).value(k, i)).epsilon(1e-15));
}

TEST_CASE("grid invariants") {
    CHECK_THROWS(TimeGrid(0.0, 5));
    CHECK_THROWS(TimeGrid(1.0, 0));
    TimeGrid g(2.0, 8);
    CHECK(g.time(0) == 0.0);
    CHECK(g.time(8) == doctest::Approx(2.0));
    CHECK(g.dt() == doctest::Approx(0.25));
    CHECK(g.suffix(3).steps() == 5);
    CHECK(g.suffix(3).horizon() == doctest::Approx(1.25));
    CHECK_THROWS(
        DiscretePath::from_values(TimeGrid(1.0, 1), 1, PathFlavor::continuous, {1.0, 2.0}));
}
