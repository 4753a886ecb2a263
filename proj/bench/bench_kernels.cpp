// Timing comparison of the serial reference kernels against the OpenMP ones.
// The two must produce bit-identical output (asserted here as well as in the
// test suite); the benchmark reports wall times and speedups.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "ppde/bank_baum.hpp"
#include "ppde/bsde.hpp"
#include "ppde/catalog.hpp"
#include "ppde/girsanov.hpp"
#include "ppde/ito.hpp"

using namespace ppde;

namespace {

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

template <class F>
double timed(F&& fn) {
    const auto a = std::chrono::steady_clock::now();
    fn();
    const auto b = std::chrono::steady_clock::now();
    return seconds(a, b);
}

int g_failures = 0;

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-24s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n", name, serial,
                parallel, parallel > 0 ? serial / parallel : 0.0,
                identical ? "bit-identical" : "MISMATCH");
    if (!identical) ++g_failures;
}

}  // namespace

int main(int argc, char** argv) {
    const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
    const int m = quick ? 2000 : 40000;
    const int n = quick ? 32 : 128;
    const TimeGrid grid(1.0, n);

    std::printf("paths=%d steps=%d threads=%d\n", m, n, max_threads());

    // simulation
    BrownianBatch bs, bp;
    const double ts = timed([&] { bs = sample_brownian(grid, 1, m, 7, ExecPolicy::serial); });
    const double tp = timed([&] { bp = sample_brownian(grid, 1, m, 7, ExecPolicy::parallel); });
    bool same = true;
    for (int mi = 0; mi < m && same; ++mi)
        for (int k = 0; k <= n && same; ++k)
            same = bs.path(mi).value(k, 0) == bp.path(mi).value(k, 0);
    report("sample_brownian", ts, tp, same);

    // change-of-variable residuals
    PathFunctional u = catalog::square_minus_t();
    ItoResidualReport rs, rp;
    ItoOptions io;
    io.exec = ExecPolicy::serial;
    const double is = timed([&] { rs = ito_residual(u, bs, io); });
    io.exec = ExecPolicy::parallel;
    const double ip = timed([&] { rp = ito_residual(u, bs, io); });
    report("ito_residual", is, ip, rs.rms_all == rp.rms_all && rs.max_abs_all == rp.max_abs_all);

    // exponential weights
    DriftControl ctl = constant_drift({0.4});
    GirsanovWeight ws, wp;
    const double gs = timed([&] { ws = girsanov_weight(bs, ctl, ExecPolicy::serial); });
    const double gp = timed([&] { wp = girsanov_weight(bs, ctl, ExecPolicy::parallel); });
    same = ws.m == wp.m;
    report("girsanov_weight", gs, gp, same);

    // backward solve
    Generator f = catalog::gen_linear_decay(0.1);
    TerminalFunctional g = catalog::term_cos();
    BSDESolveOptions so;
    so.exec = ExecPolicy::serial;
    BSDESolution sols, solp;
    const double ss = timed([&] { sols = solve_bsde_regression(f, g, bs, so); });
    so.exec = ExecPolicy::parallel;
    const double sp = timed([&] { solp = solve_bsde_regression(f, g, bs, so); });
    report("solve_bsde_regression", ss, sp, sols.y == solp.y && sols.z == solp.z);

    // stitched construction
    BSDESolveOptions mk;
    mk.basis = markov_basis(6);
    mk.exec = ExecPolicy::serial;
    BSDESolution ref_sol_s = solve_bsde_regression(catalog::gen_zero(), g, bs, mk);
    ReferenceOptions ro;
    ro.exec = ExecPolicy::serial;
    ReferenceSolution refs = make_reference(ref_sol_s, catalog::gen_zero(), g, bs, ro);
    StitchOptions sto;
    sto.exec = ExecPolicy::serial;
    PiecewiseSmoothApprox as, ap;
    const double bs_t = timed([&] { as = stitch(catalog::gen_zero(), refs, 0.05, sto); });
    sto.exec = ExecPolicy::parallel;
    const double bp_t = timed([&] { ap = stitch(catalog::gen_zero(), refs, 0.05, sto); });
    report("stitch", bs_t, bp_t, as.x_eps == ap.x_eps && as.z_eps.z == ap.z_eps.z);

    if (g_failures) {
        std::printf("%d kernel(s) diverged between policies\n", g_failures);
        return 1;
    }
    return 0;
}
