#include "ppde/bank_baum.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "ppde/derivatives.hpp"
#include "ppde/path_ops.hpp"
#include "ppde/regression.hpp"

namespace ppde {

double PolynomialControl::eval(int k, const DiscretePath& path, int coord) const {
    const int n_nodes = static_cast<int>(node_indices.size());
    const double t = path.grid().time(k);
    std::vector<double> vars(1 + static_cast<std::size_t>(n_nodes) * dim);
    vars[0] = t;
    for (int j = 0; j < n_nodes; ++j) {
        const int idx = std::min(node_indices[static_cast<std::size_t>(j)], k);
        for (int i = 0; i < dim; ++i)
            vars[1 + static_cast<std::size_t>(j) * dim + i] = path.value(idx, i);
    }
    double out = 0.0;
    const auto& c = coef[static_cast<std::size_t>(coord)];
    for (std::size_t mono = 0; mono < exponents.size(); ++mono) {
        double v = c[mono];
        if (v == 0.0) continue;
        const auto& e = exponents[mono];
        for (std::size_t q = 0; q < vars.size(); ++q)
            for (int rep = 0; rep < e[q]; ++rep) v *= vars[q];
        out += v;
    }
    return out;
}

ControlSamples samples_from_solution(const BSDESolution& sol) {
    ControlSamples s;
    s.dim = sol.dim;
    s.steps = sol.grid.steps();
    s.z = sol.z;
    s.start.assign(static_cast<std::size_t>(sol.num_paths), sol.start_index);
    return s;
}

namespace {

std::vector<int> default_nodes(const TimeGrid& grid) {
    std::vector<int> nodes;
    const int n = grid.steps();
    for (int j = 1; j <= 8; ++j) {
        int idx = static_cast<int>(std::llround(static_cast<double>(j) * n / 8.0));
        idx = std::clamp(idx, 1, n);
        if (nodes.empty() || nodes.back() != idx) nodes.push_back(idx);
    }
    return nodes;
}

double weighted_l2(const ControlSamples& a, const ControlSamples& b, const BrownianBatch& batch) {
    // E int |a - b|^2 dt over the live region (per-path start to N)
    const int m = static_cast<int>(a.start.size());
    const int n = a.steps;
    const double dt = batch.grid().dt();
    double acc = 0.0;
    for (int mi = 0; mi < m; ++mi)
        for (int k = a.start[static_cast<std::size_t>(mi)]; k < n; ++k)
            for (int i = 0; i < a.dim; ++i) {
                const double d = a.at(mi, k, i) - b.at(mi, k, i);
                acc += d * d * dt;
            }
    return acc / m;
}

Projection project_once(const ControlSamples& z, const BrownianBatch& batch,
                        const std::vector<int>& nodes, int degree, ExecPolicy exec) {
    const int m = batch.num_paths();
    const int n = batch.grid().steps();
    const int d = z.dim;
    const int nvars = 1 + static_cast<int>(nodes.size()) * d;
    auto expo = monomial_exponents(nvars, degree);
    const int p = static_cast<int>(expo.size());

    // count live samples
    std::vector<std::int64_t> row_offset(static_cast<std::size_t>(m) + 1, 0);
    for (int mi = 0; mi < m; ++mi)
        row_offset[static_cast<std::size_t>(mi) + 1] =
            row_offset[static_cast<std::size_t>(mi)] +
            std::max(0, n - z.start[static_cast<std::size_t>(mi)]);
    const std::int64_t rows = row_offset[static_cast<std::size_t>(m)];

    std::vector<double> design(static_cast<std::size_t>(rows) * p);
    for_each_index(exec, m, [&](std::int64_t mi) {
        const DiscretePath& path = batch.path(static_cast<int>(mi));
        std::vector<double> vars(static_cast<std::size_t>(nvars));
        std::int64_t r = row_offset[static_cast<std::size_t>(mi)];
        for (int k = z.start[static_cast<std::size_t>(mi)]; k < n; ++k, ++r) {
            vars[0] = batch.grid().time(k);
            for (std::size_t j = 0; j < nodes.size(); ++j) {
                const int idx = std::min(nodes[j], k);
                for (int i = 0; i < d; ++i)
                    vars[1 + j * static_cast<std::size_t>(d) + i] = path.value(idx, i);
            }
            for (int q = 0; q < p; ++q) {
                double v = 1.0;
                const auto& e = expo[static_cast<std::size_t>(q)];
                for (int w = 0; w < nvars; ++w)
                    for (int rep = 0; rep < e[static_cast<std::size_t>(w)]; ++rep)
                        v *= vars[static_cast<std::size_t>(w)];
                design[static_cast<std::size_t>(r) * p + q] = v;
            }
        }
    });

    // Gram, entry-parallel with fixed row order
    std::vector<double> gram(static_cast<std::size_t>(p) * p, 0.0);
    const std::int64_t entries = static_cast<std::int64_t>(p) * (p + 1) / 2;
    for_each_index(exec, entries, [&](std::int64_t e) {
        int i = 0;
        std::int64_t rem = e;
        while (rem >= p - i) {
            rem -= p - i;
            ++i;
        }
        const int j = i + static_cast<int>(rem);
        double s = 0.0;
        for (std::int64_t r = 0; r < rows; ++r)
            s += design[static_cast<std::size_t>(r) * p + i] *
                 design[static_cast<std::size_t>(r) * p + j];
        gram[static_cast<std::size_t>(i) * p + j] = s;
        gram[static_cast<std::size_t>(j) * p + i] = s;
    });

    Projection out;
    out.degree_used = degree;
    out.psi.node_indices = nodes;
    out.psi.dim = d;
    out.psi.exponents = expo;
    out.psi.coef.assign(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(p), 0.0));
    out.z_tilde.dim = d;
    out.z_tilde.steps = n;
    out.z_tilde.start = z.start;
    out.z_tilde.z.assign(static_cast<std::size_t>(m) * n * d, 0.0);

    Eigen::MatrixXd G(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) G(i, j) = gram[static_cast<std::size_t>(i) * p + j];
    // tiny ridge keeps collinear node features harmless
    const double ridge = 1e-10 * std::max(1.0, G.trace() / p);
    for (int i = 0; i < p; ++i) G(i, i) += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);

    for (int i = 0; i < d; ++i) {
        Eigen::VectorXd b(p);
        for (int q = 0; q < p; ++q) {
            double s = 0.0;
            for (int mi = 0; mi < m; ++mi) {
                std::int64_t r = row_offset[static_cast<std::size_t>(mi)];
                for (int k = z.start[static_cast<std::size_t>(mi)]; k < n; ++k, ++r)
                    s += design[static_cast<std::size_t>(r) * p + q] * z.at(mi, k, i);
            }
            b(q) = s;
        }
        Eigen::VectorXd c = ldlt.solve(b);
        for (int q = 0; q < p; ++q) out.psi.coef[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)] = c(q);
    }

    // evaluate psi on the batch and measure the error
    for_each_index(exec, m, [&](std::int64_t mi) {
        std::int64_t r = row_offset[static_cast<std::size_t>(mi)];
        for (int k = z.start[static_cast<std::size_t>(mi)]; k < n; ++k, ++r)
            for (int i = 0; i < d; ++i) {
                double v = 0.0;
                for (int q = 0; q < p; ++q)
                    v += design[static_cast<std::size_t>(r) * p + q] *
                         out.psi.coef[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)];
                out.z_tilde.at(static_cast<int>(mi), k, i) = v;
            }
    });
    out.l2_error = weighted_l2(out.z_tilde, z, batch);
    return out;
}

}  // namespace

Projection smooth_basis_projection(const ControlSamples& z, const BrownianBatch& batch,
                                   const ProjectionOptions& opt,
                                   std::optional<double> target_l2) {
    std::vector<int> nodes = opt.node_indices.empty() ? default_nodes(batch.grid())
                                                      : opt.node_indices;
    int degree = opt.degree;
    Projection best = project_once(z, batch, nodes, degree, opt.exec);
    if (!target_l2) return best;
    while (best.l2_error >= *target_l2 && degree < opt.max_degree) {
        ++degree;
        Projection next = project_once(z, batch, nodes, degree, opt.exec);
        if (next.l2_error < best.l2_error) best = std::move(next);
    }
    if (best.l2_error >= *target_l2)
        throw ProjectionError("smooth_basis_projection: target " + std::to_string(*target_l2) +
                                  " unreachable, achieved " + std::to_string(best.l2_error),
                              best.l2_error);
    return best;
}

Mollified mollify(const ControlSamples& z_tilde, const BrownianBatch& batch, int window_steps,
                  const ControlSamples* z_reference, ExecPolicy exec) {
    if (window_steps < 1)
        throw std::invalid_argument("mollify: window must cover at least one grid step");
    const int m = static_cast<int>(z_tilde.start.size());
    const int n = z_tilde.steps;
    const int d = z_tilde.dim;
    const double dt = batch.grid().dt();

    Mollified out;
    out.window_steps = window_steps;
    out.window = window_steps * dt;
    out.z_eps.dim = out.theta.dim = d;
    out.z_eps.steps = out.theta.steps = n;
    out.z_eps.start = out.theta.start = z_tilde.start;
    out.z_eps.z.assign(static_cast<std::size_t>(m) * n * d, 0.0);
    out.theta.z.assign(static_cast<std::size_t>(m) * n * d, 0.0);

    for_each_index(exec, m, [&](std::int64_t mi) {
        const int mm = static_cast<int>(mi);
        const int k0 = z_tilde.start[static_cast<std::size_t>(mi)];
        for (int k = k0; k < n; ++k)
            for (int i = 0; i < d; ++i) {
                double acc = 0.0;
                for (int j = k - window_steps; j < k; ++j)
                    acc += z_tilde.at(mm, std::max(j, k0), i);
                out.z_eps.at(mm, k, i) = acc / window_steps;
                out.theta.at(mm, k, i) =
                    (z_tilde.at(mm, k, i) - z_tilde.at(mm, std::max(k - window_steps, k0), i)) /
                    (window_steps * dt);
            }
    });
    out.l2_vs_input = weighted_l2(out.z_eps, z_tilde, batch);
    if (z_reference) out.l2_vs_reference = weighted_l2(out.z_eps, *z_reference, batch);
    return out;
}

Mollified mollify_to_target(const ControlSamples& z_tilde, const BrownianBatch& batch,
                            const ControlSamples& z_reference, double target, ExecPolicy exec) {
    // largest window meeting the target; windows shrink the error toward the
    // projection floor as they shrink, so bisect on the window size
    int lo = 1, hi = std::max(1, z_tilde.steps / 4);
    Mollified best = mollify(z_tilde, batch, lo, &z_reference, exec);
    if (best.l2_vs_reference >= target) return best;  // even the floor misses: report it
    while (lo < hi) {
        const int mid = (lo + hi + 1) / 2;
        Mollified cand = mollify(z_tilde, batch, mid, &z_reference, exec);
        if (cand.l2_vs_reference < target) {
            best = std::move(cand);
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return best;
}

std::vector<double> forward_ode(const std::vector<double>& x0, const Generator& f,
                                const ControlSamples& z, const BrownianBatch& batch,
                                ExecPolicy exec) {
    const int m = batch.num_paths();
    const int n = batch.grid().steps();
    const int d = batch.dim();
    const double dt = batch.grid().dt();
    std::vector<double> x(static_cast<std::size_t>(m) * (n + 1), 0.0);

    for_each_index(exec, m, [&](std::int64_t mi) {
        const int mm = static_cast<int>(mi);
        const DiscretePath& path = batch.path(mm);
        const int k0 = z.start[static_cast<std::size_t>(mi)];
        double xv = x0.size() == 1 ? x0[0] : x0[static_cast<std::size_t>(mi)];
        for (int k = 0; k <= k0; ++k) x[static_cast<std::size_t>(mm) * (n + 1) + k] = xv;
        std::vector<double> zk(static_cast<std::size_t>(d));
        for (int k = k0; k < n; ++k) {
            for (int i = 0; i < d; ++i) zk[static_cast<std::size_t>(i)] = z.at(mm, k, i);
            double diffusion = 0.0;
            for (int i = 0; i < d; ++i)
                diffusion += zk[static_cast<std::size_t>(i)] * batch.value_increment(mm, k, i);
            const PathPoint p{&path, k};
            const double t = batch.grid().time(k);
            double next = xv - dt * f(t, p, xv, zk) + diffusion;  // predictor
            for (int it = 0; it < 3; ++it)                        // implicit y fixed point
                next = xv - dt * f(t, p, next, zk) + diffusion;
            xv = next;
            x[static_cast<std::size_t>(mm) * (n + 1) + k + 1] = xv;
        }
    });
    return x;
}

ReferenceSolution make_reference(const BSDESolution& sol, const Generator& f,
                                 const TerminalFunctional& g, const BrownianBatch& batch,
                                 const ReferenceOptions& opt) {
    ReferenceSolution ref;
    ref.batch = &batch;
    ref.y0 = sol.y0;
    ref.y0_se = sol.y0_se;
    ControlSamples raw = samples_from_solution(sol);
    if (opt.consolidate) {
        Projection proj = smooth_basis_projection(raw, batch, opt.projection, std::nullopt);
        ref.z = std::move(proj.z_tilde);
    } else {
        ref.z = std::move(raw);
    }
    ref.x = forward_ode({sol.y0}, f, ref.z, batch, opt.exec);
    const int n = batch.grid().steps();
    double acc = 0.0;
    for (int mi = 0; mi < batch.num_paths(); ++mi) {
        const double gap = ref.x[static_cast<std::size_t>(mi) * (n + 1) + n] - g(batch.path(mi));
        acc += gap * gap;
    }
    ref.terminal_gap_rms = std::sqrt(acc / batch.num_paths());
    return ref;
}

double chebyshev_chain_constant(double lipschitz, double horizon, int dim) {
    // Markov bound on P(sup discounted error >= level) assembled from the
    // Cauchy-Schwarz drift term and the Doob term of the error dynamics.
    return 8.0 * std::exp(2.0 * lipschitz * horizon) *
           (dim * lipschitz * lipschitz * horizon + 4.0);
}

PiecewiseSmoothApprox stitch(const Generator& f, const ReferenceSolution& ref, double eps,
                             const StitchOptions& opt) {
    const BrownianBatch& batch = *ref.batch;
    const int m = batch.num_paths();
    const int n = batch.grid().steps();
    const int d = batch.dim();
    const double l0 = f.lipschitz;
    const double T = batch.grid().horizon();

    PiecewiseSmoothApprox out;
    out.eps = eps;
    out.chebyshev_c = chebyshev_chain_constant(l0, T, d);
    out.z_eps.dim = out.theta.dim = d;
    out.z_eps.steps = out.theta.steps = n;
    out.z_eps.start.assign(static_cast<std::size_t>(m), batch.start_index());
    out.theta.start = out.z_eps.start;
    out.z_eps.z.assign(static_cast<std::size_t>(m) * n * d, 0.0);
    out.theta.z.assign(static_cast<std::size_t>(m) * n * d, 0.0);
    out.x_eps.assign(static_cast<std::size_t>(m) * (n + 1), ref.y0);
    out.segment_of_path_node.assign(static_cast<std::size_t>(m) * n, -1);

    std::vector<int> tau(static_cast<std::size_t>(m), batch.start_index());
    std::vector<double> carried(static_cast<std::size_t>(m), 0.0);  // e^{-L0 tau} |X^e - X| at tau
    std::vector<double> x_at_tau(static_cast<std::size_t>(m), ref.y0);
    out.taus.push_back(tau);

    for (int seg = 0; seg < opt.max_segments; ++seg) {
        std::vector<int> active;
        for (int mi = 0; mi < m; ++mi)
            if (tau[static_cast<std::size_t>(mi)] < n) active.push_back(mi);
        if (active.empty()) break;

        const double eps_i = std::ldexp(1.0, -seg - 2) * std::exp(-l0 * T) * eps;
        out.eps_levels.push_back(eps_i);
        out.budget += eps_i;
        const double target_h = eps_i * eps_i * eps_i / out.chebyshev_c;

        // live region for this segment: [tau_m, N) on active paths only
        ControlSamples zin;
        zin.dim = d;
        zin.steps = n;
        zin.z = ref.z.z;
        zin.start.assign(static_cast<std::size_t>(m), n);  // inactive paths contribute nothing
        for (int mi : active) zin.start[static_cast<std::size_t>(mi)] = tau[static_cast<std::size_t>(mi)];

        Projection proj = smooth_basis_projection(zin, batch, opt.projection, target_h);
        Mollified mol = mollify_to_target(proj.z_tilde, batch, zin, 2.0 * target_h, opt.exec);

        // forward run of the segment from the carried anchor values
        ControlSamples zseg = mol.z_eps;
        std::vector<double> anchors(static_cast<std::size_t>(m), 0.0);
        for (int mi = 0; mi < m; ++mi) anchors[static_cast<std::size_t>(mi)] = x_at_tau[static_cast<std::size_t>(mi)];
        std::vector<double> xseg = forward_ode(anchors, f, zseg, batch, opt.exec);

        // crossing rule per active path
        SegmentRecord rec;
        rec.index = seg;
        rec.eps_level = eps_i;
        rec.target_h = target_h;
        rec.achieved_h = proj.l2_error;
        rec.mollified_l2 = mol.l2_vs_reference;
        rec.window_steps = mol.window_steps;
        rec.degree_used = proj.degree_used;
        rec.paths_entering = static_cast<int>(active.size());
        rec.psi = proj.psi;

        std::vector<int> tau_next = tau;
        for (int mi : active) {
            const std::size_t ms = static_cast<std::size_t>(mi);
            const int k_from = tau[ms];
            const double barrier = eps_i + carried[ms];
            int crossing = n;
            for (int k = k_from + 1; k <= n; ++k) {
                const double disc = std::exp(-l0 * batch.grid().time(k)) *
                                    std::abs(xseg[ms * (n + 1) + k] - ref.x[ms * (n + 1) + k]);
                if (disc >= barrier) {
                    crossing = k;
                    break;
                }
            }
            const int k_to = crossing;  // copy segment on [k_from, k_to)
            for (int k = k_from; k < k_to && k < n; ++k) {
                for (int i = 0; i < d; ++i) {
                    out.z_eps.at(mi, k, i) = zseg.at(mi, k, i);
                    out.theta.at(mi, k, i) = mol.theta.at(mi, k, i);
                }
                out.segment_of_path_node[ms * n + k] = seg;
            }
            for (int k = k_from; k <= k_to; ++k)
                out.x_eps[ms * (n + 1) + k] = xseg[ms * (n + 1) + k];
            if (crossing < n) {
                ++rec.crossings;
                tau_next[ms] = crossing;
                carried[ms] = std::exp(-l0 * batch.grid().time(crossing)) *
                              std::abs(xseg[ms * (n + 1) + crossing] -
                                       ref.x[ms * (n + 1) + crossing]);
                x_at_tau[ms] = xseg[ms * (n + 1) + crossing];
            } else {
                tau_next[ms] = n;
            }
        }
        out.segments.push_back(std::move(rec));
        out.taus.push_back(tau_next);
        tau = std::move(tau_next);
    }

    int ok = 0;
    for (int mi = 0; mi < m; ++mi) {
        double sup = 0.0;
        for (int k = batch.start_index(); k <= n; ++k)
            sup = std::max(sup, std::abs(out.x_eps[static_cast<std::size_t>(mi) * (n + 1) + k] -
                                         ref.x[static_cast<std::size_t>(mi) * (n + 1) + k]));
        if (sup <= eps) ++ok;
    }
    out.sup_error_ok_fraction = static_cast<double>(ok) / m;
    double crossings = 0.0;
    for (const auto& s : out.segments) crossings += s.crossings;
    out.empirical_crossing_mass = crossings / m;
    return out;
}

SmoothSolutionSegment segment_field(const PiecewiseSmoothApprox& approx,
                                    const ReferenceSolution& ref, const Generator& f,
                                    int path_index, int segment_index) {
    const BrownianBatch& batch = *ref.batch;
    const int n = batch.grid().steps();
    SmoothSolutionSegment seg;
    seg.host = batch.path(path_index);
    seg.anchor_index = approx.taus[static_cast<std::size_t>(segment_index)]
                                  [static_cast<std::size_t>(path_index)];
    seg.x0 = approx.Xeps(path_index, seg.anchor_index, n);
    seg.psi = approx.segments[static_cast<std::size_t>(segment_index)].psi;
    seg.window_steps = approx.segments[static_cast<std::size_t>(segment_index)].window_steps;
    seg.f = f;
    return seg;
}

namespace {

// z~, z_eps, theta and v along a concatenated path, local indices [0, j].
struct SegmentSweep {
    std::vector<double> z_tilde, z_eps, theta, v, u;
};

SegmentSweep sweep_segment(const SmoothSolutionSegment& seg, const DiscretePath& local_path,
                           int j_max) {
    const int k0 = seg.anchor_index;
    const double dt = seg.host.grid().dt();
    DiscretePath cat = concat(seg.host, k0, local_path);

    SegmentSweep s;
    s.z_tilde.assign(static_cast<std::size_t>(j_max) + 1, 0.0);
    s.z_eps.assign(static_cast<std::size_t>(j_max) + 1, 0.0);
    s.theta.assign(static_cast<std::size_t>(j_max) + 1, 0.0);
    s.v.assign(static_cast<std::size_t>(j_max) + 1, 0.0);
    s.u.assign(static_cast<std::size_t>(j_max) + 1, seg.x0);

    for (int j = 0; j <= j_max; ++j)
        s.z_tilde[static_cast<std::size_t>(j)] = seg.psi.eval(k0 + j, cat, 0);
    const int w = seg.window_steps;
    for (int j = 0; j <= j_max; ++j) {
        double acc = 0.0;
        for (int l = j - w; l < j; ++l) acc += s.z_tilde[static_cast<std::size_t>(std::max(l, 0))];
        s.z_eps[static_cast<std::size_t>(j)] = acc / w;
        s.theta[static_cast<std::size_t>(j)] =
            (s.z_tilde[static_cast<std::size_t>(j)] - s.z_tilde[static_cast<std::size_t>(std::max(j - w, 0))]) /
            (w * dt);
    }
    // v(s) = z_eps_s w_s - sum_{r<s} theta_r w_r dt (left sum, local values)
    for (int j = 0; j <= j_max; ++j) {
        double acc = 0.0;
        for (int r = 0; r < j; ++r)
            acc += s.theta[static_cast<std::size_t>(r)] * local_path.value(r, 0) * dt;
        s.v[static_cast<std::size_t>(j)] =
            s.z_eps[static_cast<std::size_t>(j)] * local_path.value(j, 0) - acc;
    }
    // u(s) = x0 - sum_{r<s} f(t_r, cat, u_{r+1}, z_eps_r) dt + v(s), implicit in y
    for (int j = 0; j < j_max; ++j) {
        const double t = seg.host.grid().time(k0 + j);
        const PathPoint p{&cat, k0 + j};
        const double zr = s.z_eps[static_cast<std::size_t>(j)];
        const double dv = s.v[static_cast<std::size_t>(j) + 1] - s.v[static_cast<std::size_t>(j)];
        const double base = s.u[static_cast<std::size_t>(j)];
        double next = base - dt * seg.f(t, p, base, std::span<const double>(&zr, 1)) + dv;
        for (int it = 0; it < 3; ++it)
            next = base - dt * seg.f(t, p, next, std::span<const double>(&zr, 1)) + dv;
        s.u[static_cast<std::size_t>(j) + 1] = next;
    }
    return s;
}

}  // namespace

double segment_value(const SmoothSolutionSegment& seg, const DiscretePath& local_path, int j) {
    return sweep_segment(seg, local_path, j).u[static_cast<std::size_t>(j)];
}

double segment_control(const SmoothSolutionSegment& seg, const DiscretePath& local_path, int j,
                       int coord) {
    (void)coord;
    return sweep_segment(seg, local_path, j).z_eps[static_cast<std::size_t>(j)];
}

PathFunctional segment_functional(const SmoothSolutionSegment& seg) {
    auto held = std::make_shared<SmoothSolutionSegment>(seg);
    return PathFunctional(
        "stitched_segment",
        [held](const PathPoint& p) { return segment_value(*held, *p.path, p.k); }, true);
}

SegmentCheckReport smooth_segment_check(const SmoothSolutionSegment& seg,
                                        const std::vector<DiscretePath>& local_paths,
                                        const std::vector<int>& local_nodes) {
    SegmentCheckReport rep;
    PathFunctional u = segment_functional(seg);
    for (const DiscretePath& lp : local_paths)
        for (int j : local_nodes) {
            if (j < 1 || j > lp.grid().steps()) continue;
            const PathPoint p{&lp, j};
            const double h = default_vertical_step(lp, j);
            const double dx = vertical_derivative(u, p, h)[0];
            const double dxx = vertical_hessian(u, p, h)[0];
            const double zval = segment_control(seg, lp, j);
            double dt_num = 0.0;
            if (j < lp.grid().steps()) dt_num = horizontal_derivative(u, p, 1);
            DiscretePath cat = concat(seg.host, seg.anchor_index, lp);
            const PathPoint pc{&cat, seg.anchor_index + j};
            const double uval = segment_value(seg, lp, j);
            const double fval =
                seg.f(lp.grid().time(j) + seg.host.grid().time(seg.anchor_index), pc, uval,
                      std::span<const double>(&zval, 1));
            rep.worst_dx_gap = std::max(rep.worst_dx_gap, std::abs(dx - zval));
            rep.worst_dxx = std::max(rep.worst_dxx, std::abs(dxx));
            if (j < lp.grid().steps()) {
                rep.worst_dt_gap = std::max(rep.worst_dt_gap, std::abs(dt_num + fval));
                rep.worst_operator =
                    std::max(rep.worst_operator, std::abs(-dt_num - 0.5 * dxx - fval));
            }
            ++rep.points;
        }
    return rep;
}

PerronGapResult perron_gap(const Generator& f, const TerminalFunctional& g,
                           const ReferenceSolution& ref, const PiecewiseSmoothApprox& approx,
                           double delta, ExecPolicy exec) {
    const BrownianBatch& batch = *ref.batch;
    const int m = batch.num_paths();
    const int n = batch.grid().steps();
    const double l0 = f.lipschitz;
    const double T = batch.grid().horizon();
    const double eps = approx.eps;
    const double lift = std::exp(l0 * T) * eps;

    PerronGapResult out;
    out.eps = eps;
    out.u0_0 = ref.y0;
    out.u0_se = ref.y0_se;

    std::vector<double> up = forward_ode({ref.y0 + lift}, f, approx.z_eps, batch, exec);
    std::vector<double> dn = forward_ode({ref.y0 - lift}, f, approx.z_eps, batch, exec);
    out.u_eps_0 = ref.y0 + lift;
    out.u_minus_eps_0 = ref.y0 - lift;

    int dom_up = 0, dom_dn = 0;
    double sup_gap = 0.0, margin_ss = 0.0;
    for (int mi = 0; mi < m; ++mi) {
        const std::size_t ms = static_cast<std::size_t>(mi);
        const double gv = g(batch.path(mi));
        const double margin = up[ms * (n + 1) + n] - gv;
        if (margin >= 0.0) ++dom_up;
        if (dn[ms * (n + 1) + n] - gv <= 0.0) ++dom_dn;
        margin_ss += margin * margin;
        for (int k = batch.start_index(); k <= n; ++k)
            sup_gap = std::max(sup_gap, std::abs(up[ms * (n + 1) + k] -
                                                 approx.x_eps[ms * (n + 1) + k]));
    }
    out.domination_fraction_super = static_cast<double>(dom_up) / m;
    out.domination_fraction_sub = static_cast<double>(dom_dn) / m;
    out.sup_gap_super = sup_gap;
    out.sup_gap_allowed = std::exp(2.0 * l0 * T) * eps * (1.0 + 1e-9);
    out.terminal_margin_rms = std::sqrt(margin_ss / m);
    out.certified_one_sided = eps * (1.0 + std::exp(l0 * T));
    out.certified_gap = 2.0 * eps * (1.0 + std::exp(l0 * T));
    out.observed_gap = out.u_eps_0 - out.u_minus_eps_0;
    out.ok = out.domination_fraction_super >= 1.0 - delta &&
             out.domination_fraction_sub >= 1.0 - delta && out.sup_gap_super <= out.sup_gap_allowed;
    return out;
}

}  // namespace ppde
