#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppde/bsde.hpp"
#include "ppde/functional.hpp"
#include "ppde/generator.hpp"

namespace ppde {

// Smooth control of finitely many path nodes: a polynomial in
// (t, w_{t_1 ^ t}, ..., w_{t_n ^ t}) per output coordinate.
struct PolynomialControl {
    std::vector<int> node_indices;           // on the master grid
    int dim = 1;                             // output dimension (= path dim)
    std::vector<std::vector<int>> exponents; // over 1 + n*dim variables
    std::vector<std::vector<double>> coef;   // per output coordinate

    double eval(int k, const DiscretePath& path, int coord) const;
};

// Per-path, per-node control samples on a batch; start[m] is the first live
// node of path m (segment anchors).
struct ControlSamples {
    int dim = 1;
    int steps = 0;            // master N; nodes 0..N-1 carry values
    std::vector<double> z;    // m x N x dim
    std::vector<int> start;   // per path

    double at(int m, int k, int i = 0) const {
        return z[(static_cast<std::size_t>(m) * steps + k) * dim + i];
    }
    double& at(int m, int k, int i = 0) {
        return z[(static_cast<std::size_t>(m) * steps + k) * dim + i];
    }
};

ControlSamples samples_from_solution(const BSDESolution& sol);

struct ProjectionError : std::runtime_error {
    double achieved;
    explicit ProjectionError(const std::string& what, double achieved_)
        : std::runtime_error(what), achieved(achieved_) {}
};

struct ProjectionOptions {
    std::vector<int> node_indices;  // empty: dyadic eighths of the grid
    int degree = 3;
    int max_degree = 6;             // escalation ceiling when a target is given
    ExecPolicy exec = ExecPolicy::parallel;
};

// Least-squares fit of the smooth control to the samples over the live region;
// reports the achieved weighted L2 error E int |psi - z|^2 dt. With a target,
// the degree escalates up to max_degree and an unreachable target throws.
struct Projection {
    PolynomialControl psi;
    ControlSamples z_tilde;  // psi evaluated on the batch
    double l2_error = 0.0;
    int degree_used = 0;
};
Projection smooth_basis_projection(const ControlSamples& z, const BrownianBatch& batch,
                                   const ProjectionOptions& opt,
                                   std::optional<double> target_l2 = std::nullopt);

// Trailing-window average over [t - h~, t), clamped at the per-path start:
//   z_eps_k = (1/w) sum_{j=k-w}^{k-1} z~_{max(j, start)},
//   theta_k = (z~_k - z~_{(k-w) v start}) / (w dt)
// so that z_eps_{k+1} - z_eps_k = theta_k dt exactly at grid scale.
struct Mollified {
    ControlSamples z_eps;
    ControlSamples theta;
    int window_steps = 1;
    double window = 0.0;
    double l2_vs_input = 0.0;      // E int |z_eps - z~|^2 dt
    double l2_vs_reference = 0.0;  // E int |z_eps - z_ref|^2 dt, if z_ref given
};
Mollified mollify(const ControlSamples& z_tilde, const BrownianBatch& batch, int window_steps,
                  const ControlSamples* z_reference = nullptr,
                  ExecPolicy exec = ExecPolicy::parallel);

// Window chosen by bisection so that l2_vs_reference < target (largest such
// window, falling back to one step).
Mollified mollify_to_target(const ControlSamples& z_tilde, const BrownianBatch& batch,
                            const ControlSamples& z_reference, double target,
                            ExecPolicy exec = ExecPolicy::parallel);

// Pathwise forward Euler of X_t = x0 - int f(s, B, X, z) ds + int z dB with an
// implicit (fixed point) y-step; the stochastic increments are the exact
// z_k . dB_k products.
std::vector<double> forward_ode(const std::vector<double>& x0, const Generator& f,
                                const ControlSamples& z, const BrownianBatch& batch,
                                ExecPolicy exec = ExecPolicy::parallel);

// Reference pair (X, Z): a smooth control psi0 of finitely many node values
// fitted to represent the terminal data, X the forward integral of psi0 from
// the solver value. Two fitting losses:
//   representation (default): least squares of g + sum f dt - y0 on the
//       stochastic-integral columns sum_k phi_q dB_k. No 1/sqrt(dt) noise
//       amplification; minimizes the terminal gap X_T - g directly.
//   projection: pointwise least squares on the solver's per-step Z samples.
// X_T still differs from g path-by-path by the representation error, which is
// reported, not hidden. Fields x/z are materialized only when store_fields
// (large grids run field-free; the reference is evaluated through psi0).
enum class ConsolidateMode { representation, projection };

struct ReferenceSolution {
    const BrownianBatch* batch = nullptr;
    const Generator* f = nullptr;
    double y0 = 0.0;
    double y0_se = 0.0;
    PolynomialControl psi0;
    bool fields_stored = false;
    ControlSamples z;       // when fields_stored
    std::vector<double> x;  // when fields_stored, m x (N+1)
    double terminal_gap_rms = 0.0;  // rms of X_T - g over paths

    double X(int m, int k) const {
        return x[static_cast<std::size_t>(m) * (batch->grid().steps() + 1) + k];
    }
    double Zref(int m, int k, int i = 0) const {
        return fields_stored ? z.at(m, k, i) : psi0.eval(k, batch->path(m), i);
    }
};
struct ReferenceOptions {
    ConsolidateMode mode = ConsolidateMode::representation;
    ProjectionOptions projection{};
    bool store_fields = true;
    ExecPolicy exec = ExecPolicy::parallel;
};
ReferenceSolution make_reference(const BSDESolution& sol, const Generator& f,
                                 const TerminalFunctional& g, const BrownianBatch& batch,
                                 const ReferenceOptions& opt = {});
// Driver-free variant: no backward solve needed, the origin value is the
// plain sample mean. Requires f identically zero.
ReferenceSolution make_reference(const Generator& f, const TerminalFunctional& g,
                                 const BrownianBatch& batch, const ReferenceOptions& opt = {});

struct StitchOptions {
    ProjectionOptions projection{};
    double failure_fraction = 0.01;  // empirical tolerance on the sup-error event
    int max_segments = 64;
    double target_scale = 1.0;  // multiplies the eps^3/C projection target
    bool store_fields = true;   // materialize z_eps/theta/x_eps arrays
    ExecPolicy exec = ExecPolicy::parallel;
};

struct SegmentRecord {
    int index = 0;
    double eps_level = 0.0;
    double target_h = 0.0;
    double achieved_h = 0.0;       // projection error vs the reference
    double mollified_l2 = 0.0;     // z_eps vs reference
    int window_steps = 1;
    int degree_used = 0;
    int paths_entering = 0;
    int crossings = 0;             // tau_{i+1} < N
    PolynomialControl psi;
};

struct PiecewiseSmoothApprox {
    double eps = 0.0;
    double chebyshev_c = 0.0;  // the constant in h = eps^3 / C
    bool fields_stored = false;
    std::vector<double> x_eps;  // m x (N+1), when fields_stored
    ControlSamples z_eps;       // when fields_stored
    ControlSamples theta;       // when fields_stored
    std::vector<std::vector<int>> taus;  // taus[i][m], tau_0 = start
    std::vector<double> x_at_tau;        // m x (#segments+1): X_eps at the taus
    std::vector<double> eps_levels;
    std::vector<SegmentRecord> segments;
    double budget = 0.0;                   // sum of eps_i spent
    double sup_error_ok_fraction = 0.0;    // P(sup |X_eps - X| <= eps)
    double empirical_crossing_mass = 0.0;  // sum_i crossings_i / M

    double Xeps(int m, int k, int steps) const {
        return x_eps[static_cast<std::size_t>(m) * (steps + 1) + k];
    }
    int segment_at(int m, int k) const {  // which segment drives node k of path m
        int seg = 0;
        for (std::size_t i = 1; i + 1 < taus.size(); ++i)
            if (taus[i][static_cast<std::size_t>(m)] <= k) seg = static_cast<int>(i);
        return seg;
    }
};

PiecewiseSmoothApprox stitch(const Generator& f, const ReferenceSolution& ref, double eps,
                             const StitchOptions& opt = {});

// One stitched segment viewed as a smooth field on the local window of its
// per-path anchor, via
//   v(s, w) = Z_eps_s w_s - sum_{r<s} theta_r w_r dt,
//   u(s, w) = x - sum_{r<s} f(r, concat, u, Z_eps_r) dt + v(s, w)
// evaluated along arbitrary (also bumped) suffix paths.
struct SmoothSolutionSegment {
    DiscretePath host{TimeGrid(1.0, 1), 1, PathFlavor::continuous};  // anchor prefix
    int anchor_index = 0;
    double x0 = 0.0;
    PolynomialControl psi;
    int window_steps = 1;
    Generator f;
};

SmoothSolutionSegment segment_field(const PiecewiseSmoothApprox& approx,
                                    const ReferenceSolution& ref, const Generator& f,
                                    int path_index, int segment_index);

// u-hat evaluated at local node j along the local (re-anchored) path.
double segment_value(const SmoothSolutionSegment& seg, const DiscretePath& local_path, int j);
// the segment's own control at local node j (the value the space derivative
// must reproduce)
double segment_control(const SmoothSolutionSegment& seg, const DiscretePath& local_path, int j,
                       int coord = 0);
PathFunctional segment_functional(const SmoothSolutionSegment& seg);

struct SegmentCheckReport {
    double worst_dx_gap = 0.0;   // |numerical dx - Z_eps|
    double worst_dxx = 0.0;      // |numerical dxx|
    double worst_dt_gap = 0.0;   // |numerical dt + f|
    double worst_operator = 0.0; // |L u|
    int points = 0;
};
SegmentCheckReport smooth_segment_check(const SmoothSolutionSegment& seg,
                                        const std::vector<DiscretePath>& local_paths,
                                        const std::vector<int>& local_nodes);

// The one-sided construction around the stitched field: integrate the same
// control from x0 +- e^{L0 T} eps, check terminal domination of g and the
// sup-distance to X_eps, and report the certified one-sided and two-sided
// bounds on the classical-envelope gap.
struct PerronGapResult {
    double eps = 0.0;
    double u0_0 = 0.0;
    double u0_se = 0.0;
    double u_eps_0 = 0.0;        // supersolution start value
    double u_minus_eps_0 = 0.0;  // subsolution start value
    double domination_fraction_super = 0.0;  // P(u^eps_T >= g)
    double domination_fraction_sub = 0.0;    // P(u^-eps_T <= g)
    double sup_gap_super = 0.0;              // max_t |u^eps - X_eps| observed
    double sup_gap_allowed = 0.0;            // e^{2 L0 T} eps
    double terminal_margin_rms = 0.0;        // rms of u^eps_T - g
    double certified_one_sided = 0.0;        // eps (1 + e^{L0 T})
    double certified_gap = 0.0;              // 2 eps (1 + e^{L0 T})
    double observed_gap = 0.0;               // u_eps_0 - u_minus_eps_0
    bool ok = false;
};
PerronGapResult perron_gap(const Generator& f, const TerminalFunctional& g,
                           const ReferenceSolution& ref, const PiecewiseSmoothApprox& approx,
                           double delta = 0.01, ExecPolicy exec = ExecPolicy::parallel);

double chebyshev_chain_constant(double lipschitz, double horizon, int dim);

}  // namespace ppde
