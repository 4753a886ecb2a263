#pragma once

#include <vector>

#include "ppde/brownian.hpp"
#include "ppde/derivatives.hpp"
#include "ppde/exec.hpp"
#include "ppde/functional.hpp"

namespace ppde {

// Per-step defect of the functional change-of-variable identity
//   u_{k+1} - u_k  =  dt_u * dt + 1/2 tr(dxx_u) * dt + dx_u . dB_k
// accumulated along simulated Brownian paths (quadratic variation dt * I).
struct ItoResidualReport {
    std::vector<double> max_abs;  // per path
    std::vector<double> rms;      // per path
    double max_abs_all = 0.0;
    double rms_all = 0.0;
};

struct ItoOptions {
    // Derivative steps; 0 means the default h = 1e-4 (1 + ||path||_t).
    double h = 0.0;
    int delta_steps = 1;
    ExecPolicy exec = ExecPolicy::parallel;
};

ItoResidualReport ito_residual(const PathFunctional& u, const BrownianBatch& batch,
                               const ItoOptions& opt = {});

}  // namespace ppde
