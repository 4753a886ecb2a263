#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ppde/brownian.hpp"
#include "ppde/exec.hpp"
#include "ppde/functional.hpp"
#include "ppde/generator.hpp"

namespace ppde {

// Feedback drift control: beta(k, path prefix) with every component in
// [-bound, bound]. Violations are an error, not silently clamped.
struct DriftControl {
    std::function<void(int k, const PathPoint&, std::span<double> out)> beta;
    double bound = 0.0;
    std::string description;
};

DriftControl constant_drift(std::vector<double> b);

// Discrete exponential change-of-measure weights along each path:
//   M_{k+1} = M_k * exp(beta_k . dB_k - 1/2 |beta_k|^2 dt),  M_start = 1.
struct GirsanovWeight {
    int start_index = 0;
    int num_paths = 0;
    int nodes = 0;
    std::vector<double> m;  // per path per node

    double at(int path, int k) const {
        return m[static_cast<std::size_t>(path) * nodes + k];
    }
    double terminal(int path) const { return at(path, nodes - 1); }
};

GirsanovWeight girsanov_weight(const BrownianBatch& batch, const DriftControl& control,
                               ExecPolicy exec = ExecPolicy::parallel);

struct WeightedMean {
    double value = 0.0;
    double std_error = 0.0;
};

// E under the tilted measure of xi evaluated at the horizon:
// sum_m M_T(m) xi(path_m) / M.
WeightedMean tilted_expectation(const PathFunctional& xi, const BrownianBatch& batch,
                                const DriftControl& control,
                                ExecPolicy exec = ExecPolicy::parallel);

// Drift-resimulation estimator of the same quantity: simulate paths with the
// feedback drift added and average xi under the original measure.
WeightedMean tilted_expectation_resim(const PathFunctional& xi, const BrownianBatch& batch,
                                      const DriftControl& control,
                                      ExecPolicy exec = ExecPolicy::parallel);

}  // namespace ppde
