#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ppde {

// One experiment = one subcommand + a flat config. Every numeric default is
// explicit (seeds included); identical configs produce byte-identical
// artifacts.
struct ExperimentConfig {
    std::string subcommand;
    std::string out_dir = "out";

    double horizon = 1.0;
    int steps = 50;
    int num_paths = 10000;
    std::uint64_t seed = 42;
    int dim = 1;

    double L = 0.5;       // drift bound of the nonlinear expectation
    double lambda = 1.0;  // exponential scaling
    double eps = 0.05;    // approximation level of the stitched construction
    std::string method = "bsde";  // bsde | control_search

    std::string functional = "square_minus_t";
    std::string generator = "zero";
    double generator_param = 0.1;
    std::string terminal = "cos_terminal";
    double terminal_param = 1.0;

    int basis_degree = 2;
    std::string basis_features = "value,integral,max,min";
    int picard = 1;

    int anchors = 20;
    int inner_paths = 16384;
    int loc_steps = 8;
    double loc_radius = 0.3;
    double tolerance = 1e-3;
    int threads = 0;  // 0: library default
    bool serial = false;
    bool dump_paths = false;

    std::string canonical() const;  // stable key=value dump (hashed into the manifest)
};

ExperimentConfig config_from_json_file(const std::string& path, ExperimentConfig base = {});
void apply_env_overrides(ExperimentConfig& cfg);

std::vector<std::string> subcommands();
std::string explain(const std::string& subcommand);

// Runs the experiment, writes its CSV artifacts plus manifest.csv under
// cfg.out_dir and returns a process exit code (0 = all checks passed).
int run_experiment(const ExperimentConfig& cfg);

}  // namespace ppde
