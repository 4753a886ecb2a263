#include <CLI11.hpp>
#include <cstdio>

#include "ppde/cli_runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for path-dependent semilinear equations and their "
                 "backward-SDE value fields"};
    app.require_subcommand(0, 1);

    ppde::ExperimentConfig cfg;
    std::string config_path;
    bool explain_only = false;

    app.add_option("--config", config_path, "JSON config file (flags override it)");

    std::vector<CLI::App*> subs;
    for (const std::string& name : ppde::subcommands()) {
        CLI::App* sub = app.add_subcommand(name, ppde::explain(name).substr(0, 60) + "...");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--seed", cfg.seed, "RNG seed (explicit, no entropy default)");
        sub->add_option("-T,--horizon", cfg.horizon, "time horizon");
        sub->add_option("-N,--steps", cfg.steps, "grid steps");
        sub->add_option("-M,--paths", cfg.num_paths, "Monte Carlo paths");
        sub->add_option("-d,--dim", cfg.dim, "path dimension");
        sub->add_option("-L,--drift-bound", cfg.L, "drift bound of the envelopes");
        sub->add_option("--lambda", cfg.lambda, "exponential scaling parameter");
        sub->add_option("--eps", cfg.eps, "approximation level");
        sub->add_option("--method", cfg.method, "bsde | control_search");
        sub->add_option("--functional", cfg.functional, "catalog functional name");
        sub->add_option("--generator", cfg.generator, "catalog driver name");
        sub->add_option("--generator-param", cfg.generator_param, "driver parameter");
        sub->add_option("--terminal", cfg.terminal, "catalog terminal name");
        sub->add_option("--terminal-param", cfg.terminal_param, "terminal parameter");
        sub->add_option("--basis-degree", cfg.basis_degree, "regression basis degree");
        sub->add_option("--basis-features", cfg.basis_features,
                        "comma list of value,integral,max,min");
        sub->add_option("--picard", cfg.picard, "picard corrector passes");
        sub->add_option("--anchors", cfg.anchors, "number of anchors");
        sub->add_option("--inner-paths", cfg.inner_paths, "inner solver paths");
        sub->add_option("--loc-steps", cfg.loc_steps, "localization window in steps");
        sub->add_option("--loc-radius", cfg.loc_radius, "localization exit radius");
        sub->add_option("--tolerance", cfg.tolerance, "check tolerance");
        sub->add_option("--threads", cfg.threads, "worker threads (0 = default)");
        sub->add_flag("--serial", cfg.serial, "force the serial reference kernels");
        sub->add_flag("--dump-paths", cfg.dump_paths, "also write the simulated path batch");
        sub->add_flag("--explain", explain_only, "describe what this subcommand computes");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    CLI::App* chosen = nullptr;
    for (CLI::App* sub : subs)
        if (sub->parsed()) chosen = sub;
    if (!chosen) {
        std::puts(app.help().c_str());
        return 2;
    }
    cfg.subcommand = chosen->get_name();

    if (explain_only) {
        std::puts(ppde::explain(cfg.subcommand).c_str());
        return 0;
    }

    if (!config_path.empty()) {
        // file first, then re-apply the flags the user actually passed
        ppde::ExperimentConfig from_file = ppde::config_from_json_file(config_path, cfg);
        from_file.subcommand = cfg.subcommand;
        cfg = from_file;
    }
    ppde::apply_env_overrides(cfg);

    try {
        return ppde::run_experiment(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
