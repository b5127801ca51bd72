#include <CLI11.hpp>
#include <iostream>

#include "msaddle/experiment.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    long seed = -1;
    bool smoke = false;
};

void add_common(CLI::App* cmd, CommonOptions& options) {
    cmd->add_option("--config", options.config_path, "configuration file (key=value or JSON)");
    cmd->add_option("--out", options.out_dir, "output directory");
    cmd->add_option("--seed", options.seed, "base seed override");
    cmd->add_flag("--smoke", options.smoke, "smoke mode: T = 1000, 2 seeds");
}

msaddle::ExperimentConfig build_config(const CommonOptions& options) {
    msaddle::ExperimentConfig config;
    if (!options.config_path.empty()) {
        config = msaddle::ExperimentConfig::from_file(options.config_path);
    }
    if (!options.out_dir.empty()) config.out_dir = options.out_dir;
    if (options.seed >= 0) config.base_seed = static_cast<std::uint64_t>(options.seed);
    if (options.smoke) config.apply_smoke();
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Projected saddle-point SGD under Markov sampling: simulation studies, "
                 "GTD policy evaluation, mixing diagnostics and finite-sample bound tables"};
    app.require_subcommand(1);

    CommonOptions fig_opts, gtd_opts, bounds_opts, chain_opts;
    CLI::App* fig = app.add_subcommand("figure1", "primal-dual gap study on the simulation problem");
    add_common(fig, fig_opts);
    CLI::App* gtd = app.add_subcommand("gtd", "GTD/GTD2 policy-evaluation study on a finite MDP");
    add_common(gtd, gtd_opts);
    CLI::App* bounds = app.add_subcommand("bounds", "finite-sample bound tables over a horizon grid");
    add_common(bounds, bounds_opts);
    CLI::App* chain = app.add_subcommand("chain", "build and diagnose a tuned Metropolis-Hastings chain");
    add_common(chain, chain_opts);

    double chain_target = -1.0;
    long chain_states = -1;
    chain->add_option("--target", chain_target, "second-eigenvalue target in (0,1)");
    chain->add_option("--states", chain_states, "number of states");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fig->parsed()) return msaddle::cmd_figure1(build_config(fig_opts));
        if (gtd->parsed()) return msaddle::cmd_gtd(build_config(gtd_opts));
        if (bounds->parsed()) return msaddle::cmd_bounds(build_config(bounds_opts));
        if (chain->parsed()) {
            msaddle::ExperimentConfig config = build_config(chain_opts);
            if (chain_target > 0.0) config.chain_target_lambda2 = chain_target;
            if (chain_states > 0) config.chain_states = static_cast<int>(chain_states);
            return msaddle::cmd_chain(config);
        }
    } catch (const msaddle::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const msaddle::AssumptionError& e) {
        std::cerr << "assumption failure: " << e.what() << "\n";
        return 3;
    } catch (const msaddle::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const msaddle::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
