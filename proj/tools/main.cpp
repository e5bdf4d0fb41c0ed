#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli.hpp"
#include "stvf/stepper.hpp"

namespace {

using stvf::cli::RunConfig;

// Every subcommand exposes the full flat option set; commands read the
// fields they need, and any config file written by to_config_text parses
// under any subcommand.
void add_options(CLI::App* cmd, RunConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path,
                    "key=value config file (command-line flags override)");
    cmd->add_option("--J", cfg.J, "number of mesh cells (>= 2)");
    cmd->add_option("--tau", cfg.tau, "time step; <= 0 resolves to 1/N");
    cmd->add_option("--N", cfg.N, "number of time steps");
    cmd->add_option("--epsilon", cfg.epsilon, "regularization parameter in [0,1]");
    cmd->add_option("--lambda", cfg.lambda, "fidelity weight >= 0");
    cmd->add_option("--seed", cfg.seed, "master seed for all randomness");
    cmd->add_option("--samples", cfg.samples, "Monte Carlo path count");
    cmd->add_option("--x0", cfg.x0_name, "initial datum profile");
    cmd->add_option("--g", cfg.g_name, "data-term profile");
    cmd->add_option("--z0", cfg.z0_name, "test-process start profile");
    cmd->add_option("--drift", cfg.drift_name, "test-process drift profile");
    cmd->add_option("--out", cfg.out, "output path (default stdout)");
    cmd->add_option("--mode", cfg.mode, "refinement mode: tau|h|epsilon|coupled");
    cmd->add_option("--levels", cfg.levels, "refinement level count (>= 3)");
    cmd->add_option("--slack-c", cfg.slack_c, "inequality slack constant c in c*(tau+h)");
    cmd->add_option("--workers", cfg.workers, "worker thread count (result-invariant)");
    cmd->add_option("--noise-amp", cfg.noise_amp, "noisy-step profile amplitude");
    cmd->add_flag("--deterministic", cfg.deterministic, "zero-noise flow");
    cmd->add_flag("--dump-nodes", cfg.dump_nodes, "append nodal columns to the trace");
    cmd->add_option("--t-index", cfg.t_index, "inequality time index (default N)");
    cmd->add_option("--min-rate", cfg.min_rate, "gate: fail if any rate falls below");
    cmd->add_option("--max-steps", cfg.max_steps, "stationarity step budget");
    cmd->add_option("--stat-tol", cfg.stat_tol, "stationarity tolerance");
    cmd->add_option("--J-list", cfg.j_list, "mesh sizes for the sweep")
        ->delimiter(',');
    cmd->add_option("--eps-list", cfg.eps_list, "epsilon values for the sweep")
        ->delimiter(',');
    cmd->add_option("--trials", cfg.trials, "randomized trials per sweep cell");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"1D total variation flow laboratory: mass-lumped P1 scheme, "
                 "implicit Euler-Maruyama stepping, variational-inequality audit"};
    app.require_subcommand(1);

    RunConfig cfg;
    CLI::App* sim = app.add_subcommand(
        "simulate", "integrate paths and write the energy/norm trace");
    CLI::App* lemma = app.add_subcommand(
        "check-lemma", "randomized sweep of the gradient-flux sign inequality");
    CLI::App* svi = app.add_subcommand(
        "check-svi", "Monte Carlo audit of the variational inequality");
    CLI::App* conv = app.add_subcommand(
        "converge", "self-convergence study under parameter refinement");
    CLI::App* den = app.add_subcommand(
        "denoise", "run the fidelity flow to stationarity and cross-check "
                   "the minimizer");
    std::string config_path;
    for (CLI::App* cmd : {sim, lemma, svi, conv, den}) {
        add_options(cmd, cfg, config_path);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? stvf::cli::kExitOk : stvf::cli::kExitValidation;
    }

    try {
        if (!config_path.empty()) {
            CLI::App* active = nullptr;
            for (CLI::App* cmd : {sim, lemma, svi, conv, den}) {
                if (cmd->parsed()) active = cmd;
            }
            stvf::cli::apply_config_file(
                cfg, config_path, [active](const std::string& key) {
                    const CLI::Option* opt =
                        active->get_option_no_throw("--" + key);
                    return opt != nullptr && opt->count() > 0;
                });
        }
        if (sim->parsed()) return stvf::cli::cmd_simulate(cfg);
        if (lemma->parsed()) return stvf::cli::cmd_check_lemma(cfg);
        if (svi->parsed()) return stvf::cli::cmd_check_svi(cfg);
        if (conv->parsed()) return stvf::cli::cmd_converge(cfg);
        if (den->parsed()) return stvf::cli::cmd_denoise(cfg);
    } catch (const stvf::SolverFailure& e) {
        nlohmann::json rec;
        rec["error"] = "solver_failure";
        rec["message"] = e.what();
        rec["residual"] = e.last_residual;
        rec["iterations"] = e.iterations;
        rec["step_index"] = e.step_index;
        std::cerr << rec.dump() << "\n";
        return stvf::cli::kExitSolver;
    } catch (const std::exception& e) {
        nlohmann::json rec;
        rec["error"] = "validation";
        rec["message"] = e.what();
        std::cerr << rec.dump() << "\n";
        return stvf::cli::kExitValidation;
    }
    return stvf::cli::kExitValidation;
}
