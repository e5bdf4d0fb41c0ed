#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stvf/mesh.hpp"
#include "stvf/stepper.hpp"
#include "stvf/svi.hpp"

namespace stvf::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitProperty = 4;

// One flat parameter bundle for all subcommands; each command reads the
// fields it needs. Defaults are chosen so that every command runs out of
// the box. tau <= 0 resolves to 1/N.
struct RunConfig {
    int J = 32;
    double tau = 0.0;
    int N = 64;
    double epsilon = 0.25;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    long samples = 1;
    std::string x0_name = "zero";
    std::string g_name = "zero";
    std::string z0_name = "zero";
    std::string drift_name = "zero";
    std::string out;
    std::string mode = "tau";
    int levels = 5;
    double slack_c = 1.0;
    int workers = 1;
    double noise_amp = 0.2;
    bool deterministic = false;
    bool dump_nodes = false;
    int t_index = -1;      // <0 means the final step
    double min_rate = -1.0;  // <0 disables the convergence gate
    long max_steps = 200000;
    double stat_tol = 1e-8;
    std::vector<int> j_list = {2, 4, 8, 16, 32, 64, 128, 256, 512};
    std::vector<double> eps_list = {1.0, 0.1, 0.01, 1e-4};
    long trials = 10000;
};

// tau resolved against N; throws std::invalid_argument on nonsense.
RunConfig resolve(RunConfig cfg);

// Applies a flat key=value file (the format written by to_config_text) to
// cfg. Keys are the long option names without dashes; blank lines and
// '#' comments are skipped. overridden(key) reports whether the option was
// given on the command line, in which case the file value is ignored.
// Unknown keys throw std::invalid_argument.
void apply_config_file(RunConfig& cfg, const std::string& path,
                       const std::function<bool(const std::string&)>& overridden);

// Semantic parameters as sorted "key=value" lines (the artifact config
// echo). Output paths and worker counts are intentionally excluded: they
// do not affect any computed number, and embedding them would break
// byte-identity across runs that only relocate output or change the
// worker layout. The lines parse back through the --config mechanism.
std::string to_config_text(const RunConfig& cfg);

// Named profile catalog: zero | hat | sin | step | ramp | noisy-step.
// All profiles are mapped into V_h by the lumped projection; noisy-step
// adds amp * N(0,1) per interior node, drawn from the seeded stream.
FEFunction catalog_profile(const std::string& name, MeshPtr mesh,
                           std::uint64_t seed, double noise_amp);

// Scheme assembled from a resolved config (x0 and g from the catalog).
SchemeParams build_scheme(const RunConfig& cfg, MeshPtr mesh);

// Test process assembled from a resolved config (z0 and constant drift).
TestProcessSpec build_test_process(const RunConfig& cfg, MeshPtr mesh);

// Double formatted with full round-trip precision (%.17g).
std::string fmt_g(double v);

// --- cmd_converge internals, exposed for the verification harness ---

struct ConvergenceRow {
    int level = 0;
    double h = 0.0;
    double tau = 0.0;
    double epsilon = 0.0;
    double error = 0.0;  // Cauchy difference to the next-finer level
    double rate = 0.0;   // log2(error_{l-1}/error_l); NaN on the first row
};

// Self-convergence study. mode in {tau, h, epsilon, coupled}; levels >= 3.
// Mode tau/coupled couple all levels to one Brownian path by aggregating
// increments generated at the finest level; mode h compares by nodal
// restriction onto the coarser mesh. cfg.deterministic switches to the
// zero-noise flow.
std::vector<ConvergenceRow> converge_table(const RunConfig& cfg);

// --- cmd_check_lemma internals ---

struct LemmaCell {
    int J = 0;
    double epsilon = 0.0;
    long trials = 0;
    double min_pairing = 0.0;  // over random profiles
    double canary = 0.0;       // affine profile; exactly 0 by telescoping
};

std::vector<LemmaCell> lemma_sweep(const std::vector<int>& j_list,
                                   const std::vector<double>& eps_list,
                                   long trials, std::uint64_t seed);

// --- subcommands (configs are resolved internally) ---

int cmd_simulate(const RunConfig& cfg);
int cmd_check_lemma(const RunConfig& cfg);
int cmd_check_svi(const RunConfig& cfg);
int cmd_converge(const RunConfig& cfg);
int cmd_denoise(const RunConfig& cfg);

}  // namespace stvf::cli
