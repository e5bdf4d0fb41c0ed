#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "stvf/energy.hpp"
#include "stvf/noise.hpp"

namespace stvf::cli {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Stream tag reserved for catalog noise so data-term draws never collide
// with Monte Carlo path indices.
constexpr std::uint64_t kCatalogNoiseTag = 0x6E6F6973ull;  // "nois"

using nlohmann::json;

void write_text(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::invalid_argument("cannot open output file: " + path);
    }
    out << content;
    if (!out) {
        throw std::invalid_argument("failed writing output file: " + path);
    }
}

void print_error_record(const char* kind, const std::string& message) {
    json rec;
    rec["error"] = kind;
    rec["message"] = message;
    std::cerr << rec.dump() << "\n";
}

// Static partition of [0, count) over workers; exceptions are captured and
// the first one rethrown after join, so failures surface identically for
// every worker count.
template <class Fn>
void run_partitioned(long count, int workers, Fn&& fn) {
    if (workers < 1) workers = 1;
    if (workers == 1 || count <= 1) {
        for (long m = 0; m < count; ++m) fn(m);
        return;
    }
    const long chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const long begin = static_cast<long>(w) * chunk;
        const long end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, w, begin, end] {
            try {
                for (long m = begin; m < end; ++m) fn(m);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

TermEstimate reduce(const std::vector<double>& samples) {
    TermEstimate est;
    const std::size_t count = samples.size();
    if (count == 0) return est;
    est.value = pairwise_sum(samples.data(), count) / static_cast<double>(count);
    if (count >= 2) {
        std::vector<double> sq(count);
        for (std::size_t i = 0; i < count; ++i) {
            const double d = samples[i] - est.value;
            sq[i] = d * d;
        }
        est.std_error = std::sqrt(
            pairwise_sum(sq.data(), count) / static_cast<double>(count - 1) /
            static_cast<double>(count));
    }
    return est;
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += fmt_g(v[i]);
    }
    return s;
}

std::map<std::string, std::string> config_pairs(const RunConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["J"] = std::to_string(cfg.J);
    kv["tau"] = fmt_g(cfg.tau);
    kv["N"] = std::to_string(cfg.N);
    kv["epsilon"] = fmt_g(cfg.epsilon);
    kv["lambda"] = fmt_g(cfg.lambda);
    kv["seed"] = std::to_string(cfg.seed);
    kv["samples"] = std::to_string(cfg.samples);
    kv["x0"] = cfg.x0_name;
    kv["g"] = cfg.g_name;
    kv["z0"] = cfg.z0_name;
    kv["drift"] = cfg.drift_name;
    kv["mode"] = cfg.mode;
    kv["levels"] = std::to_string(cfg.levels);
    kv["slack-c"] = fmt_g(cfg.slack_c);
    kv["noise-amp"] = fmt_g(cfg.noise_amp);
    kv["deterministic"] = cfg.deterministic ? "true" : "false";
    kv["dump-nodes"] = cfg.dump_nodes ? "true" : "false";
    kv["t-index"] = std::to_string(cfg.t_index);
    kv["min-rate"] = fmt_g(cfg.min_rate);
    kv["max-steps"] = std::to_string(cfg.max_steps);
    kv["stat-tol"] = fmt_g(cfg.stat_tol);
    kv["J-list"] = join_ints(cfg.j_list);
    kv["eps-list"] = join_doubles(cfg.eps_list);
    kv["trials"] = std::to_string(cfg.trials);
    return kv;
}

std::string echo_comments(const RunConfig& cfg) {
    std::string s;
    for (const auto& [k, v] : config_pairs(cfg)) {
        s += "# " + k + "=" + v + "\n";
    }
    return s;
}

json config_json(const RunConfig& cfg) {
    json j;
    for (const auto& [k, v] : config_pairs(cfg)) j[k] = v;
    return j;
}

std::vector<double> path_increments(const RunConfig& cfg, int steps,
                                    double tau, std::uint64_t path_index) {
    if (cfg.deterministic) return degenerate_increments(steps);
    NoisePlan plan;
    plan.steps = steps;
    plan.tau = tau;
    plan.master_seed = cfg.seed;
    plan.path_index = path_index;
    return sample_increments(plan);
}

// Sum fine increments in blocks of `factor`: the coarse walk of the same
// Brownian path.
std::vector<double> aggregate_increments(const std::vector<double>& fine,
                                         int factor) {
    std::vector<double> coarse(fine.size() / static_cast<std::size_t>(factor));
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        double s = 0.0;
        for (int k = 0; k < factor; ++k) {
            s += fine[i * static_cast<std::size_t>(factor) +
                      static_cast<std::size_t>(k)];
        }
        coarse[i] = s;
    }
    return coarse;
}

// Nodal restriction fine -> coarse for a one-level (factor 2) refinement.
FEFunction restrict_nodal(const FEFunction& fine, MeshPtr coarse) {
    if (fine.mesh->cell_count != 2 * coarse->cell_count) {
        throw std::invalid_argument("restrict_nodal: not a 2:1 refinement");
    }
    std::vector<double> vals(coarse->nodes.size());
    for (std::size_t j = 0; j < vals.size(); ++j) {
        vals[j] = fine.values[2 * j];
    }
    return FEFunction(std::move(coarse), std::move(vals), fine.dirichlet);
}

bool rate_gate_holds(const std::vector<ConvergenceRow>& rows, double min_rate) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        // once both errors sit at roundoff the rate carries no information
        if (rows[i].error <= 1e-13) continue;
        if (!(rows[i].rate >= min_rate)) return false;
    }
    return true;
}

}  // namespace

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

RunConfig resolve(RunConfig cfg) {
    if (cfg.N < 1) throw std::invalid_argument("N must be >= 1");
    if (cfg.tau <= 0.0) cfg.tau = 1.0 / static_cast<double>(cfg.N);
    if (cfg.J < 2) throw std::invalid_argument("J must be >= 2");
    if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) {
        throw std::invalid_argument("epsilon must be in [0,1]");
    }
    if (cfg.lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (cfg.samples < 1) throw std::invalid_argument("samples must be >= 1");
    if (cfg.workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (cfg.noise_amp < 0.0) throw std::invalid_argument("noise-amp must be >= 0");
    if (cfg.t_index > cfg.N) {
        throw std::invalid_argument("t-index must be <= N");
    }
    return cfg;
}

std::string to_config_text(const RunConfig& cfg) {
    std::string s;
    for (const auto& [k, v] : config_pairs(cfg)) s += k + "=" + v + "\n";
    return s;
}

namespace {

std::string trimmed(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: boolean expected, got '" + v + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& v, Parse parse) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse(trimmed(item)));
    return out;
}

}  // namespace

void apply_config_file(
    RunConfig& cfg, const std::string& path,
    const std::function<bool(const std::string&)>& overridden) {
    std::ifstream in(path);
    if (!in.good()) {
        throw std::invalid_argument("config: cannot read '" + path + "'");
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string s = trimmed(line);
        if (s.empty() || s[0] == '#') continue;
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " +
                                        std::to_string(line_no) +
                                        " is not key=value");
        }
        const std::string key = trimmed(s.substr(0, eq));
        const std::string val = trimmed(s.substr(eq + 1));
        if (overridden && overridden(key)) continue;

        if (key == "J") cfg.J = std::stoi(val);
        else if (key == "tau") cfg.tau = std::stod(val);
        else if (key == "N") cfg.N = std::stoi(val);
        else if (key == "epsilon") cfg.epsilon = std::stod(val);
        else if (key == "lambda") cfg.lambda = std::stod(val);
        else if (key == "seed") cfg.seed = std::stoull(val);
        else if (key == "samples") cfg.samples = std::stol(val);
        else if (key == "x0") cfg.x0_name = val;
        else if (key == "g") cfg.g_name = val;
        else if (key == "z0") cfg.z0_name = val;
        else if (key == "drift") cfg.drift_name = val;
        else if (key == "out") cfg.out = val;
        else if (key == "mode") cfg.mode = val;
        else if (key == "levels") cfg.levels = std::stoi(val);
        else if (key == "slack-c") cfg.slack_c = std::stod(val);
        else if (key == "workers") cfg.workers = std::stoi(val);
        else if (key == "noise-amp") cfg.noise_amp = std::stod(val);
        else if (key == "deterministic") cfg.deterministic = parse_bool(val);
        else if (key == "dump-nodes") cfg.dump_nodes = parse_bool(val);
        else if (key == "t-index") cfg.t_index = std::stoi(val);
        else if (key == "min-rate") cfg.min_rate = std::stod(val);
        else if (key == "max-steps") cfg.max_steps = std::stol(val);
        else if (key == "stat-tol") cfg.stat_tol = std::stod(val);
        else if (key == "trials") cfg.trials = std::stol(val);
        else if (key == "J-list") {
            cfg.j_list = parse_list<int>(
                val, [](const std::string& x) { return std::stoi(x); });
        } else if (key == "eps-list") {
            cfg.eps_list = parse_list<double>(
                val, [](const std::string& x) { return std::stod(x); });
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
}

FEFunction catalog_profile(const std::string& name, MeshPtr mesh,
                           std::uint64_t seed, double noise_amp) {
    if (name == "zero") return FEFunction::zeros(mesh);
    if (name == "hat") {
        return lumped_projection(
            [](double x) { return 1.0 - std::abs(2.0 * x - 1.0); }, mesh);
    }
    if (name == "sin") {
        return lumped_projection([](double x) { return std::sin(kPi * x); },
                                 mesh);
    }
    if (name == "step") {
        return lumped_projection(
            [](double x) { return (x > 0.25 && x <= 0.75) ? 1.0 : 0.0; }, mesh);
    }
    if (name == "ramp") {
        return lumped_projection([](double x) { return x; }, mesh);
    }
    if (name == "noisy-step") {
        FEFunction base = lumped_projection(
            [](double x) { return (x > 0.25 && x <= 0.75) ? 1.0 : 0.0; }, mesh);
        const std::uint64_t stream = derive_stream(seed, kCatalogNoiseTag);
        for (std::size_t j = 1; j + 1 < base.values.size(); ++j) {
            base.values[j] += noise_amp * normal_quantile(uniform_draw(
                                  stream, static_cast<std::uint64_t>(j - 1)));
        }
        return base;
    }
    throw std::invalid_argument(
        "unknown profile '" + name +
        "' (catalog: zero, hat, sin, step, ramp, noisy-step)");
}

SchemeParams build_scheme(const RunConfig& cfg, MeshPtr mesh) {
    return make_scheme_params(
        mesh, cfg.epsilon, cfg.lambda, cfg.tau, cfg.N,
        catalog_profile(cfg.x0_name, mesh, cfg.seed, cfg.noise_amp),
        catalog_profile(cfg.g_name, mesh, cfg.seed, cfg.noise_amp));
}

TestProcessSpec build_test_process(const RunConfig& cfg, MeshPtr mesh) {
    return constant_test_process(
        catalog_profile(cfg.z0_name, mesh, cfg.seed, cfg.noise_amp),
        catalog_profile(cfg.drift_name, mesh, cfg.seed, cfg.noise_amp), cfg.N);
}

int cmd_simulate(const RunConfig& raw) {
    const RunConfig cfg = resolve(raw);
    MeshPtr mesh = make_shared_mesh(cfg.J);
    const SchemeParams p = build_scheme(cfg, mesh);

    std::string csv;
    if (cfg.samples == 1) {
        const std::vector<double> dw = path_increments(cfg, cfg.N, cfg.tau, 0);
        const PathSample path = solve_path(p, dw);
        csv += "# schema: stvf-simulate-v1\n";
        csv += echo_comments(cfg);
        csv += "step,time,energy_reg,lumped_norm_sq,dW";
        if (cfg.dump_nodes) {
            for (int j = 0; j <= cfg.J; ++j) csv += ",x" + std::to_string(j);
        }
        csv += "\n";
        for (int i = 0; i <= cfg.N; ++i) {
            const FEFunction& s = path.states[static_cast<std::size_t>(i)];
            csv += std::to_string(i);
            csv += "," + fmt_g(i * cfg.tau);
            csv += "," + fmt_g(path.per_step_energy[static_cast<std::size_t>(i)]);
            csv += "," + fmt_g(lumped_inner(s, s));
            csv += "," + fmt_g(i == 0 ? 0.0 : dw[static_cast<std::size_t>(i - 1)]);
            if (cfg.dump_nodes) {
                for (double v : s.values) csv += "," + fmt_g(v);
            }
            csv += "\n";
        }
    } else {
        // ensemble: per-path storage first, then a fixed-order reduction, so
        // the artifact is byte-identical for every worker count
        const std::size_t M = static_cast<std::size_t>(cfg.samples);
        const std::size_t R = static_cast<std::size_t>(cfg.N) + 1;
        std::vector<std::vector<double>> energy(R, std::vector<double>(M));
        std::vector<std::vector<double>> normsq(R, std::vector<double>(M));
        run_partitioned(cfg.samples, cfg.workers, [&](long m) {
            const std::vector<double> dw = path_increments(
                cfg, cfg.N, cfg.tau, static_cast<std::uint64_t>(m));
            const PathSample path = solve_path(p, dw);
            for (std::size_t i = 0; i < R; ++i) {
                energy[i][static_cast<std::size_t>(m)] = path.per_step_energy[i];
                const FEFunction& s = path.states[i];
                normsq[i][static_cast<std::size_t>(m)] = lumped_inner(s, s);
            }
        });
        csv += "# schema: stvf-simulate-ensemble-v1\n";
        csv += echo_comments(cfg);
        csv += "step,time,mean_energy_reg,se_energy_reg,mean_lumped_norm_sq,"
               "se_lumped_norm_sq\n";
        for (std::size_t i = 0; i < R; ++i) {
            const TermEstimate e = reduce(energy[i]);
            const TermEstimate q = reduce(normsq[i]);
            csv += std::to_string(i);
            csv += "," + fmt_g(static_cast<double>(i) * cfg.tau);
            csv += "," + fmt_g(e.value);
            csv += "," + fmt_g(e.std_error);
            csv += "," + fmt_g(q.value);
            csv += "," + fmt_g(q.std_error);
            csv += "\n";
        }
    }
    write_text(cfg.out, csv);
    return kExitOk;
}

std::vector<LemmaCell> lemma_sweep(const std::vector<int>& j_list,
                                   const std::vector<double>& eps_list,
                                   long trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    std::vector<LemmaCell> cells;
    std::uint64_t cell_index = 0;
    for (int J : j_list) {
        MeshPtr mesh = make_shared_mesh(J);
        for (double eps : eps_list) {
            if (!(eps > 0.0)) {
                throw std::invalid_argument("eps-list entries must be > 0");
            }
            LemmaCell cell;
            cell.J = J;
            cell.epsilon = eps;
            cell.trials = trials;
            cell.min_pairing = std::numeric_limits<double>::infinity();
            const std::uint64_t stream = derive_stream(seed, cell_index++);
            std::uint64_t counter = 0;
            std::vector<double> vals(mesh->nodes.size(), 0.0);
            // amplitudes bracketing the flux saturation scale |grad| ~ eps
            const double amps[3] = {0.1, 1.0, 10.0};
            for (long t = 0; t < trials; ++t) {
                const double amp = amps[t % 3];
                for (std::size_t j = 1; j + 1 < vals.size(); ++j) {
                    vals[j] = amp * normal_quantile(uniform_draw(stream, counter++));
                }
                FEFunction v(mesh, vals, true);
                cell.min_pairing =
                    std::min(cell.min_pairing, lemma_pairing(v, eps));
            }
            // Affine canary: nodal values a + c*j with dyadic a and c, so
            // the nodal values are exact and every cell increment is the
            // identical double; the pairing then telescopes to exactly
            // zero in floating point, not just in exact arithmetic.
            const double grid = 1.0 / 64.0;
            const double a =
                grid * std::floor(128.0 * uniform_draw(stream, counter++) - 64.0);
            double c = grid * (1.0 + std::floor(
                                         15.0 * uniform_draw(stream, counter++)));
            if (uniform_draw(stream, counter++) < 0.5) c = -c;
            std::vector<double> av(vals.size());
            for (std::size_t j = 0; j < av.size(); ++j) {
                av[j] = a + c * static_cast<double>(j);
            }
            const FEFunction affine(mesh, std::move(av), false);
            cell.canary = lemma_pairing(affine, eps);
            cells.push_back(cell);
        }
    }
    return cells;
}

int cmd_check_lemma(const RunConfig& raw) {
    const RunConfig cfg = resolve(raw);
    if (cfg.trials < 1) {
        print_error_record("validation", "trials must be >= 1");
        return kExitValidation;
    }
    const std::vector<LemmaCell> cells =
        lemma_sweep(cfg.j_list, cfg.eps_list, cfg.trials, cfg.seed);

    double global_min = std::numeric_limits<double>::infinity();
    bool pass = true;
    json jcells = json::array();
    for (const LemmaCell& c : cells) {
        global_min = std::min(global_min, c.min_pairing);
        const bool cell_pass = c.min_pairing >= -1e-12 && c.canary == 0.0;
        pass = pass && cell_pass;
        jcells.push_back({{"J", c.J},
                          {"epsilon", c.epsilon},
                          {"trials", c.trials},
                          {"min_pairing", c.min_pairing},
                          {"canary", c.canary},
                          {"pass", cell_pass}});
    }
    json report;
    report["schema"] = "stvf-check-lemma-v1";
    report["config"] = config_json(cfg);
    report["cells"] = jcells;
    report["min_pairing"] = global_min;
    report["threshold"] = -1e-12;
    report["pass"] = pass;
    write_text(cfg.out, report.dump(2) + "\n");
    return pass ? kExitOk : kExitProperty;
}

int cmd_check_svi(const RunConfig& raw) {
    const RunConfig cfg = resolve(raw);
    if (cfg.samples < 2) {
        print_error_record("validation", "check-svi needs samples >= 2");
        return kExitValidation;
    }
    MeshPtr mesh = make_shared_mesh(cfg.J);
    const SchemeParams p = build_scheme(cfg, mesh);
    const TestProcessSpec spec = build_test_process(cfg, mesh);
    const int n = cfg.t_index < 0 ? cfg.N : cfg.t_index;

    const SVIReport rep =
        mc_svi(p, spec, cfg.samples, cfg.seed, n, cfg.slack_c, cfg.workers);

    auto term = [](const TermEstimate& t) {
        return json{{"value", t.value}, {"std_error", t.std_error}};
    };
    json report;
    report["schema"] = "stvf-check-svi-v1";
    report["config"] = config_json(cfg);
    report["terms"] = {{"lhs_dist", term(rep.terms.lhs_dist)},
                       {"lhs_energy", term(rep.terms.lhs_energy)},
                       {"rhs_init", term(rep.terms.rhs_init)},
                       {"rhs_energy", term(rep.terms.rhs_energy)},
                       {"rhs_dist_int", term(rep.terms.rhs_dist_int)},
                       {"rhs_cross", term(rep.terms.rhs_cross)}};
    report["gap"] = term(rep.terms.gap);
    report["sample_count"] = rep.sample_count;
    report["time_index"] = rep.time_index;
    report["slack_c"] = rep.slack_c;
    report["slack"] = rep.slack;
    report["confidence_z"] = rep.confidence_z;
    report["pass"] = rep.pass;
    report["limitation"] = rep.limitation;
    write_text(cfg.out, report.dump(2) + "\n");
    return rep.pass ? kExitOk : kExitProperty;
}

std::vector<ConvergenceRow> converge_table(const RunConfig& raw) {
    const RunConfig cfg = resolve(raw);
    if (cfg.levels < 3) {
        throw std::invalid_argument("converge needs levels >= 3");
    }
    if (cfg.mode != "tau" && cfg.mode != "h" && cfg.mode != "epsilon" &&
        cfg.mode != "coupled") {
        throw std::invalid_argument(
            "mode must be one of tau, h, epsilon, coupled");
    }
    const int L = cfg.levels;
    const double T = cfg.tau * cfg.N;

    // final state per level, plus that level's (h, tau, eps) for the table
    std::vector<FEFunction> finals;
    std::vector<double> hs(static_cast<std::size_t>(L)),
        taus(static_cast<std::size_t>(L)), epss(static_cast<std::size_t>(L));

    const bool refine_space = cfg.mode == "h" || cfg.mode == "coupled";
    const bool refine_time = cfg.mode == "tau" || cfg.mode == "coupled";

    // one Brownian path shared by all levels: generate at the finest time
    // resolution and aggregate upward
    const int n_fine = refine_time ? (cfg.N << (L - 1)) : cfg.N;
    const std::vector<double> fine_dw =
        path_increments(cfg, n_fine, T / n_fine, 0);

    for (int l = 0; l < L; ++l) {
        RunConfig lvl = cfg;
        lvl.J = refine_space ? (cfg.J << l) : cfg.J;
        lvl.N = refine_time ? (cfg.N << l) : cfg.N;
        lvl.tau = T / lvl.N;
        if (cfg.mode == "epsilon") lvl.epsilon = cfg.epsilon / (1 << l);

        MeshPtr mesh = make_shared_mesh(lvl.J);
        const SchemeParams p = build_scheme(lvl, mesh);
        const std::vector<double> dw =
            refine_time ? aggregate_increments(fine_dw, 1 << (L - 1 - l))
                        : fine_dw;
        const PathSample path = solve_path(p, dw);
        finals.push_back(path.states.back());
        hs[static_cast<std::size_t>(l)] = mesh->h;
        taus[static_cast<std::size_t>(l)] = lvl.tau;
        epss[static_cast<std::size_t>(l)] = lvl.epsilon;
    }

    std::vector<ConvergenceRow> rows;
    for (int l = 0; l + 1 < L; ++l) {
        FEFunction coarse = finals[static_cast<std::size_t>(l)];
        FEFunction fine = finals[static_cast<std::size_t>(l) + 1];
        if (refine_space) {
            fine = restrict_nodal(fine, coarse.mesh);
        }
        ConvergenceRow row;
        row.level = l;
        row.h = hs[static_cast<std::size_t>(l)];
        row.tau = taus[static_cast<std::size_t>(l)];
        row.epsilon = epss[static_cast<std::size_t>(l)];
        row.error = lumped_norm(fine - coarse);
        row.rate = rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                                : std::log2(rows.back().error / row.error);
        rows.push_back(row);
    }
    return rows;
}

int cmd_converge(const RunConfig& raw) {
    RunConfig cfg = resolve(raw);
    if (cfg.levels < 3) {
        print_error_record("validation", "converge needs levels >= 3");
        return kExitValidation;
    }
    const std::vector<ConvergenceRow> rows = converge_table(cfg);

    std::string csv = "# schema: stvf-converge-v1\n";
    csv += echo_comments(cfg);
    csv += "level,h,tau,epsilon,error,rate\n";
    for (const ConvergenceRow& r : rows) {
        csv += std::to_string(r.level);
        csv += "," + fmt_g(r.h) + "," + fmt_g(r.tau) + "," + fmt_g(r.epsilon);
        csv += "," + fmt_g(r.error) + "," + fmt_g(r.rate) + "\n";
    }
    write_text(cfg.out, csv);

    if (cfg.min_rate >= 0.0 && !rate_gate_holds(rows, cfg.min_rate)) {
        print_error_record("property",
                           "observed convergence rate below min-rate gate");
        return kExitProperty;
    }
    return kExitOk;
}

int cmd_denoise(const RunConfig& raw) {
    const RunConfig cfg = resolve(raw);
    if (!(cfg.lambda > 0.0)) {
        print_error_record("validation", "denoise needs lambda > 0");
        return kExitValidation;
    }
    if (!(cfg.epsilon > 0.0)) {
        print_error_record("validation", "denoise needs epsilon > 0");
        return kExitValidation;
    }
    MeshPtr mesh = make_shared_mesh(cfg.J);
    const SchemeParams p = build_scheme(cfg, mesh);

    // zero-noise flow to near-stationarity
    FEFunction x = p.x0;
    long steps_taken = 0;
    bool settled = false;
    while (steps_taken < cfg.max_steps) {
        const FEFunction next = step(x, 0.0, p);
        ++steps_taken;
        const double move = lumped_norm(next - x);
        x = next;
        if (move <= cfg.stat_tol * cfg.tau) {
            settled = true;
            break;
        }
    }
    if (!settled) {
        print_error_record("solver_failure",
                           "flow not stationary within max-steps (" +
                               std::to_string(cfg.max_steps) + ")");
        return kExitSolver;
    }

    const FEFunction minimizer = minimize_energy(p);
    const double e_flow = scheme_energy(x, p);
    const double e_min = scheme_energy(minimizer, p);
    const double e_gap = e_flow - e_min;

    std::string csv = "# schema: stvf-denoise-v1\n";
    csv += echo_comments(cfg);
    csv += "# steps_taken=" + std::to_string(steps_taken) + "\n";
    csv += "# energy_flow=" + fmt_g(e_flow) + "\n";
    csv += "# energy_min=" + fmt_g(e_min) + "\n";
    csv += "# energy_gap=" + fmt_g(e_gap) + "\n";
    csv += "node,x,value,g_value,min_value\n";
    for (int j = 0; j <= cfg.J; ++j) {
        csv += std::to_string(j);
        csv += "," + fmt_g(mesh->nodes[static_cast<std::size_t>(j)]);
        csv += "," + fmt_g(x.value(j));
        csv += "," + fmt_g(p.g_h.value(j));
        csv += "," + fmt_g(minimizer.value(j));
        csv += "\n";
    }
    write_text(cfg.out, csv);

    if (!cfg.out.empty()) {
        json summary;
        summary["schema"] = "stvf-denoise-summary-v1";
        summary["steps_taken"] = steps_taken;
        summary["energy_flow"] = e_flow;
        summary["energy_min"] = e_min;
        summary["energy_gap"] = e_gap;
        summary["pass"] = std::abs(e_gap) <= 1e-6;
        std::cout << summary.dump() << "\n";
    }
    if (std::abs(e_gap) > 1e-6) {
        print_error_record("property",
                           "stationary energy differs from the direct "
                           "minimization by " +
                               fmt_g(e_gap));
        return kExitProperty;
    }
    return kExitOk;
}

}  // namespace stvf::cli
