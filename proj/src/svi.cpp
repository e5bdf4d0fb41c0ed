#include "stvf/svi.hpp"

#include "stvf/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace stvf {

namespace {

// One-sided 99% normal quantile used in the pass rule.
constexpr double kZ99 = 2.3263478740408408;

const char* kLimitationNote =
    "necessary-condition check: the inequality is required for ALL "
    "admissible test processes (Z, G); a finite family can refute but "
    "not certify the solution property";

}  // namespace

TestProcessSpec constant_test_process(FEFunction z0, FEFunction drift,
                                      int steps) {
    TestProcessSpec spec;
    spec.z0 = std::move(z0);
    spec.drift.assign(static_cast<std::size_t>(steps), drift);
    return spec;
}

std::vector<FEFunction> roll_test_process(const TestProcessSpec& spec,
                                          const std::vector<double>& increments,
                                          double tau) {
    if (!spec.z0.dirichlet) {
        throw std::invalid_argument("roll_test_process: z0 must be dirichlet");
    }
    if (spec.drift.size() != increments.size()) {
        throw std::invalid_argument(
            "roll_test_process: drift length " +
            std::to_string(spec.drift.size()) + " != increment length " +
            std::to_string(increments.size()));
    }
    const std::size_t n_values = spec.z0.values.size();
    std::vector<FEFunction> path;
    path.reserve(increments.size() + 1);
    path.push_back(spec.z0);
    for (std::size_t i = 0; i < increments.size(); ++i) {
        const FEFunction& g_i = spec.drift[i];
        if (!same_mesh(g_i, spec.z0)) {
            throw std::invalid_argument("roll_test_process: drift mesh mismatch");
        }
        const std::vector<double>& prev = path.back().values;
        std::vector<double> next(n_values);
        const double factor = 1.0 + increments[i];
        for (std::size_t j = 0; j < n_values; ++j) {
            next[j] = factor * prev[j] - tau * g_i.values[j];
        }
        path.emplace_back(spec.z0.mesh, std::move(next), true);
    }
    return path;
}

SVITerms svi_terms_one_path(const PathSample& x_path,
                            const std::vector<FEFunction>& z_path,
                            const TestProcessSpec& spec,
                            const SchemeParams& p, int n) {
    if (n < 0 || n > p.steps) {
        throw std::out_of_range("svi_terms_one_path: time index " +
                                std::to_string(n) + " outside [0, " +
                                std::to_string(p.steps) + "]");
    }
    if (x_path.states.size() != static_cast<std::size_t>(p.steps) + 1 ||
        z_path.size() != static_cast<std::size_t>(p.steps) + 1) {
        throw std::invalid_argument("svi_terms_one_path: path length mismatch");
    }
    const double tau = p.tau;

    SVITerms t;
    {
        const FEFunction diff = x_path.states[static_cast<std::size_t>(n)] -
                                z_path[static_cast<std::size_t>(n)];
        t.lhs_dist.value = 0.5 * lumped_inner(diff, diff);
    }
    {
        const FEFunction diff0 = x_path.states.front() - z_path.front();
        t.rhs_init.value = 0.5 * lumped_inner(diff0, diff0);
    }
    double energy_x = 0.0, energy_z = 0.0, dist_int = 0.0, cross = 0.0;
    for (int i = 0; i < n; ++i) {
        const FEFunction& xi = x_path.states[static_cast<std::size_t>(i)];
        const FEFunction& zi = z_path[static_cast<std::size_t>(i)];
        energy_x += energy_bar(xi, p.energy, true);
        energy_z += energy_bar(zi, p.energy, true);
        const FEFunction diff = xi - zi;
        dist_int += lumped_inner(diff, diff);
        cross += lumped_inner(diff, spec.drift[static_cast<std::size_t>(i)]);
    }
    t.lhs_energy.value = tau * energy_x;
    t.rhs_energy.value = tau * energy_z;
    t.rhs_dist_int.value = 0.5 * tau * dist_int;
    t.rhs_cross.value = tau * cross;
    t.gap.value = (t.rhs_init.value + t.rhs_energy.value +
                   t.rhs_dist_int.value + t.rhs_cross.value) -
                  (t.lhs_dist.value + t.lhs_energy.value);
    return t;
}

double pairwise_sum(const double* data, std::size_t count) {
    if (count == 0) return 0.0;
    if (count <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < count; ++i) s += data[i];
        return s;
    }
    const std::size_t half = count / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, count - half);
}

namespace {

TermEstimate reduce_term(const std::vector<double>& samples) {
    const std::size_t count = samples.size();
    TermEstimate est;
    est.value = pairwise_sum(samples.data(), count) / static_cast<double>(count);
    if (count >= 2) {
        std::vector<double> sq(count);
        for (std::size_t i = 0; i < count; ++i) {
            const double d = samples[i] - est.value;
            sq[i] = d * d;
        }
        const double var = pairwise_sum(sq.data(), count) /
                           static_cast<double>(count - 1);
        est.std_error = std::sqrt(std::max(0.0, var) /
                                  static_cast<double>(count));
    }
    return est;
}

}  // namespace

SVIReport mc_svi(const SchemeParams& p, const TestProcessSpec& spec,
                 long samples, std::uint64_t master_seed, int n,
                 double slack_c, int workers) {
    validate_scheme_params(p);
    if (samples < 2) {
        throw std::invalid_argument("mc_svi: sample count must be >= 2");
    }
    if (n < 0 || n > p.steps) {
        throw std::out_of_range("mc_svi: time index outside [0, N]");
    }
    if (spec.drift.size() != static_cast<std::size_t>(p.steps)) {
        throw std::invalid_argument("mc_svi: drift length != step count");
    }
    if (workers < 1) workers = 1;

    const std::size_t count = static_cast<std::size_t>(samples);
    // Per-path term storage: reduction order is independent of the worker
    // partition, so any worker count yields bit-identical reports.
    std::vector<std::vector<double>> per_path(6,
                                              std::vector<double>(count, 0.0));
    std::vector<double> per_path_gap(count, 0.0);

    struct Failure {
        bool failed = false;
        std::string message;
        double residual = 0.0;
        int iterations = 0;
        int step_index = -1;
    };
    std::vector<Failure> failures(static_cast<std::size_t>(workers));

    auto run_range = [&](long begin, long end, Failure* failure) {
        try {
            for (long m = begin; m < end; ++m) {
                NoisePlan plan;
                plan.steps = p.steps;
                plan.tau = p.tau;
                plan.master_seed = master_seed;
                plan.path_index = static_cast<std::uint64_t>(m);
                const std::vector<double> increments = sample_increments(plan);
                const PathSample x_path = solve_path(p, increments);
                const std::vector<FEFunction> z_path =
                    roll_test_process(spec, increments, p.tau);
                if (increments_checksum(x_path.increments) !=
                    increments_checksum(increments)) {
                    throw std::logic_error(
                        "mc_svi: coupling violation, X and Z increments differ");
                }
                const SVITerms t =
                    svi_terms_one_path(x_path, z_path, spec, p, n);
                const std::size_t idx = static_cast<std::size_t>(m);
                per_path[0][idx] = t.lhs_dist.value;
                per_path[1][idx] = t.lhs_energy.value;
                per_path[2][idx] = t.rhs_init.value;
                per_path[3][idx] = t.rhs_energy.value;
                per_path[4][idx] = t.rhs_dist_int.value;
                per_path[5][idx] = t.rhs_cross.value;
                per_path_gap[idx] = t.gap.value;
            }
        } catch (const SolverFailure& sf) {
            failure->failed = true;
            failure->message = std::string(sf.what()) + " (path " +
                               std::to_string(begin) + ".." +
                               std::to_string(end - 1) + ")";
            failure->residual = sf.last_residual;
            failure->iterations = sf.iterations;
            failure->step_index = sf.step_index;
        } catch (const std::exception& e) {
            failure->failed = true;
            failure->message = e.what();
        }
    };

    if (workers == 1) {
        run_range(0, samples, &failures[0]);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        const long chunk = (samples + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const long begin = static_cast<long>(w) * chunk;
            const long end = std::min(samples, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_range, begin, end,
                              &failures[static_cast<std::size_t>(w)]);
        }
        for (auto& th : pool) th.join();
    }
    for (const Failure& f : failures) {
        if (f.failed) {
            throw SolverFailure("mc_svi: " + f.message, f.residual,
                                f.iterations, f.step_index);
        }
    }

    SVIReport report;
    report.params = p;
    report.sample_count = samples;
    report.time_index = n;
    report.slack_c = slack_c;
    report.slack = slack_c * (p.tau + p.mesh->h);
    report.confidence_z = kZ99;
    report.limitation = kLimitationNote;

    report.terms.lhs_dist = reduce_term(per_path[0]);
    report.terms.lhs_energy = reduce_term(per_path[1]);
    report.terms.rhs_init = reduce_term(per_path[2]);
    report.terms.rhs_energy = reduce_term(per_path[3]);
    report.terms.rhs_dist_int = reduce_term(per_path[4]);
    report.terms.rhs_cross = reduce_term(per_path[5]);
    // The gap mean recomposes exactly from the six stored term means; its
    // standard error comes from the per-path gap samples.
    report.terms.gap.value =
        (report.terms.rhs_init.value + report.terms.rhs_energy.value +
         report.terms.rhs_dist_int.value + report.terms.rhs_cross.value) -
        (report.terms.lhs_dist.value + report.terms.lhs_energy.value);
    report.terms.gap.std_error = reduce_term(per_path_gap).std_error;

    report.pass = report.terms.gap.value >=
                  -(report.slack + kZ99 * report.terms.gap.std_error);
    return report;
}

}  // namespace stvf
