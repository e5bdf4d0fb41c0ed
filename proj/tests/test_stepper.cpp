#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

#include "stvf/energy.hpp"
#include "stvf/mesh.hpp"
#include "stvf/noise.hpp"
#include "stvf/stepper.hpp"

using namespace stvf;

namespace {

FEFunction random_dirichlet(MeshPtr mesh, std::mt19937_64& rng, double amp = 1.0) {
    std::normal_distribution<double> dist(0.0, amp);
    std::vector<double> vals(mesh->nodes.size(), 0.0);
    for (std::size_t j = 1; j + 1 < vals.size(); ++j) vals[j] = dist(rng);
    return FEFunction(std::move(mesh), std::move(vals), true);
}

// The per-step functional minimized by the implicit step, evaluated
// from scratch (no solver internals).
double step_functional(const FEFunction& u, const FEFunction& b,
                       const SchemeParams& p) {
    const EnergyParams tv_only(p.energy.epsilon, 0.0, FEFunction());
    double F = 0.5 * lumped_inner(u, u) - lumped_inner(b, u) +
               p.tau * energy_reg(u, tv_only);
    if (p.energy.lambda > 0.0) {
        const FEFunction d = u - p.g_h;
        F += 0.5 * p.tau * p.energy.lambda * lumped_inner(d, d);
    }
    return F;
}

// Nodal residual of the scheme identity, infinity norm.
double scheme_residual(const FEFunction& x, const FEFunction& prev, double dW,
                       const SchemeParams& p) {
    const int J = p.mesh->cell_count;
    const double h = p.mesh->h;
    const double eps = p.energy.epsilon;
    const double lam = p.energy.lambda;
    double worst = 0.0;
    for (int j = 1; j < J; ++j) {
        const double dj = (x.value(j) - x.value(j - 1)) / h;
        const double djp = (x.value(j + 1) - x.value(j)) / h;
        const double r = h * (1.0 + p.tau * lam) * x.value(j) +
                         p.tau * (flux(dj, eps) - flux(djp, eps)) -
                         p.tau * lam * h * p.g_h.value(j) -
                         h * (1.0 + dW) * prev.value(j);
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

SchemeParams params_on(MeshPtr mesh, double eps, double lam, double tau,
                       int steps, FEFunction x0, FEFunction g) {
    return make_scheme_params(std::move(mesh), eps, lam, tau, steps,
                              std::move(x0), std::move(g));
}

}  // namespace

TEST_CASE("step: zero is a fixed point for every noise value") {
    MeshPtr mesh = make_shared_mesh(8);
    SchemeParams p = params_on(mesh, 0.5, 2.0, 0.05, 1, FEFunction::zeros(mesh),
                               FEFunction::zeros(mesh));
    for (double dW : {0.0, 0.3, -0.9}) {
        const FEFunction x = step(FEFunction::zeros(mesh), dW, p);
        for (double v : x.values) CHECK(std::abs(v) <= 1e-12);
    }
}

TEST_CASE("step: single-interior-node root oracles") {
    MeshPtr mesh = make_shared_mesh(2);

    // eps=0.5, tau=0.1, lam=0, prev=1, dW=0. Root of
    // 0.5 u + 0.2 f(2u) = 0.5 computed by an independent bracketing solve.
    {
        SchemeParams p = params_on(mesh, 0.5, 0.0, 0.1, 1,
                                   FEFunction::zeros(mesh), FEFunction::zeros(mesh));
        FEFunction prev(mesh, {0.0, 1.0, 0.0}, true);
        const FEFunction x = step(prev, 0.0, p);
        CHECK(x.values[1] == doctest::Approx(0.6283376415846061).epsilon(1e-10));
    }

    // eps=0.25, tau=0.2, lam=2, g=0.5, prev=0.8, dW=0.1.
    {
        FEFunction g(mesh, {0.0, 0.5, 0.0}, true);
        SchemeParams p = params_on(mesh, 0.25, 2.0, 0.2, 1,
                                   FEFunction::zeros(mesh), g);
        FEFunction prev(mesh, {0.0, 0.8, 0.0}, true);
        const FEFunction x = step(prev, 0.1, p);
        CHECK(x.values[1] == doctest::Approx(0.257404324309917).epsilon(1e-10));
    }
}

TEST_CASE("step: three-node system root oracle") {
    MeshPtr mesh = make_shared_mesh(4);
    FEFunction prev(mesh, {0.0, 0.6, 1.0, 0.2, 0.0}, true);
    FEFunction g(mesh, {0.0, 0.3, -0.2, 0.1, 0.0}, true);
    SchemeParams p = params_on(mesh, 0.3, 1.5, 0.05, 1, prev, g);
    const FEFunction x = step(prev, -0.2, p);
    CHECK(x.values[1] == doctest::Approx(0.39141274378965635).epsilon(1e-9));
    CHECK(x.values[2] == doctest::Approx(0.44391462650826685).epsilon(1e-9));
    CHECK(x.values[3] == doctest::Approx(0.1659093882605388).epsilon(1e-9));
    CHECK(x.values[0] == 0.0);
    CHECK(x.values[4] == 0.0);
}

TEST_CASE("step: nodal residual meets the advertised tolerance") {
    std::mt19937_64 rng(21);
    for (int J : {2, 8, 32}) {
        MeshPtr mesh = make_shared_mesh(J);
        for (int trial = 0; trial < 10; ++trial) {
            const double eps = 0.02 + 0.5 * (trial % 3);
            const double lam = (trial % 2) ? 1.0 : 0.0;
            const FEFunction prev = random_dirichlet(mesh, rng);
            const FEFunction g = random_dirichlet(mesh, rng);
            SchemeParams p = params_on(mesh, std::min(eps, 1.0), lam, 0.02, 1,
                                       prev, g);
            const double dW = 0.1 * static_cast<double>(trial - 5);
            const FEFunction x = step(prev, dW, p);
            CHECK(scheme_residual(x, prev, dW, p) <= p.solver_tol * mesh->h);
        }
    }
}

TEST_CASE("step: smooth regime matches an independent tridiagonal solve") {
    // For |grad u| << eps the flux is delta/eps up to O(delta^3) and the
    // step is a linear lumped reaction-diffusion solve.
    const int J = 8;
    MeshPtr mesh = make_shared_mesh(J);
    const double eps = 1.0, tau = 0.01, h = mesh->h;
    std::mt19937_64 rng(22);
    const FEFunction prev = random_dirichlet(mesh, rng, 1e-4);
    SchemeParams p = params_on(mesh, eps, 0.0, tau, 1, prev,
                               FEFunction::zeros(mesh));
    const FEFunction x = step(prev, 0.0, p);

    // Thomas solve of (h + 2 tau/(eps h)) u_j - tau/(eps h) (u_{j-1}+u_{j+1})
    // = h prev_j.
    const double diag_v = h + 2.0 * tau / (eps * h);
    const double off = -tau / (eps * h);
    std::vector<double> diag(J - 1, diag_v), rhs(J - 1);
    for (int j = 1; j < J; ++j) rhs[static_cast<std::size_t>(j - 1)] = h * prev.value(j);
    for (int i = 1; i < J - 1; ++i) {
        const double m = off / diag[static_cast<std::size_t>(i - 1)];
        diag[static_cast<std::size_t>(i)] -= m * off;
        rhs[static_cast<std::size_t>(i)] -= m * rhs[static_cast<std::size_t>(i - 1)];
    }
    std::vector<double> u(J - 1);
    u[static_cast<std::size_t>(J - 2)] =
        rhs[static_cast<std::size_t>(J - 2)] / diag[static_cast<std::size_t>(J - 2)];
    for (int i = J - 3; i >= 0; --i) {
        u[static_cast<std::size_t>(i)] =
            (rhs[static_cast<std::size_t>(i)] - off * u[static_cast<std::size_t>(i) + 1]) /
            diag[static_cast<std::size_t>(i)];
    }
    for (int j = 1; j < J; ++j) {
        CHECK(std::abs(x.value(j) - u[static_cast<std::size_t>(j - 1)]) <= 1e-8);
    }
}

TEST_CASE("step and prox_oracle agree (mutual optimality)") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> Ueps(0.01, 1.0);
    std::uniform_real_distribution<double> Utau(1e-3, 0.1);
    const double lams[] = {0.0, 1.0, 10.0};
    for (int trial = 0; trial < 15; ++trial) {
        const int J = 2 + (trial * 7) % 31;
        MeshPtr mesh = make_shared_mesh(J);
        const FEFunction prev = random_dirichlet(mesh, rng);
        const FEFunction g = random_dirichlet(mesh, rng);
        SchemeParams p = params_on(mesh, Ueps(rng), lams[trial % 3], Utau(rng),
                                   1, prev, g);
        const double dW = (trial % 4 == 0) ? -0.4 : 0.25;

        const FEFunction via_step = step(prev, dW, p);
        const FEFunction b = (1.0 + dW) * prev;
        const FEFunction via_oracle = prox_oracle(b, true, p);

        CHECK(lumped_norm(via_step - via_oracle) <= 1e-8);
        const double Fs = step_functional(via_step, b, p);
        const double Fo = step_functional(via_oracle, b, p);
        CHECK(Fs <= Fo + 1e-10);
        CHECK(Fo <= Fs + 1e-10);
    }

    // dW_absorbed=false: the datum is used as-is (deterministic step).
    MeshPtr mesh = make_shared_mesh(16);
    const FEFunction prev = random_dirichlet(mesh, rng);
    SchemeParams p = params_on(mesh, 0.1, 1.0, 0.01, 1, prev,
                               interpolate([](double x) { return std::sin(3.141592653589793 * x); },
                                           mesh, true));
    CHECK(lumped_norm(prox_oracle(prev, false, p) - step(prev, 0.0, p)) <= 1e-8);
}

TEST_CASE("prox_oracle: zero datum gives the zero minimizer") {
    MeshPtr mesh = make_shared_mesh(8);
    SchemeParams p = params_on(mesh, 0.5, 0.0, 0.05, 1, FEFunction::zeros(mesh),
                               FEFunction::zeros(mesh));
    const FEFunction m = prox_oracle(FEFunction::zeros(mesh), false, p);
    for (double v : m.values) CHECK(std::abs(v) <= 1e-11);
}

TEST_CASE("deterministic flow is a contraction in the lumped norm") {
    std::mt19937_64 rng(24);
    MeshPtr mesh = make_shared_mesh(16);
    SchemeParams p = params_on(mesh, 0.1, 0.0, 0.02, 1, FEFunction::zeros(mesh),
                               FEFunction::zeros(mesh));
    for (int trial = 0; trial < 10; ++trial) {
        const FEFunction a = random_dirichlet(mesh, rng);
        const FEFunction b = random_dirichlet(mesh, rng);
        const FEFunction xa = step(a, 0.0, p);
        const FEFunction xb = step(b, 0.0, p);
        CHECK(lumped_norm(xa - xb) <= lumped_norm(a - b) + 1e-12);
    }
}

TEST_CASE("zero-noise path satisfies the minimizing-movement inequality") {
    std::mt19937_64 rng(25);
    for (double lam : {0.0, 1.5}) {
        MeshPtr mesh = make_shared_mesh(24);
        const FEFunction x0 = random_dirichlet(mesh, rng);
        const FEFunction g = random_dirichlet(mesh, rng);
        SchemeParams p = params_on(mesh, 0.05, lam, 0.01, 40, x0, g);
        const PathSample path = solve_path(p, degenerate_increments(40));
        for (int i = 1; i <= 40; ++i) {
            const FEFunction d = path.states[static_cast<std::size_t>(i)] -
                                 path.states[static_cast<std::size_t>(i) - 1];
            const double drop =
                scheme_energy(path.states[static_cast<std::size_t>(i - 1)], p) -
                scheme_energy(path.states[static_cast<std::size_t>(i)], p);
            CHECK(lumped_inner(d, d) / (2.0 * p.tau) <= drop + 1e-10);
        }
        if (lam == 0.0) {
            // with no fidelity the recorded regularized energy itself decays
            for (int i = 1; i <= 40; ++i) {
                CHECK(path.per_step_energy[static_cast<std::size_t>(i)] <=
                      path.per_step_energy[static_cast<std::size_t>(i) - 1] + 1e-10);
            }
        }
    }
}

TEST_CASE("solve_path records a consistent trajectory") {
    MeshPtr mesh = make_shared_mesh(16);
    const FEFunction x0 = interpolate(
        [](double x) { return std::sin(3.141592653589793 * x); }, mesh, true);
    SchemeParams p = params_on(mesh, 0.25, 1.0, 0.05, 12, x0,
                               FEFunction::zeros(mesh));
    NoisePlan plan;
    plan.steps = 12;
    plan.tau = 0.05;
    plan.master_seed = 31;
    plan.path_index = 0;
    const std::vector<double> dw = sample_increments(plan);

    const PathSample path = solve_path(p, dw);
    REQUIRE(path.states.size() == 13);
    REQUIRE(path.per_step_energy.size() == 13);
    CHECK(path.increments == dw);
    CHECK(path.states[0].values == x0.values);
    for (int i = 0; i <= 12; ++i) {
        CHECK(path.per_step_energy[static_cast<std::size_t>(i)] ==
              doctest::Approx(energy_reg(path.states[static_cast<std::size_t>(i)],
                                         p.energy))
                  .epsilon(1e-14));
        CHECK(path.states[static_cast<std::size_t>(i)].dirichlet);
    }

    // bitwise repeatability
    const PathSample again = solve_path(p, dw);
    for (int i = 0; i <= 12; ++i) {
        CHECK(again.states[static_cast<std::size_t>(i)].values ==
              path.states[static_cast<std::size_t>(i)].values);
    }

    // zero initial state and data stay at zero
    SchemeParams pz = params_on(mesh, 0.25, 1.0, 0.05, 12,
                                FEFunction::zeros(mesh), FEFunction::zeros(mesh));
    const PathSample zero_path = solve_path(pz, dw);
    for (const FEFunction& s : zero_path.states) {
        for (double v : s.values) CHECK(std::abs(v) <= 1e-12);
    }

    CHECK_THROWS_AS(solve_path(p, degenerate_increments(5)),
                    std::invalid_argument);
}

TEST_CASE("the energy minimizer is stationary under the flow") {
    MeshPtr mesh = make_shared_mesh(20);
    const FEFunction g = interpolate(
        [](double x) { return (x > 0.25 && x <= 0.75) ? 1.0 : 0.0; }, mesh, true);
    SchemeParams p = params_on(mesh, 0.1, 1.5, 0.05, 30, FEFunction::zeros(mesh), g);
    const FEFunction m = minimize_energy(p);

    SchemeParams from_min = p;
    from_min.x0 = m;
    const PathSample path = solve_path(from_min, degenerate_increments(30));
    for (const FEFunction& s : path.states) {
        CHECK(lumped_norm(s - m) <= 1e-8);
    }

    // and the zero-noise flow converges toward the same minimizer
    const PathSample relax = solve_path(p, degenerate_increments(30));
    CHECK(lumped_norm(relax.states.back() - m) <
          lumped_norm(relax.states.front() - m));
}

TEST_CASE("parameter validation") {
    MeshPtr mesh = make_shared_mesh(8);
    const FEFunction z = FEFunction::zeros(mesh);

    CHECK_THROWS_AS(make_scheme_params(mesh, 0.5, 0.0, 0.0, 4, z, z),
                    std::invalid_argument);  // tau
    CHECK_THROWS_AS(make_scheme_params(mesh, 0.5, 0.0, 0.1, 0, z, z),
                    std::invalid_argument);  // steps
    CHECK_THROWS_AS(make_scheme_params(mesh, -0.5, 0.0, 0.1, 4, z, z),
                    std::invalid_argument);  // epsilon range
    CHECK_THROWS_AS(
        make_scheme_params(mesh, 0.5, 0.0, 0.1, 4,
                           FEFunction::zeros(make_shared_mesh(4)), z),
        std::invalid_argument);  // mesh mismatch

    // eps = 0 stepping is rejected (nonsmooth step unsupported)
    SchemeParams p = make_scheme_params(mesh, 0.0, 0.0, 0.1, 4, z, z);
    CHECK_THROWS_AS(step(z, 0.0, p), std::invalid_argument);

    // lambda = 0 leaves the stationary problem noncoercive
    SchemeParams q = make_scheme_params(mesh, 0.5, 0.0, 0.1, 4, z, z);
    CHECK_THROWS_AS(minimize_energy(q), std::invalid_argument);

    FEFunction loose(mesh, std::vector<double>(9, 1.0), false);
    SchemeParams r = make_scheme_params(mesh, 0.5, 0.0, 0.1, 4, z, z);
    CHECK_THROWS_AS(step(loose, 0.0, r), std::invalid_argument);
}
