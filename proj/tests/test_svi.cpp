#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "stvf/mesh.hpp"
#include "stvf/noise.hpp"
#include "stvf/stepper.hpp"
#include "stvf/svi.hpp"

using namespace stvf;

namespace {

constexpr double kPi = 3.14159265358979323846;

FEFunction scalar_node(MeshPtr mesh, double v) {
    // J = 2 helper: the single interior value
    return FEFunction(std::move(mesh), {0.0, v, 0.0}, true);
}

}  // namespace

TEST_CASE("roll_test_process: recursion oracles") {
    MeshPtr mesh = make_shared_mesh(2);

    // zero start, zero drift stays zero
    {
        TestProcessSpec spec = constant_test_process(
            FEFunction::zeros(mesh), FEFunction::zeros(mesh), 3);
        const auto z = roll_test_process(spec, {0.4, -0.2, 0.1}, 0.05);
        REQUIRE(z.size() == 4);
        for (const auto& zi : z)
            for (double v : zi.values) CHECK(v == 0.0);
    }

    // no drift, no noise: constant in time
    {
        TestProcessSpec spec = constant_test_process(
            scalar_node(mesh, 0.7), FEFunction::zeros(mesh), 4);
        const auto z = roll_test_process(spec, degenerate_increments(4), 0.1);
        for (const auto& zi : z) CHECK(zi.values[1] == 0.7);
    }

    // drift equal to the start, no noise: Z^i = (1 - i tau) z0
    {
        const FEFunction z0 = scalar_node(mesh, 0.6);
        TestProcessSpec spec = constant_test_process(z0, z0, 5);
        const auto z = roll_test_process(spec, degenerate_increments(5), 0.1);
        for (int i = 0; i <= 5; ++i) {
            CHECK(z[static_cast<std::size_t>(i)].values[1] ==
                  doctest::Approx((1.0 - 0.1 * i) * 0.6).epsilon(1e-14));
        }
    }

    // general recursion with noise: hand-rolled two steps
    {
        TestProcessSpec spec;
        spec.z0 = scalar_node(mesh, 0.3);
        spec.drift = {scalar_node(mesh, 0.25), scalar_node(mesh, -0.1)};
        const auto z = roll_test_process(spec, {0.2, -0.3}, 0.1);
        CHECK(z[1].values[1] == doctest::Approx(0.335).epsilon(1e-14));
        CHECK(z[2].values[1] == doctest::Approx(0.2445).epsilon(1e-14));
        CHECK(z[2].dirichlet);
    }

    // length mismatch and missing dirichlet are rejected
    TestProcessSpec bad = constant_test_process(scalar_node(mesh, 1.0),
                                                FEFunction::zeros(mesh), 3);
    CHECK_THROWS_AS(roll_test_process(bad, {0.1, 0.2}, 0.1),
                    std::invalid_argument);
    TestProcessSpec loose;
    loose.z0 = FEFunction(mesh, {1.0, 0.5, 1.0}, false);
    loose.drift = {FEFunction::zeros(mesh)};
    CHECK_THROWS_AS(roll_test_process(loose, {0.1}, 0.1),
                    std::invalid_argument);
}

TEST_CASE("svi_terms_one_path: frozen two-step tableau") {
    // J=2 (h=1/2), N=2, tau=0.1, eps=0.4, lambda=0.
    // X interior values (0.7, 0.5, 0.65), increments (0.2, -0.3);
    // Z from z0=0.3 with drifts (0.25, -0.1). All terms recomputed
    // independently from the closed-form expressions.
    MeshPtr mesh = make_shared_mesh(2);
    SchemeParams p = make_scheme_params(mesh, 0.4, 0.0, 0.1, 2,
                                        scalar_node(mesh, 0.7),
                                        FEFunction::zeros(mesh));

    PathSample x;
    x.params = p;
    x.increments = {0.2, -0.3};
    x.states = {scalar_node(mesh, 0.7), scalar_node(mesh, 0.5),
                scalar_node(mesh, 0.65)};
    x.per_step_energy = {0.0, 0.0, 0.0};

    TestProcessSpec spec;
    spec.z0 = scalar_node(mesh, 0.3);
    spec.drift = {scalar_node(mesh, 0.25), scalar_node(mesh, -0.1)};
    const auto z = roll_test_process(spec, x.increments, p.tau);

    const SVITerms t = svi_terms_one_path(x, z, spec, p, 2);
    CHECK(t.lhs_dist.value == doctest::Approx(0.041107562500000014).epsilon(1e-14));
    CHECK(t.lhs_energy.value == doctest::Approx(0.25330549392830043).epsilon(1e-14));
    CHECK(t.rhs_init.value == doctest::Approx(0.04).epsilon(1e-14));
    CHECK(t.rhs_energy.value == doctest::Approx(0.1501430702088774).epsilon(1e-14));
    CHECK(t.rhs_dist_int.value == doctest::Approx(0.004680625).epsilon(1e-14));
    CHECK(t.rhs_cross.value == doctest::Approx(0.004175).epsilon(1e-14));
    CHECK(t.gap.value == doctest::Approx(-0.09541436121942307).epsilon(1e-13));

    // accounting identity holds bitwise
    CHECK(t.gap.value == (t.rhs_init.value + t.rhs_energy.value +
                          t.rhs_dist_int.value + t.rhs_cross.value) -
                             (t.lhs_dist.value + t.lhs_energy.value));

    // n = 0: empty quadrature, distance terms cancel
    const SVITerms t0 = svi_terms_one_path(x, z, spec, p, 0);
    CHECK(t0.lhs_dist.value == t0.rhs_init.value);
    CHECK(t0.lhs_energy.value == 0.0);
    CHECK(t0.rhs_energy.value == 0.0);
    CHECK(t0.rhs_dist_int.value == 0.0);
    CHECK(t0.rhs_cross.value == 0.0);
    CHECK(t0.gap.value == 0.0);

    CHECK_THROWS_AS(svi_terms_one_path(x, z, spec, p, 3), std::out_of_range);
    CHECK_THROWS_AS(svi_terms_one_path(x, z, spec, p, -1), std::out_of_range);
}

TEST_CASE("svi_terms_one_path: identically zero processes") {
    MeshPtr mesh = make_shared_mesh(4);
    SchemeParams p = make_scheme_params(mesh, 0.5, 0.0, 0.1, 3,
                                        FEFunction::zeros(mesh),
                                        FEFunction::zeros(mesh));
    const PathSample x = solve_path(p, degenerate_increments(3));
    TestProcessSpec spec = constant_test_process(FEFunction::zeros(mesh),
                                                 FEFunction::zeros(mesh), 3);
    const auto z = roll_test_process(spec, x.increments, p.tau);
    const SVITerms t = svi_terms_one_path(x, z, spec, p, 3);
    CHECK(t.lhs_dist.value == 0.0);
    CHECK(t.rhs_init.value == 0.0);
    CHECK(t.rhs_dist_int.value == 0.0);
    CHECK(t.rhs_cross.value == 0.0);
    // both energies reduce to the eps * |domain| constant per step
    CHECK(t.lhs_energy.value == doctest::Approx(t.rhs_energy.value).epsilon(1e-15));
    CHECK(t.gap.value == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("pairwise_sum: fixed-order reduction") {
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = (i % 2 ? 1.0 : -1.0) / static_cast<double>(i + 1);
    const double s = pairwise_sum(v.data(), v.size());
    const double again = pairwise_sum(v.data(), v.size());
    CHECK(s == again);

    double plain = 0.0;
    for (double x : v) plain += x;
    CHECK(s == doctest::Approx(plain).epsilon(1e-12));
    CHECK(pairwise_sum(v.data(), 0) == 0.0);
    CHECK(pairwise_sum(v.data(), 1) == v[0]);
}

TEST_CASE("mc_svi: zero configuration gives exact zero gap and passes") {
    MeshPtr mesh = make_shared_mesh(8);
    SchemeParams p = make_scheme_params(mesh, 0.25, 0.0, 0.1, 8,
                                        FEFunction::zeros(mesh),
                                        FEFunction::zeros(mesh));
    TestProcessSpec spec = constant_test_process(FEFunction::zeros(mesh),
                                                 FEFunction::zeros(mesh), 8);
    const SVIReport rep = mc_svi(p, spec, 16, 4321, 8);
    CHECK(rep.terms.gap.value == 0.0);
    CHECK(rep.terms.gap.std_error == 0.0);
    CHECK(rep.pass);
    CHECK(rep.sample_count == 16);
    CHECK(rep.time_index == 8);
    CHECK(rep.slack == doctest::Approx(0.1 + 0.125).epsilon(1e-15));
    CHECK(!rep.limitation.empty());
}

TEST_CASE("mc_svi: report is identical for every worker count") {
    MeshPtr mesh = make_shared_mesh(8);
    const FEFunction x0 =
        lumped_projection([](double x) { return std::sin(kPi * x); }, mesh);
    SchemeParams p = make_scheme_params(mesh, 0.25, 1.0, 1.0 / 8.0, 8, x0,
                                        FEFunction::zeros(mesh));
    TestProcessSpec spec = constant_test_process(x0, FEFunction::zeros(mesh), 8);

    const SVIReport r1 = mc_svi(p, spec, 30, 99, 8, 1.0, 1);
    const SVIReport r2 = mc_svi(p, spec, 30, 99, 8, 1.0, 2);
    const SVIReport r3 = mc_svi(p, spec, 30, 99, 8, 1.0, 7);

    for (const SVIReport* r : {&r2, &r3}) {
        CHECK(r->terms.lhs_dist.value == r1.terms.lhs_dist.value);
        CHECK(r->terms.lhs_energy.value == r1.terms.lhs_energy.value);
        CHECK(r->terms.rhs_init.value == r1.terms.rhs_init.value);
        CHECK(r->terms.rhs_energy.value == r1.terms.rhs_energy.value);
        CHECK(r->terms.rhs_dist_int.value == r1.terms.rhs_dist_int.value);
        CHECK(r->terms.rhs_cross.value == r1.terms.rhs_cross.value);
        CHECK(r->terms.gap.value == r1.terms.gap.value);
        CHECK(r->terms.gap.std_error == r1.terms.gap.std_error);
        CHECK(r->pass == r1.pass);
    }

    // accounting identity survives the reduction
    CHECK(r1.terms.gap.value ==
          (r1.terms.rhs_init.value + r1.terms.rhs_energy.value +
           r1.terms.rhs_dist_int.value + r1.terms.rhs_cross.value) -
              (r1.terms.lhs_dist.value + r1.terms.lhs_energy.value));
}

TEST_CASE("mc_svi: a small stochastic cell passes the inequality") {
    MeshPtr mesh = make_shared_mesh(8);
    const FEFunction x0 =
        lumped_projection([](double x) { return std::sin(kPi * x); }, mesh);
    SchemeParams p = make_scheme_params(mesh, 0.25, 0.0, 1.0 / 8.0, 8, x0,
                                        FEFunction::zeros(mesh));
    TestProcessSpec spec = constant_test_process(x0, FEFunction::zeros(mesh), 8);
    const SVIReport rep = mc_svi(p, spec, 200, 2026, 8);
    CHECK(rep.pass);
    CHECK(rep.terms.gap.std_error > 0.0);
}

TEST_CASE("mc_svi: validation") {
    MeshPtr mesh = make_shared_mesh(4);
    SchemeParams p = make_scheme_params(mesh, 0.5, 0.0, 0.1, 4,
                                        FEFunction::zeros(mesh),
                                        FEFunction::zeros(mesh));
    TestProcessSpec spec = constant_test_process(FEFunction::zeros(mesh),
                                                 FEFunction::zeros(mesh), 4);
    CHECK_THROWS_AS(mc_svi(p, spec, 1, 1, 4), std::invalid_argument);
    CHECK_THROWS_AS(mc_svi(p, spec, 8, 1, 5), std::out_of_range);
    TestProcessSpec short_drift = constant_test_process(
        FEFunction::zeros(mesh), FEFunction::zeros(mesh), 3);
    CHECK_THROWS_AS(mc_svi(p, short_drift, 8, 1, 4), std::invalid_argument);
}

TEST_CASE("quadrature consistency: integral terms converge first order") {
    // deterministic configuration, Z = 0: refine tau at fixed T and check
    // the left-endpoint sums form a Cauchy sequence with ~halving errors.
    MeshPtr mesh = make_shared_mesh(8);
    const FEFunction x0 =
        lumped_projection([](double x) { return std::sin(kPi * x); }, mesh);
    const double T = 0.4;

    auto terms_at = [&](int N) {
        SchemeParams p = make_scheme_params(mesh, 0.25, 0.0, T / N, N, x0,
                                            FEFunction::zeros(mesh));
        const PathSample x = solve_path(p, degenerate_increments(N));
        TestProcessSpec spec = constant_test_process(FEFunction::zeros(mesh),
                                                     FEFunction::zeros(mesh), N);
        const auto z = roll_test_process(spec, x.increments, p.tau);
        return svi_terms_one_path(x, z, spec, p, N);
    };

    const SVITerms a = terms_at(8), b = terms_at(16), c = terms_at(32);
    const double e1 = std::abs(a.lhs_energy.value - b.lhs_energy.value);
    const double e2 = std::abs(b.lhs_energy.value - c.lhs_energy.value);
    CHECK(e2 <= 0.8 * e1);
    const double d1 = std::abs(a.rhs_dist_int.value - b.rhs_dist_int.value);
    const double d2 = std::abs(b.rhs_dist_int.value - c.rhs_dist_int.value);
    CHECK(d2 <= 0.8 * d1);
}
