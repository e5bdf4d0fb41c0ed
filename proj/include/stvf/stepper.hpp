#pragma once

#include "stvf/energy.hpp"
#include "stvf/mesh.hpp"

#include <stdexcept>
#include <vector>

namespace stvf {

// Parameters of the fully discrete scheme: implicit Euler in time with the
// mass-lumped pairing, epsilon-regularized flux, fidelity weight lambda
// against projected data g_h, and multiplicative noise on the previous
// iterate. energy.g is expected to alias g_h so that recorded energies and
// the scheme see the same data term; make_scheme_params sets this up.
struct SchemeParams {
    MeshPtr mesh;
    EnergyParams energy;
    double tau = 0.0;
    int steps = 0;                 // N, tau*N = T
    FEFunction x0;                 // projected initial datum, dirichlet
    FEFunction g_h;                // projected data term, dirichlet
    double solver_tol = 1e-10;    // absolute nodal residual bound
    int solver_max_iter = 200;
};

SchemeParams make_scheme_params(MeshPtr mesh, double epsilon, double lambda,
                                double tau, int steps, FEFunction x0,
                                FEFunction g_h, double solver_tol = 1e-10,
                                int solver_max_iter = 200);

// Throws std::invalid_argument on any violated precondition.
void validate_scheme_params(const SchemeParams& p);

// One realization: the increments that drove it, the trajectory X^0..X^N,
// and the regularized energy recorded after every step.
struct PathSample {
    SchemeParams params;
    std::vector<double> increments;        // length N
    std::vector<FEFunction> states;        // length N+1, states[0] = x0
    std::vector<double> per_step_energy;   // length N+1, energy_reg(X^i)
};

// Nonlinear solve failure carrying the last residual seen.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, double residual, int iterations,
                  int step_index = -1)
        : std::runtime_error(what),
          last_residual(residual),
          iterations(iterations),
          step_index(step_index) {}

    double last_residual;
    int iterations;
    int step_index;  // 1-based step within a path, -1 outside solve_path
};

// One implicit step: the unique dirichlet solution X of
//   h(1+tau*lambda) X_j + tau (flux(d_j) - flux(d_{j+1}))
//     - tau*lambda*h g_j - h (1+dW) prev_j = 0      for interior j,
// equivalently the minimizer of the strictly convex per-step functional
//   F(u) = 1/2||u||_h^2 - <(1+dW) prev, u>_h
//        + tau * int sqrt(|u'|^2 + eps^2) + (tau*lambda/2)||u - g_h||_h^2.
// Damped Newton on the smooth residual, first-order fallback if it stalls.
// Requires eps > 0. On return the residual infinity-norm is <= solver_tol*h
// (variational residual against every hat function).
FEFunction step(const FEFunction& prev, double dW, const SchemeParams& p);

// Independent verification route for step: minimizes the same per-step
// functional by fixed-step accelerated gradient descent (no Newton, no
// linear solves). Aims for gradient norm <= solver_tol/10 * h and accepts
// solver_tol * h when the target lies below the representable floor. b is
// the drift datum: the pre-scaled (1+dW)*prev when dW_absorbed, or the
// plain previous iterate for the deterministic dW = 0 step.
FEFunction prox_oracle(const FEFunction& b, bool dW_absorbed,
                       const SchemeParams& p);

// Sequential application of step over the whole increment array.
// Failures are rethrown with the 1-based step index attached.
PathSample solve_path(const SchemeParams& p,
                      const std::vector<double>& increments);

// The per-step Lyapunov functional: int sqrt(|v'|^2+eps^2)
// + (lambda/2)||v - g_h||_h^2. The implicit step decreases this by at least
// ||X^i - X^{i-1}||_h^2 / (2 tau) when dW = 0, and the zero-noise flow
// converges to its minimizer.
double scheme_energy(const FEFunction& v, const SchemeParams& p);

// Minimizer of the stationary functional scheme_energy over V_h.
// Requires lambda > 0 (coercivity); Newton with first-order fallback.
FEFunction minimize_energy(const SchemeParams& p);

}  // namespace stvf
