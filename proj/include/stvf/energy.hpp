#pragma once

#include "stvf/mesh.hpp"

namespace stvf {

// Parameters of the regularized TV energy with fidelity weight lambda and
// data term g. epsilon is restricted to [0,1], lambda to [0, inf). g is
// ignored (and not validated) when lambda == 0.
struct EnergyParams {
    double epsilon = 0.0;
    double lambda = 0.0;
    FEFunction g;

    EnergyParams() = default;
    EnergyParams(double eps, double lam, FEFunction data);
};

// Scalar regularized flux s / sqrt(s^2 + eps^2). At eps == 0 this is the
// sign of s, with the subgradient selection flux(0, 0) = 0 so the function
// stays total and odd. Bounded by 1, monotone nondecreasing in s.
double flux(double s, double epsilon);

// Derivative of the flux in s: eps^2 / (s^2 + eps^2)^(3/2).
double flux_derivative(double s, double epsilon);

// Regularized energy: sum_j h * sqrt((delta_x v^j)^2 + eps^2)
//                     + (lambda/2) * ||v - g||_{L2}^2,
// with the exact L2 norm of the piecewise-linear difference. The additive
// constant eps*|O| is retained. At epsilon == 0 this equals energy_tv.
double energy_reg(const FEFunction& v, const EnergyParams& p);

// Total variation energy: sum_j h * |delta_x v^j| + (lambda/2)||v - g||^2.
double energy_tv(const FEFunction& v, const EnergyParams& p);

// Boundary-corrected energy: the interior energy plus the trace penalty
// |v(0)| + |v(1)|. Accepts non-dirichlet inputs (BV-type arguments); on
// dirichlet inputs it coincides with the interior energy.
double energy_bar(const FEFunction& v, const EnergyParams& p, bool regularized);

// The sign pairing behind the discrete-Laplacian inequality:
//   (1/h) * sum_{j=1}^{J-1} (flux(d_{j+1}) - flux(d_j)) * (d_{j+1} - d_j)
// with d_j the cellwise gradients of v. Each summand is (f(a)-f(b))(a-b)
// with f monotone, so the sum is nonnegative for every nodal v and
// epsilon > 0; no trace condition needed. On dirichlet v it equals the
// assembled pairing <flux(grad v), grad(-Laplacian v)> (the boundary terms
// of the summation by parts vanish). Affine profiles give exactly 0.
double lemma_pairing(const FEFunction& v, double epsilon);

}  // namespace stvf
