#pragma once

#include <functional>
#include <memory>
#include <vector>

namespace stvf {

// Uniform partition of the domain (0,1) into J cells T_j = (x_{j-1}, x_j)
// with nodes x_j = j*h, h = 1/J.
struct Mesh1D {
    int cell_count = 0;            // J
    double h = 0.0;                // 1/J
    std::vector<double> nodes;     // length J+1, strictly increasing
};

using MeshPtr = std::shared_ptr<const Mesh1D>;

// Rejects J < 2 (a single cell has no interior node).
Mesh1D make_mesh(int cell_count);
MeshPtr make_shared_mesh(int cell_count);

// Piecewise-linear globally continuous function stored as nodal values.
// dirichlet marks membership in the zero-trace subspace V_h; the endpoint
// values are forced to exactly 0 on construction so the invariant cannot
// drift through arithmetic.
struct FEFunction {
    MeshPtr mesh;
    std::vector<double> values;    // length J+1
    bool dirichlet = false;

    FEFunction() = default;
    FEFunction(MeshPtr m, std::vector<double> nodal, bool dirichlet_flag);

    static FEFunction zeros(MeshPtr m, bool dirichlet_flag = true);

    int cells() const { return mesh->cell_count; }
    double value(int j) const { return values[static_cast<std::size_t>(j)]; }

    // Pointwise evaluation of the piecewise-linear extension.
    double eval(double x) const;
};

// One value per cell, e.g. the cellwise gradient.
struct CellField {
    MeshPtr mesh;
    std::vector<double> values;    // length J
};

// True when both functions live on meshes of the same resolution.
bool same_mesh(const FEFunction& u, const FEFunction& v);

// Nodal interpolation: values[j] = f(x_j); endpoints zeroed if dirichlet.
FEFunction interpolate(const std::function<double(double)>& f, MeshPtr mesh,
                       bool dirichlet);

// Mass-lumped inner product h * sum_{j=1}^{J-1} u_j v_j. Requires matching
// meshes and dirichlet arguments (the sum runs over interior nodes only).
double lumped_inner(const FEFunction& u, const FEFunction& v);

// Exact L2 pairing of the two piecewise-linear functions, assembled per
// element as (h/6)(2 u_a v_a + u_a v_b + u_b v_a + 2 u_b v_b).
double l2_inner(const FEFunction& u, const FEFunction& v);

double lumped_norm(const FEFunction& u);
double l2_norm(const FEFunction& u);

// Backward difference quotient per cell: values[j-1] = (v_j - v_{j-1})/h.
CellField gradient_cellwise(const FEFunction& v);

// Mass-lumped discrete Laplacian: second differences at interior nodes,
// zero at the boundary. Input must be dirichlet.
FEFunction discrete_laplacian(const FEFunction& v);

// Lumped-L2 projection P_h: nodal value (1/h) * int w(x) phi_j(x) dx at the
// interior nodes, so that <P_h w, v_h>_h = <w, v_h> for all v_h. Cell
// integrals use 3-point Gauss quadrature (exact for integrands of degree
// <= 5, i.e. data polynomials of degree <= 4).
FEFunction lumped_projection(const std::function<double(double)>& w,
                             MeshPtr mesh);

// Nodal arithmetic. Results carry the conjunction of the dirichlet flags.
FEFunction operator+(const FEFunction& u, const FEFunction& v);
FEFunction operator-(const FEFunction& u, const FEFunction& v);
FEFunction operator*(double a, const FEFunction& u);

}  // namespace stvf
