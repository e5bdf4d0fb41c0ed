#include "stvf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stvf {

Mesh1D make_mesh(int cell_count) {
    if (cell_count < 2) {
        throw std::invalid_argument(
            "make_mesh: cell count must be >= 2, got " +
            std::to_string(cell_count));
    }
    Mesh1D mesh;
    mesh.cell_count = cell_count;
    mesh.h = 1.0 / static_cast<double>(cell_count);
    mesh.nodes.resize(static_cast<std::size_t>(cell_count) + 1);
    for (int j = 0; j <= cell_count; ++j) {
        mesh.nodes[static_cast<std::size_t>(j)] = j * mesh.h;
    }
    mesh.nodes.back() = 1.0;
    return mesh;
}

MeshPtr make_shared_mesh(int cell_count) {
    return std::make_shared<const Mesh1D>(make_mesh(cell_count));
}

FEFunction::FEFunction(MeshPtr m, std::vector<double> nodal, bool dirichlet_flag)
    : mesh(std::move(m)), values(std::move(nodal)), dirichlet(dirichlet_flag) {
    if (!mesh) {
        throw std::invalid_argument("FEFunction: null mesh");
    }
    if (values.size() != mesh->nodes.size()) {
        throw std::invalid_argument("FEFunction: expected " +
                                    std::to_string(mesh->nodes.size()) +
                                    " nodal values, got " +
                                    std::to_string(values.size()));
    }
    if (dirichlet) {
        values.front() = 0.0;
        values.back() = 0.0;
    }
}

FEFunction FEFunction::zeros(MeshPtr m, bool dirichlet_flag) {
    std::vector<double> vals(m->nodes.size(), 0.0);
    return FEFunction(std::move(m), std::move(vals), dirichlet_flag);
}

double FEFunction::eval(double x) const {
    const int J = mesh->cell_count;
    const double h = mesh->h;
    if (x <= 0.0) return values.front();
    if (x >= 1.0) return values.back();
    int j = std::min(static_cast<int>(x / h), J - 1);  // cell T_{j+1}
    double t = (x - mesh->nodes[static_cast<std::size_t>(j)]) / h;
    return (1.0 - t) * values[static_cast<std::size_t>(j)] +
           t * values[static_cast<std::size_t>(j) + 1];
}

bool same_mesh(const FEFunction& u, const FEFunction& v) {
    return u.mesh && v.mesh && u.mesh->cell_count == v.mesh->cell_count;
}

namespace {

void require_same_mesh(const FEFunction& u, const FEFunction& v,
                       const char* where) {
    if (!same_mesh(u, v)) {
        throw std::invalid_argument(std::string(where) + ": mesh mismatch");
    }
}

}  // namespace

FEFunction interpolate(const std::function<double(double)>& f, MeshPtr mesh,
                       bool dirichlet) {
    std::vector<double> vals(mesh->nodes.size());
    for (std::size_t j = 0; j < vals.size(); ++j) {
        vals[j] = f(mesh->nodes[j]);
    }
    return FEFunction(std::move(mesh), std::move(vals), dirichlet);
}

double lumped_inner(const FEFunction& u, const FEFunction& v) {
    require_same_mesh(u, v, "lumped_inner");
    if (!u.dirichlet || !v.dirichlet) {
        throw std::invalid_argument(
            "lumped_inner: both arguments must be dirichlet (the pairing is "
            "defined on V_h)");
    }
    const int J = u.cells();
    double sum = 0.0;
    for (int j = 1; j < J; ++j) {
        sum += u.values[static_cast<std::size_t>(j)] *
               v.values[static_cast<std::size_t>(j)];
    }
    return u.mesh->h * sum;
}

double l2_inner(const FEFunction& u, const FEFunction& v) {
    require_same_mesh(u, v, "l2_inner");
    const int J = u.cells();
    const double h6 = u.mesh->h / 6.0;
    double sum = 0.0;
    for (int j = 0; j < J; ++j) {
        const double ua = u.values[static_cast<std::size_t>(j)];
        const double ub = u.values[static_cast<std::size_t>(j) + 1];
        const double va = v.values[static_cast<std::size_t>(j)];
        const double vb = v.values[static_cast<std::size_t>(j) + 1];
        sum += h6 * (2.0 * ua * va + ua * vb + ub * va + 2.0 * ub * vb);
    }
    return sum;
}

double lumped_norm(const FEFunction& u) {
    return std::sqrt(lumped_inner(u, u));
}

double l2_norm(const FEFunction& u) {
    return std::sqrt(std::max(0.0, l2_inner(u, u)));
}

CellField gradient_cellwise(const FEFunction& v) {
    const int J = v.cells();
    CellField grad;
    grad.mesh = v.mesh;
    grad.values.resize(static_cast<std::size_t>(J));
    const double inv_h = 1.0 / v.mesh->h;
    for (int j = 1; j <= J; ++j) {
        grad.values[static_cast<std::size_t>(j) - 1] =
            (v.values[static_cast<std::size_t>(j)] -
             v.values[static_cast<std::size_t>(j) - 1]) *
            inv_h;
    }
    return grad;
}

FEFunction discrete_laplacian(const FEFunction& v) {
    if (!v.dirichlet) {
        throw std::invalid_argument(
            "discrete_laplacian: input must be dirichlet");
    }
    const int J = v.cells();
    const double inv_h2 = 1.0 / (v.mesh->h * v.mesh->h);
    std::vector<double> out(v.values.size(), 0.0);
    for (int j = 1; j < J; ++j) {
        out[static_cast<std::size_t>(j)] =
            (v.values[static_cast<std::size_t>(j) + 1] -
             2.0 * v.values[static_cast<std::size_t>(j)] +
             v.values[static_cast<std::size_t>(j) - 1]) *
            inv_h2;
    }
    return FEFunction(v.mesh, std::move(out), true);
}

FEFunction lumped_projection(const std::function<double(double)>& w,
                             MeshPtr mesh) {
    // Gauss-Legendre on [-1,1], 3 points.
    static constexpr double gp[3] = {-0.7745966692414834, 0.0,
                                     0.7745966692414834};
    static constexpr double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

    const int J = mesh->cell_count;
    const double h = mesh->h;
    std::vector<double> vals(mesh->nodes.size(), 0.0);
    // Accumulate int w*phi_j cell by cell; phi_j is the rising hat on T_j
    // and the falling hat on T_{j+1}.
    for (int c = 0; c < J; ++c) {
        const double xa = mesh->nodes[static_cast<std::size_t>(c)];
        const double mid = xa + 0.5 * h;
        for (int q = 0; q < 3; ++q) {
            const double x = mid + 0.5 * h * gp[q];
            const double weight = 0.5 * h * gw[q];
            const double t = (x - xa) / h;  // in (0,1)
            const double wx = w(x);
            vals[static_cast<std::size_t>(c)] += weight * wx * (1.0 - t);
            vals[static_cast<std::size_t>(c) + 1] += weight * wx * t;
        }
    }
    for (auto& v : vals) v /= h;
    return FEFunction(std::move(mesh), std::move(vals), true);
}

FEFunction operator+(const FEFunction& u, const FEFunction& v) {
    require_same_mesh(u, v, "operator+");
    std::vector<double> out(u.values.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = u.values[j] + v.values[j];
    }
    return FEFunction(u.mesh, std::move(out), u.dirichlet && v.dirichlet);
}

FEFunction operator-(const FEFunction& u, const FEFunction& v) {
    require_same_mesh(u, v, "operator-");
    std::vector<double> out(u.values.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = u.values[j] - v.values[j];
    }
    return FEFunction(u.mesh, std::move(out), u.dirichlet && v.dirichlet);
}

FEFunction operator*(double a, const FEFunction& u) {
    std::vector<double> out(u.values.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = a * u.values[j];
    }
    return FEFunction(u.mesh, std::move(out), u.dirichlet);
}

}  // namespace stvf
