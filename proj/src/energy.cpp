#include "stvf/energy.hpp"

#include <cmath>
#include <stdexcept>

namespace stvf {

EnergyParams::EnergyParams(double eps, double lam, FEFunction data)
    : epsilon(eps), lambda(lam), g(std::move(data)) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw std::invalid_argument("EnergyParams: epsilon must be in [0,1]");
    }
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("EnergyParams: lambda must be >= 0");
    }
}

double flux(double s, double epsilon) {
    if (epsilon == 0.0) {
        if (s == 0.0) return 0.0;  // subgradient selection
        return s > 0.0 ? 1.0 : -1.0;
    }
    return s / std::sqrt(s * s + epsilon * epsilon);
}

double flux_derivative(double s, double epsilon) {
    const double q = s * s + epsilon * epsilon;
    return epsilon * epsilon / (q * std::sqrt(q));
}

namespace {

double fidelity(const FEFunction& v, const EnergyParams& p) {
    if (p.lambda == 0.0) return 0.0;  // g intentionally ignored
    if (!same_mesh(v, p.g)) {
        throw std::invalid_argument("energy: data term g on a different mesh");
    }
    const FEFunction diff = v - p.g;
    return 0.5 * p.lambda * l2_inner(diff, diff);
}

}  // namespace

double energy_reg(const FEFunction& v, const EnergyParams& p) {
    const int J = v.cells();
    const double h = v.mesh->h;
    const double e2 = p.epsilon * p.epsilon;
    double tv = 0.0;
    for (int j = 1; j <= J; ++j) {
        const double d = (v.values[static_cast<std::size_t>(j)] -
                          v.values[static_cast<std::size_t>(j) - 1]) /
                         h;
        tv += h * std::sqrt(d * d + e2);
    }
    return tv + fidelity(v, p);
}

double energy_tv(const FEFunction& v, const EnergyParams& p) {
    const int J = v.cells();
    double tv = 0.0;
    for (int j = 1; j <= J; ++j) {
        tv += std::abs(v.values[static_cast<std::size_t>(j)] -
                       v.values[static_cast<std::size_t>(j) - 1]);
    }
    return tv + fidelity(v, p);
}

double energy_bar(const FEFunction& v, const EnergyParams& p,
                  bool regularized) {
    const double interior = regularized ? energy_reg(v, p) : energy_tv(v, p);
    return interior + std::abs(v.values.front()) + std::abs(v.values.back());
}

double lemma_pairing(const FEFunction& v, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("lemma_pairing: epsilon must be > 0");
    }
    const int J = v.cells();
    const double h = v.mesh->h;
    double sum = 0.0;
    double d_prev = (v.values[1] - v.values[0]) / h;
    double f_prev = flux(d_prev, epsilon);
    for (int j = 1; j < J; ++j) {
        const double d_next = (v.values[static_cast<std::size_t>(j) + 1] -
                               v.values[static_cast<std::size_t>(j)]) /
                              h;
        const double f_next = flux(d_next, epsilon);
        sum += (f_next - f_prev) * (d_next - d_prev);
        d_prev = d_next;
        f_prev = f_next;
    }
    return sum / h;
}

}  // namespace stvf
