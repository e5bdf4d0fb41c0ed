#include "stvf/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

namespace stvf {

namespace {

// Both the per-step functional and the stationary energy have the form
//   E(u) = quad_weight * 1/2 ||u||_h^2 - <b, u>_h
//        + tv_weight * int sqrt(|u'|^2 + eps^2) + fid_weight/2 ||u - g||_h^2
// over the interior unknowns. The gradient is the nodal residual and the
// Hessian is symmetric tridiagonal and positive definite.
struct Objective {
    int J;
    double h;
    double eps;
    double quad_weight;           // 1 for a step, 0 for the stationary energy
    double tv_weight;             // tau for a step, 1 for the stationary energy
    double fid_weight;            // tau*lambda resp. lambda; 0 disables g
    const double* b = nullptr;    // interior datum, length J-1 (may be null)
    const double* g = nullptr;    // interior data term, length J-1

    int m() const { return J - 1; }

    // u: interior values, length m. d: cell gradients workspace, length J.
    void gradients(const double* u, double* d) const {
        const double inv_h = 1.0 / h;
        d[0] = u[0] * inv_h;
        for (int c = 1; c < J - 1; ++c) d[c] = (u[c] - u[c - 1]) * inv_h;
        d[J - 1] = -u[J - 2] * inv_h;
    }

    double value(const double* u, double* d) const {
        gradients(u, d);
        const double e2 = eps * eps;
        double tv = 0.0;
        for (int c = 0; c < J; ++c) tv += std::sqrt(d[c] * d[c] + e2);
        double val = tv_weight * h * tv;
        for (int j = 0; j < m(); ++j) {
            double s = 0.5 * quad_weight * u[j] * u[j];
            if (b) s -= b[j] * u[j];
            if (fid_weight != 0.0) {
                const double w = u[j] - (g ? g[j] : 0.0);
                s += 0.5 * fid_weight * w * w;
            }
            val += h * s;
        }
        return val;
    }

    // Nodal residual R_j = dE/du_j; returns the infinity norm.
    double gradient(const double* u, double* d, double* r) const {
        gradients(u, d);
        double norm = 0.0;
        double f_prev = flux(d[0], eps);
        for (int j = 0; j < m(); ++j) {
            const double f_next = flux(d[j + 1], eps);
            double rj = tv_weight * (f_prev - f_next) +
                        h * quad_weight * u[j];
            if (b) rj -= h * b[j];
            if (fid_weight != 0.0) {
                rj += h * fid_weight * (u[j] - (g ? g[j] : 0.0));
            }
            r[j] = rj;
            norm = std::max(norm, std::abs(rj));
            f_prev = f_next;
        }
        return norm;
    }

    // Tridiagonal Hessian: diag length m, lower length m-1 (d is cell
    // gradients computed by gradient()).
    void hessian(const double* d, double* diag, double* lower) const {
        const double w = tv_weight / h;
        double fp_prev = flux_derivative(d[0], eps);
        for (int j = 0; j < m(); ++j) {
            const double fp_next = flux_derivative(d[j + 1], eps);
            diag[j] = h * (quad_weight + fid_weight) + w * (fp_prev + fp_next);
            if (j + 1 < m()) lower[j] = -w * fp_next;
            fp_prev = fp_next;
        }
    }
};

// Thomas solve for a symmetric positive definite tridiagonal system.
// diag/rhs are modified in place; solution lands in rhs.
void solve_tridiag(int m, double* diag, const double* lower, double* rhs) {
    for (int j = 1; j < m; ++j) {
        const double w = lower[j - 1] / diag[j - 1];
        diag[j] -= w * lower[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    rhs[m - 1] /= diag[m - 1];
    for (int j = m - 2; j >= 0; --j) {
        rhs[j] = (rhs[j] - lower[j] * rhs[j + 1]) / diag[j];
    }
}

struct Workspace {
    std::vector<double> u, d, r, diag, lower, trial, u_prev, v, best;

    void resize(int J) {
        const std::size_t m = static_cast<std::size_t>(J - 1);
        u.resize(m);
        d.resize(static_cast<std::size_t>(J));
        r.resize(m);
        diag.resize(m);
        lower.resize(m > 0 ? m - 1 : 0);
        trial.resize(m);
        u_prev.resize(m);
        v.resize(m);
        best.resize(m);
    }
};

// Accelerated gradient descent: Nesterov momentum with a fixed step 1/L
// from a Gershgorin bound on the Hessian, and the gradient-based adaptive
// restart of O'Donoghue-Candes. Deliberately uses no objective values
// anywhere: comparisons of F in doubles bottom out at a residual floor of
// sqrt(eps_mach * L * |F|) (observed ~1e-7), far above the tolerances the
// oracle must certify, while gradients evaluate to ~1e-15 absolute.
// Converges linearly on these strongly convex objectives; used as the
// independent oracle and as the fallback when Newton stalls.
bool accelerated_gradient(const Objective& obj, Workspace& ws, double tol,
                          long max_iter, double* residual_out,
                          long* iters_out) {
    const int m = obj.m();
    std::vector<double>& x = ws.u;
    std::vector<double>& y = ws.v;
    std::vector<double>& x_old = ws.u_prev;
    y = x;
    x_old = x;
    // lambda_max(H) <= h(q + fid) + 4 (tv/h) max f' with max f' = 1/eps.
    const double L = (obj.quad_weight + obj.fid_weight) * obj.h +
                     4.0 * obj.tv_weight / (obj.h * obj.eps);
    double t_momentum = 1.0;
    double res = obj.gradient(x.data(), ws.d.data(), ws.r.data());
    // Track the best iterate seen; near the representable floor the
    // residual jitters by ulp-scale movements, so exit once a long window
    // passes without meaningful contraction and report the best.
    double best_res = res;
    ws.best = x;
    long last_progress = 0;
    long it = 0;
    for (; it < max_iter && res > tol; ++it) {
        obj.gradient(y.data(), ws.d.data(), ws.r.data());
        for (int j = 0; j < m; ++j) ws.trial[j] = y[j] - ws.r[j] / L;
        // Restart test: the new displacement opposes the descent direction.
        double overshoot = 0.0;
        for (int j = 0; j < m; ++j) {
            overshoot += ws.r[j] * (ws.trial[j] - x[j]);
        }
        x_old.swap(x);
        x = ws.trial;
        if (overshoot > 0.0) {
            t_momentum = 1.0;
            y = x;
        } else {
            const double t_next =
                0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
            const double beta = (t_momentum - 1.0) / t_next;
            for (int j = 0; j < m; ++j) {
                y[j] = x[j] + beta * (x[j] - x_old[j]);
            }
            t_momentum = t_next;
        }
        res = obj.gradient(x.data(), ws.d.data(), ws.r.data());
        if (res < 0.99 * best_res) {
            best_res = res;
            ws.best = x;
            last_progress = it;
        } else if (it - last_progress > 5000) {
            break;
        }
    }
    if (best_res < res) {
        x = ws.best;
        res = best_res;
    }
    *residual_out = res;
    *iters_out = it;
    return res <= tol;
}

// Damped Newton with Armijo backtracking on the objective value. Returns
// false when it stalls before reaching tol (caller decides on fallback).
bool newton(const Objective& obj, Workspace& ws, double tol, int max_iter,
            double* residual_out, int* iters_out) {
    const int m = obj.m();
    std::vector<double>& x = ws.u;
    double fx = obj.value(x.data(), ws.d.data());
    double res = obj.gradient(x.data(), ws.d.data(), ws.r.data());
    int it = 0;
    for (; it < max_iter && res > tol; ++it) {
        obj.hessian(ws.d.data(), ws.diag.data(), ws.lower.data());
        // Newton direction: solve H p = -R (p lands in ws.v).
        for (int j = 0; j < m; ++j) ws.v[j] = -ws.r[j];
        solve_tridiag(m, ws.diag.data(), ws.lower.data(), ws.v.data());
        double descent = 0.0;
        for (int j = 0; j < m; ++j) descent += ws.r[j] * ws.v[j];
        // Armijo with an epsilon slack so full steps survive rounding noise
        // once F differences drop below double resolution.
        const double f_slack =
            16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(fx));
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (int j = 0; j < m; ++j) ws.trial[j] = x[j] + t * ws.v[j];
            const double ft = obj.value(ws.trial.data(), ws.d.data());
            if (ft <= fx + 1e-4 * t * descent + f_slack) {
                x = ws.trial;
                fx = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // Accept a full step if it still reduces the residual.
            for (int j = 0; j < m; ++j) ws.trial[j] = x[j] + ws.v[j];
            const double rtrial =
                obj.gradient(ws.trial.data(), ws.d.data(), ws.r.data());
            if (rtrial < res) {
                x = ws.trial;
            } else {
                break;  // stalled
            }
        }
        res = obj.gradient(x.data(), ws.d.data(), ws.r.data());
    }
    *residual_out = res;
    *iters_out = it;
    return res <= tol;
}

Objective make_step_objective(const SchemeParams& p) {
    Objective obj;
    obj.J = p.mesh->cell_count;
    obj.h = p.mesh->h;
    obj.eps = p.energy.epsilon;
    obj.quad_weight = 1.0;
    obj.tv_weight = p.tau;
    obj.fid_weight = p.tau * p.energy.lambda;
    return obj;
}

FEFunction interior_to_fe(const SchemeParams& p, const std::vector<double>& u) {
    std::vector<double> vals(p.mesh->nodes.size(), 0.0);
    std::copy(u.begin(), u.end(), vals.begin() + 1);
    return FEFunction(p.mesh, std::move(vals), true);
}

// Runs Newton with accelerated-gradient fallback; ws.u holds the start and
// receives the solution.
void solve_objective(const Objective& obj, const SchemeParams& p, double tol,
                     Workspace& ws, const char* what) {
    double res = 0.0;
    int iters = 0;
    if (newton(obj, ws, tol, p.solver_max_iter, &res, &iters)) return;
    long fiters = 0;
    if (accelerated_gradient(obj, ws, tol, 500000, &res, &fiters)) return;
    throw SolverFailure(std::string(what) +
                            ": no convergence (residual " +
                            std::to_string(res) + ")",
                        res, iters + static_cast<int>(fiters));
}

}  // namespace

SchemeParams make_scheme_params(MeshPtr mesh, double epsilon, double lambda,
                                double tau, int steps, FEFunction x0,
                                FEFunction g_h, double solver_tol,
                                int solver_max_iter) {
    SchemeParams p;
    p.mesh = std::move(mesh);
    p.energy = EnergyParams(epsilon, lambda, g_h);
    p.tau = tau;
    p.steps = steps;
    p.x0 = std::move(x0);
    p.g_h = std::move(g_h);
    p.solver_tol = solver_tol;
    p.solver_max_iter = solver_max_iter;
    validate_scheme_params(p);
    return p;
}

void validate_scheme_params(const SchemeParams& p) {
    if (!p.mesh) throw std::invalid_argument("SchemeParams: null mesh");
    if (!(p.tau > 0.0)) throw std::invalid_argument("SchemeParams: tau must be > 0");
    if (p.steps < 1) throw std::invalid_argument("SchemeParams: steps must be >= 1");
    if (!(p.solver_tol > 0.0)) {
        throw std::invalid_argument("SchemeParams: solver_tol must be > 0");
    }
    if (p.solver_max_iter < 1) {
        throw std::invalid_argument("SchemeParams: solver_max_iter must be >= 1");
    }
    if (!p.x0.mesh || p.x0.mesh->cell_count != p.mesh->cell_count) {
        throw std::invalid_argument("SchemeParams: x0 not on the scheme mesh");
    }
    if (!p.x0.dirichlet) {
        throw std::invalid_argument("SchemeParams: x0 must be dirichlet");
    }
    if (p.energy.lambda > 0.0) {
        if (!p.g_h.mesh || p.g_h.mesh->cell_count != p.mesh->cell_count) {
            throw std::invalid_argument("SchemeParams: g_h not on the scheme mesh");
        }
        if (!p.g_h.dirichlet) {
            throw std::invalid_argument("SchemeParams: g_h must be dirichlet");
        }
    }
}

FEFunction step(const FEFunction& prev, double dW, const SchemeParams& p) {
    validate_scheme_params(p);
    if (!(p.energy.epsilon > 0.0)) {
        throw std::invalid_argument(
            "step: epsilon = 0 is unsupported (nonsmooth step); use an "
            "epsilon sweep instead");
    }
    if (!prev.dirichlet || prev.mesh->cell_count != p.mesh->cell_count) {
        throw std::invalid_argument("step: prev must be dirichlet on the scheme mesh");
    }
    const int J = p.mesh->cell_count;
    const int m = J - 1;
    Objective obj = make_step_objective(p);

    std::vector<double> b(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        b[static_cast<std::size_t>(j)] =
            (1.0 + dW) * prev.values[static_cast<std::size_t>(j) + 1];
    }
    obj.b = b.data();
    obj.g = (obj.fid_weight != 0.0) ? p.g_h.values.data() + 1 : nullptr;

    Workspace ws;
    ws.resize(J);
    std::copy(prev.values.begin() + 1, prev.values.end() - 1, ws.u.begin());
    solve_objective(obj, p, p.solver_tol * p.mesh->h, ws, "step");
    return interior_to_fe(p, ws.u);
}

FEFunction prox_oracle(const FEFunction& b, bool dW_absorbed,
                       const SchemeParams& p) {
    (void)dW_absorbed;  // both readings feed the functional the same datum
    validate_scheme_params(p);
    if (!(p.energy.epsilon > 0.0)) {
        throw std::invalid_argument("prox_oracle: epsilon must be > 0");
    }
    if (!b.dirichlet || b.mesh->cell_count != p.mesh->cell_count) {
        throw std::invalid_argument("prox_oracle: b must be dirichlet on the scheme mesh");
    }
    const int J = p.mesh->cell_count;
    Objective obj = make_step_objective(p);
    obj.b = b.values.data() + 1;
    obj.g = (obj.fid_weight != 0.0) ? p.g_h.values.data() + 1 : nullptr;

    Workspace ws;
    ws.resize(J);
    std::copy(b.values.begin() + 1, b.values.end() - 1, ws.u.begin());
    // Aim an order of magnitude below the step tolerance; accept the step
    // tolerance itself when the target sits under the representable floor
    // (ulp-scale movements of x shift the residual by ~|H| * ulp(|x|)).
    const double tol = 0.1 * p.solver_tol * p.mesh->h;
    double res = 0.0;
    long iters = 0;
    if (!accelerated_gradient(obj, ws, tol, 500000, &res, &iters) &&
        res > p.solver_tol * p.mesh->h) {
        throw SolverFailure("prox_oracle: iteration budget exhausted (residual " +
                                std::to_string(res) + ")",
                            res, static_cast<int>(iters));
    }
    return interior_to_fe(p, ws.u);
}

PathSample solve_path(const SchemeParams& p,
                      const std::vector<double>& increments) {
    validate_scheme_params(p);
    if (increments.size() != static_cast<std::size_t>(p.steps)) {
        throw std::invalid_argument("solve_path: expected " +
                                    std::to_string(p.steps) + " increments, got " +
                                    std::to_string(increments.size()));
    }
    if (!(p.energy.epsilon > 0.0)) {
        throw std::invalid_argument("solve_path: epsilon must be > 0");
    }
    const int J = p.mesh->cell_count;
    const int m = J - 1;

    PathSample sample;
    sample.params = p;
    sample.increments = increments;
    sample.states.reserve(static_cast<std::size_t>(p.steps) + 1);
    sample.per_step_energy.reserve(static_cast<std::size_t>(p.steps) + 1);
    sample.states.push_back(p.x0);
    sample.per_step_energy.push_back(energy_reg(p.x0, p.energy));

    Objective obj = make_step_objective(p);
    obj.g = (obj.fid_weight != 0.0) ? p.g_h.values.data() + 1 : nullptr;

    Workspace ws;
    ws.resize(J);
    std::vector<double> b(static_cast<std::size_t>(m));
    std::copy(p.x0.values.begin() + 1, p.x0.values.end() - 1, ws.u.begin());

    for (int i = 1; i <= p.steps; ++i) {
        const double dW = increments[static_cast<std::size_t>(i) - 1];
        const std::vector<double>& prev = sample.states.back().values;
        for (int j = 0; j < m; ++j) {
            b[static_cast<std::size_t>(j)] =
                (1.0 + dW) * prev[static_cast<std::size_t>(j) + 1];
        }
        obj.b = b.data();
        try {
            // Warm start from the previous state (already in ws.u).
            solve_objective(obj, p, p.solver_tol * p.mesh->h, ws, "step");
        } catch (const SolverFailure& failure) {
            throw SolverFailure(std::string(failure.what()) + " at step " +
                                    std::to_string(i),
                                failure.last_residual, failure.iterations, i);
        }
        sample.states.push_back(interior_to_fe(p, ws.u));
        sample.per_step_energy.push_back(
            energy_reg(sample.states.back(), p.energy));
    }
    return sample;
}

double scheme_energy(const FEFunction& v, const SchemeParams& p) {
    EnergyParams tv_only(p.energy.epsilon, 0.0, FEFunction{});
    double val = energy_reg(v, tv_only);
    if (p.energy.lambda > 0.0) {
        const FEFunction diff = v - p.g_h;
        val += 0.5 * p.energy.lambda * lumped_inner(diff, diff);
    }
    return val;
}

FEFunction minimize_energy(const SchemeParams& p) {
    validate_scheme_params(p);
    if (!(p.energy.lambda > 0.0)) {
        throw std::invalid_argument(
            "minimize_energy: lambda must be > 0 (the TV part alone has no "
            "unique coercive minimizer)");
    }
    if (!(p.energy.epsilon > 0.0)) {
        throw std::invalid_argument("minimize_energy: epsilon must be > 0");
    }
    const int J = p.mesh->cell_count;
    Objective obj;
    obj.J = J;
    obj.h = p.mesh->h;
    obj.eps = p.energy.epsilon;
    obj.quad_weight = 0.0;
    obj.tv_weight = 1.0;
    obj.fid_weight = p.energy.lambda;
    obj.b = nullptr;
    obj.g = p.g_h.values.data() + 1;

    Workspace ws;
    ws.resize(J);
    std::copy(p.g_h.values.begin() + 1, p.g_h.values.end() - 1, ws.u.begin());
    solve_objective(obj, p, p.solver_tol * p.mesh->h, ws, "minimize_energy");
    return interior_to_fe(p, ws.u);
}

}  // namespace stvf
