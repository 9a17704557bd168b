#include <algorithm>
#include <cmath>

#include "roughctl/control.hpp"
#include "roughctl/errors.hpp"

namespace roughctl {

namespace {

std::vector<Vec> adjoint_along(const ControlProblem& problem, const RdeSolution& traj, const ControlPath& mu,
                               const GridRoughPath& eta) {
    auto df = [&](std::size_t k, const Vec& x, const Vec& u) { return problem.grad_f(eta.grid()[k], x, u); };
    return solve_adjoint_backward(problem.grad_g(traj.terminal()), traj, mu, problem.vf, df, eta);
}

double sup_diff(const RdeSolution& a, const RdeSolution& b, const std::vector<Vec>* minus = nullptr) {
    double out = 0.0;
    for (std::size_t i = 0; i < a.states.size(); ++i) {
        Vec diff = a.states[i] - b.states[i];
        if (minus) diff -= (*minus)[i];
        out = std::max(out, diff.cwiseAbs().maxCoeff());
    }
    return out;
}

}  // namespace

std::vector<double> pmp_hamiltonian_residual(const ControlProblem& problem, const PathwiseResult& candidate,
                                             const GridRoughPath& eta) {
    const RdeSolution& traj = candidate.trajectory;
    const ControlPath& mu = candidate.control;
    require(traj.grid == eta.grid() && mu.grid == eta.grid(), "candidate must live on the driver grid");
    const std::vector<Vec> p = adjoint_along(problem, traj, mu, eta);
    std::vector<double> residual;
    residual.reserve(eta.steps() - traj.start);
    for (std::size_t k = traj.start; k < eta.steps(); ++k) {
        const Vec& x = traj.at(k);
        const Vec& pk = p[k - traj.start];
        const double t = eta.grid()[k];
        auto ham = [&](const Vec& u) { return problem.vf.drift(x, u).dot(pk) + problem.running(t, x, u); };
        const double current = ham(mu.values[k]);
        double best = current;
        for (const Vec& u : problem.controls.points) best = std::max(best, ham(u));
        residual.push_back(best - current);
    }
    return residual;
}

std::vector<SpikeRow> spike_variation_check(const ControlProblem& problem, const PathwiseResult& candidate,
                                            const Vec& alt_u, double t_spike, const std::vector<double>& eps_list,
                                            const GridRoughPath& eta) {
    const RdeSolution& cand = candidate.trajectory;
    const ControlPath& mu = candidate.control;
    require(cand.grid == eta.grid() && mu.grid == eta.grid(), "candidate must live on the driver grid");
    const TimeGrid& grid = eta.grid();
    const std::size_t ks = grid.index_of(t_spike);
    require(ks >= cand.start && ks < grid.steps(), "spike time outside the candidate horizon");

    const Vec x0 = cand.states.front();
    const RdeSolution base = solve_controlled_rde(x0, cand.start, problem.vf, mu, eta);
    const double j_base = payoff_along(problem, mu, base);
    const Vec dg = problem.grad_g(base.terminal());

    std::vector<SpikeRow> rows;
    for (double eps : eps_list) {
        require(eps > 0.0, "spike width must be positive");
        require(t_spike + eps <= grid.horizon() + 1e-12 * std::max(1.0, grid.horizon()), "spike exceeds the horizon");
        std::size_t ke = ks;
        while (ke < grid.steps() && grid[ke] < t_spike + eps - 1e-9 * grid.dt(ke)) ++ke;
        require(ke > ks, "spike narrower than one grid interval");

        ControlPath spiked = mu;
        for (std::size_t k = ks; k < ke; ++k) spiked.values[k] = alt_u;
        const RdeSolution pert = solve_controlled_rde(x0, cand.start, problem.vf, spiked, eta);

        auto forcing = [&](std::size_t k) -> Vec {
            const Vec& x = base.at(k);
            if (k < ks || k >= ke) return Vec::Zero(x.size());
            return problem.vf.drift(x, alt_u) - problem.vf.drift(x, mu.values[k]);
        };
        const std::vector<Vec> y = solve_linearized(Vec::Zero(x0.size()), base, mu, problem.vf, forcing, eta);

        double first = dg.dot(y.back());
        for (std::size_t k = cand.start; k < grid.steps(); ++k) {
            const Vec& x = base.at(k);
            const double t = grid[k];
            double term = problem.grad_f(t, x, mu.values[k]).dot(y[k - cand.start]);
            if (k >= ks && k < ke) term += problem.running(t, x, alt_u) - problem.running(t, x, mu.values[k]);
            first += term * grid.dt(k);
        }
        SpikeRow row;
        row.eps = grid[ke] - grid[ks];
        row.state_diff = sup_diff(pert, base);
        row.remainder = sup_diff(pert, base, &y);
        row.payoff_error = std::abs(payoff_along(problem, spiked, pert) - j_base - first);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace roughctl
