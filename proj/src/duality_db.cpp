#include <algorithm>
#include <cmath>

#include "roughctl/duality.hpp"
#include "roughctl/errors.hpp"

namespace roughctl {

namespace {

using Feedback = std::function<Vec(double, const Vec&)>;

Vec grad_u_running(const ControlProblem& problem, double t, const Vec& x, const Vec& u) {
    Vec out = Vec::Zero(u.size());
    if (!problem.f) return out;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double s = fd_step(u(i));
        Vec up = u, um = u;
        up(i) += s;
        um(i) -= s;
        out(i) = (problem.f(t, x, up) - problem.f(t, x, um)) / (2.0 * s);
    }
    return out;
}

// Drift of Z and of its running component at (t, z).
struct ZDynamics {
    const ControlProblem& problem;
    const Feedback& feedback;

    Vec drift(double t, const Vec& z) const {
        const Vec u = feedback(t, z);
        return problem.vf.drift(z, u) - problem.vf.db_du(z, u) * u;
    }
    double running(double t, const Vec& z) const {
        const Vec u = feedback(t, z);
        return problem.running(t, z, u) - grad_u_running(problem, t, z, u).dot(u);
    }
    Mat drift_jacobian(double t, const Vec& z) const {
        const Eigen::Index e = z.size();
        Mat out(e, e);
        for (Eigen::Index c = 0; c < e; ++c) {
            const double s = fd_step(z(c));
            Vec zp = z, zm = z;
            zp(c) += s;
            zm(c) -= s;
            out.col(c) = (drift(t, zp) - drift(t, zm)) / (2.0 * s);
        }
        return out;
    }
    Vec running_gradient(double t, const Vec& z) const {
        Vec out(z.size());
        for (Eigen::Index c = 0; c < z.size(); ++c) {
            const double s = fd_step(z(c));
            Vec zp = z, zm = z;
            zp(c) += s;
            zm(c) -= s;
            out(c) = (running(t, zp) - running(t, zm)) / (2.0 * s);
        }
        return out;
    }
};

Vec z_step(const ZDynamics& dyn, const GridRoughPath& eta, std::size_t k, const Vec& z) {
    const Mat sigma = dyn.problem.vf.diffusion(z);
    Vec next = z + dyn.drift(eta.grid()[k], z) * eta.grid().dt(k) + sigma * eta.delta(k) +
               dyn.problem.vf.second_order_noise(z, sigma, eta.area(k));
    if (!next.allFinite()) throw NumericalOverflow("non-finite Z state", k);
    return next;
}

double terminal_W(const ControlProblem& problem, const RdeSolution& z, bool running_cost) {
    const Vec& last = z.terminal();
    if (!running_cost) return problem.g(last);
    const Eigen::Index e = last.size() - 1;
    return problem.g(last.head(e)) + last(e);
}

}  // namespace

RdeSolution db_solve_Z(const ControlProblem& problem, const Feedback& feedback, const GridRoughPath& eta,
                       std::size_t start, const Vec& x, bool running_cost) {
    require(static_cast<bool>(feedback), "Davis-Burstein penalty needs a feedback");
    require(start <= eta.steps(), "start index beyond horizon");
    require(static_cast<std::size_t>(x.size()) == problem.vf.state_dim, "initial state has wrong dimension");
    const ZDynamics dyn{problem, feedback};
    RdeSolution sol{eta.grid(), start, {}, {}};
    sol.scheme.note = "Z dynamics: davie-2 with b_u by central differences";
    Vec z = x;
    double acc = 0.0;
    auto pack = [&]() {
        if (!running_cost) return z;
        Vec s(z.size() + 1);
        s << z, acc;
        return s;
    };
    sol.states.push_back(pack());
    for (std::size_t k = start; k < eta.steps(); ++k) {
        if (running_cost) acc += dyn.running(eta.grid()[k], z) * eta.grid().dt(k);
        z = z_step(dyn, eta, k, z);
        sol.states.push_back(pack());
    }
    return sol;
}

Vec db_value_gradient(const ControlProblem& problem, const Feedback& feedback, const GridRoughPath& eta,
                      std::size_t start, const Vec& x, bool running_cost, GradientMode mode) {
    if (mode == GradientMode::FiniteDifference) {
        Vec out(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double s = fd_step(x(i));
            Vec xp = x, xm = x;
            xp(i) += s;
            xm(i) -= s;
            out(i) = (terminal_W(problem, db_solve_Z(problem, feedback, eta, start, xp, running_cost), running_cost) -
                      terminal_W(problem, db_solve_Z(problem, feedback, eta, start, xm, running_cost), running_cost)) /
                     (2.0 * s);
        }
        return out;
    }
    require(static_cast<bool>(feedback), "Davis-Burstein penalty needs a feedback");
    require(start <= eta.steps(), "start index beyond horizon");
    const ZDynamics dyn{problem, feedback};
    VectorFieldSet noise_only = problem.vf;
    noise_only.drift = [](const Vec& z, const Vec&) { return Vec::Zero(z.size()); };
    noise_only.drift_jacobian = [](const Vec& z, const Vec&) { return Mat::Zero(z.size(), z.size()); };
    const Eigen::Index e = x.size();
    const Vec u0 = Vec::Zero(static_cast<Eigen::Index>(problem.vf.control_dim));
    Mat J = Mat::Identity(e, e);
    Vec running_grad = Vec::Zero(e);
    Vec z = x;
    for (std::size_t k = start; k < eta.steps(); ++k) {
        const double t = eta.grid()[k], dt = eta.grid().dt(k);
        if (running_cost) running_grad += J.transpose() * dyn.running_gradient(t, z) * dt;
        const Mat step = linearized_step_matrix(z, u0, noise_only, eta.delta(k), eta.area(k), dt) + dyn.drift_jacobian(t, z) * dt;
        z = z_step(dyn, eta, k, z);
        J = step * J;
        if (!J.allFinite()) throw NumericalOverflow("non-finite variational flow", k);
    }
    return J.transpose() * problem.grad_g(z) + running_grad;
}

Vec db_lambda_star(const ControlProblem& problem, const Feedback& feedback, const GridRoughPath& eta,
                   std::size_t start, const Vec& x, bool running_cost, GradientMode mode) {
    const double t = eta.grid()[start];
    const Vec u = feedback(t, x);
    const Vec dw = db_value_gradient(problem, feedback, eta, start, x, running_cost, mode);
    Vec out = problem.vf.db_du(x, u).transpose() * dw;
    if (running_cost) out += grad_u_running(problem, t, x, u);
    return out;
}

double db_penalty_value(const std::function<Vec(std::size_t, const Vec&)>& lambda, const RdeSolution& traj,
                        const ControlPath& mu) {
    require(traj.grid == mu.grid, "trajectory and control must share a grid");
    CompensatedSum sum;
    for (std::size_t k = traj.start; k < traj.grid.steps(); ++k) {
        sum.add(lambda(k, traj.at(k)).dot(mu.values[k]) * traj.grid.dt(k));
    }
    return sum.value();
}

ConcavityReport concavity_check(const ControlProblem& problem, const Feedback& feedback,
                                const std::vector<GridRoughPath>& drivers, const std::vector<ProbePoint>& probes,
                                bool running_cost) {
    require(problem.controls.dim() == 1, "concavity check needs a scalar control interval");
    std::vector<double> us;
    for (const Vec& u : problem.controls.points) us.push_back(u(0));
    std::sort(us.begin(), us.end());
    us.erase(std::unique(us.begin(), us.end()), us.end());
    require(us.size() >= 3, "concavity check needs at least three control points");

    ConcavityReport rep;
    std::vector<double> phi(us.size());
    Vec u(1);
    for (const GridRoughPath& eta : drivers) {
        for (const ProbePoint& probe : probes) {
            const Vec dw = db_value_gradient(problem, feedback, eta, probe.k, probe.x, running_cost);
            double scale = 0.0;
            for (std::size_t i = 0; i < us.size(); ++i) {
                u(0) = us[i];
                phi[i] = problem.vf.drift(probe.x, u).dot(dw);
                scale = std::max(scale, std::abs(phi[i]));
            }
            const double tol = 1e-9 * (scale + 1.0);
            bool affine = true, violated = false;
            for (std::size_t i = 1; i + 1 < us.size(); ++i) {
                // Weighted midpoint test, valid for uneven spacing.
                const double w = (us[i] - us[i - 1]) / (us[i + 1] - us[i - 1]);
                const double chord = (1.0 - w) * phi[i - 1] + w * phi[i + 1];
                if (std::abs(phi[i] - chord) > tol) affine = false;
                if (phi[i] < chord - tol) violated = true;
            }
            ++rep.probes;
            if (affine) ++rep.affine;
            if (violated) ++rep.violations;
        }
    }
    rep.violation_fraction = rep.probes ? static_cast<double>(rep.violations) / static_cast<double>(rep.probes) : 0.0;
    return rep;
}

}  // namespace roughctl
