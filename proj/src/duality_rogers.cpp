#include <cmath>
#include <limits>
#include <memory>

#include "roughctl/duality.hpp"
#include "roughctl/errors.hpp"

namespace roughctl {

double RogersPenalty::time_derivative(double t, const Vec& x) const {
    if (h_t) return h_t(t, x);
    const double dt = fd_step(t);
    return (h(t + dt, x) - h(t - dt, x)) / (2.0 * dt);
}

Vec RogersPenalty::gradient(double t, const Vec& x) const {
    if (grad) return grad(t, x);
    Vec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double s = fd_step(x(i));
        Vec xp = x, xm = x;
        xp(i) += s;
        xm(i) -= s;
        out(i) = (h(t, xp) - h(t, xm)) / (2.0 * s);
    }
    return out;
}

Mat RogersPenalty::hessian(double t, const Vec& x) const {
    if (hess) return hess(t, x);
    const Eigen::Index e = x.size();
    Mat out(e, e);
    const double base = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
    for (Eigen::Index i = 0; i < e; ++i) {
        for (Eigen::Index j = i; j < e; ++j) {
            const double si = base * (std::abs(x(i)) + 1.0), sj = base * (std::abs(x(j)) + 1.0);
            auto at = [&](double a, double b) {
                Vec y = x;
                y(i) += a;
                y(j) += b;
                return h(t, y);
            };
            double v;
            if (i == j) {
                v = (at(si, 0.0) - 2.0 * h(t, x) + at(-si, 0.0)) / (si * si);
            } else {
                v = (at(si, sj) - at(si, -sj) - at(-si, sj) + at(-si, -sj)) / (4.0 * si * sj);
            }
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

std::string describe(const Penalty& penalty) {
    struct {
        std::string operator()(const ZeroPenalty&) const { return "zero"; }
        std::string operator()(const RogersPenalty&) const { return "rogers"; }
        std::string operator()(const DavisBursteinPenalty& p) const {
            return p.running_cost ? "davis-burstein(running)" : "davis-burstein";
        }
        std::string operator()(const CustomPenalty& p) const { return p.name; }
    } visitor;
    return std::visit(visitor, penalty);
}

namespace {

// b~ = b + 1/2 sum_i D sigma_i sigma_i
Vec corrected_drift(const VectorFieldSet& vf, const Vec& x, const Vec& u, const Mat& sigma, const std::vector<Mat>& jac) {
    Vec b = vf.drift(x, u);
    for (std::size_t i = 0; i < vf.noise_dim; ++i) b += 0.5 * jac[i] * sigma.col(static_cast<Eigen::Index>(i));
    return b;
}

double generator(const RogersPenalty& h, const VectorFieldSet& vf, double t, const Vec& x, const Vec& u) {
    const Mat sigma = vf.diffusion(x);
    const std::vector<Mat> jac = vf.dsigma(x);
    const Vec grad = h.gradient(t, x);
    const Mat hess = h.hessian(t, x);
    return h.time_derivative(t, x) + corrected_drift(vf, x, u, sigma, jac).dot(grad) +
           0.5 * (sigma * sigma.transpose() * hess).trace();
}

}  // namespace

ControlProblem rogers_transform(const RogersPenalty& h, const ControlProblem& problem, double t0, const Vec& x0,
                                double horizon) {
    require(static_cast<bool>(h.h), "Rogers penalty needs h");
    problem.validate();
    auto base = std::make_shared<const ControlProblem>(problem);
    auto hp = std::make_shared<const RogersPenalty>(h);
    const double anchor = h.value(t0, x0);

    ControlProblem out = problem;
    out.additive.reset();
    out.df = nullptr;
    out.f = [base, hp](double t, const Vec& x, const Vec& u) {
        return base->running(t, x, u) + generator(*hp, base->vf, t, x, u);
    };
    out.g = [base, hp, anchor, horizon](const Vec& x) { return base->g(x) - hp->value(horizon, x) + anchor; };
    out.dg = [base, hp, horizon](const Vec& x) -> Vec { return base->grad_g(x) - hp->gradient(horizon, x); };
    return out;
}

RogersValue rogers_penalty_value(const RogersPenalty& h, const RdeSolution& traj, const ControlPath& mu,
                                 const GridRoughPath& eta, const ControlProblem& problem) {
    require(traj.grid == eta.grid() && mu.grid == eta.grid(), "trajectory, control and driver must share a grid");
    require(static_cast<bool>(h.h), "Rogers penalty needs h");
    const VectorFieldSet& vf = problem.vf;
    const TimeGrid& grid = eta.grid();
    const std::size_t d = vf.noise_dim;
    CompensatedSum drift_part, integral;
    for (std::size_t k = traj.start; k < grid.steps(); ++k) {
        const double t = grid[k], dt = grid.dt(k);
        const Vec& x = traj.at(k);
        const Vec& u = mu.values[k];
        const Mat sigma = vf.diffusion(x);
        const std::vector<Mat> jac = vf.dsigma(x);
        const Vec grad = h.gradient(t, x);
        const Mat hess = h.hessian(t, x);
        const double half_trace = 0.5 * (sigma * sigma.transpose() * hess).trace();
        const Vec btilde = corrected_drift(vf, x, u, sigma, jac);
        drift_part.add((h.time_derivative(t, x) + btilde.dot(grad) + half_trace) * dt);

        const auto delta = eta.delta(k);
        const auto area = eta.area(k);
        for (std::size_t i = 0; i < d; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const Vec si = sigma.col(ii);
            integral.add(grad.dot(si) * delta(ii));
            // D phi_i = D^2h sigma_i + D sigma_i^T Dh
            const Vec dphi = hess * si + jac[i].transpose() * grad;
            for (std::size_t j = 0; j < d; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                integral.add(dphi.dot(sigma.col(jj)) * area(jj, ii));
            }
        }
        integral.add(((vf.drift(x, u) - btilde).dot(grad) - half_trace) * dt);
    }
    RogersValue out;
    const double t0 = grid[traj.start];
    out.increment = h.value(grid.horizon(), traj.terminal()) - h.value(t0, traj.states.front()) - drift_part.value();
    out.integral = integral.value();
    out.difference = out.increment - out.integral;
    return out;
}

}  // namespace roughctl
