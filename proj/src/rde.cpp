#include "roughctl/rde.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "roughctl/errors.hpp"

namespace roughctl {

double fd_step(double x) {
    static const double base = std::cbrt(std::numeric_limits<double>::epsilon());
    return base * (std::abs(x) + 1.0);
}

namespace {

double sup_norm(const Vec& x) { return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff(); }

bool area_is_zero(const Eigen::Ref<const RowMajorMat>& area) {
    for (Eigen::Index i = 0; i < area.rows(); ++i)
        for (Eigen::Index j = 0; j < area.cols(); ++j)
            if (area(i, j) != 0.0) return false;
    return true;
}

}  // namespace

void VectorFieldSet::validate() const {
    require(state_dim >= 1 && noise_dim >= 1, "vector field dimensions must be positive");
    require(static_cast<bool>(drift), "vector field set needs a drift");
    require(static_cast<bool>(diffusion), "vector field set needs a diffusion");
}

std::vector<Mat> VectorFieldSet::dsigma(const Vec& x) const {
    if (diffusion_jacobian) return diffusion_jacobian(x);
    const auto e = static_cast<Eigen::Index>(state_dim);
    std::vector<Mat> out(noise_dim, Mat::Zero(e, e));
    for (Eigen::Index c = 0; c < e; ++c) {
        const double h = fd_step(x(c));
        Vec xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        const Mat diff = (diffusion(xp) - diffusion(xm)) / (2.0 * h);
        for (std::size_t i = 0; i < noise_dim; ++i) out[i].col(c) = diff.col(static_cast<Eigen::Index>(i));
    }
    return out;
}

std::vector<Mat> VectorFieldSet::d2sigma(const Vec& x, const Vec& direction) const {
    if (diffusion_curvature) return diffusion_curvature(x, direction);
    const auto e = static_cast<Eigen::Index>(state_dim);
    const double vnorm = direction.norm();
    if (vnorm == 0.0) return std::vector<Mat>(noise_dim, Mat::Zero(e, e));
    // Nested differences need a larger outer step.
    const double base = diffusion_jacobian ? fd_step(sup_norm(x)) : 1e-4 * (sup_norm(x) + 1.0);
    const double h = base / vnorm;
    const std::vector<Mat> plus = dsigma(x + h * direction);
    const std::vector<Mat> minus = dsigma(x - h * direction);
    std::vector<Mat> out(noise_dim);
    for (std::size_t i = 0; i < noise_dim; ++i) out[i] = (plus[i] - minus[i]) / (2.0 * h);
    return out;
}

Mat VectorFieldSet::db_dx(const Vec& x, const Vec& u) const {
    if (drift_jacobian) return drift_jacobian(x, u);
    const auto e = static_cast<Eigen::Index>(state_dim);
    Mat out(e, e);
    for (Eigen::Index c = 0; c < e; ++c) {
        const double h = fd_step(x(c));
        Vec xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        out.col(c) = (drift(xp, u) - drift(xm, u)) / (2.0 * h);
    }
    return out;
}

Mat VectorFieldSet::db_du(const Vec& x, const Vec& u) const {
    if (drift_control_jacobian) return drift_control_jacobian(x, u);
    Mat out(static_cast<Eigen::Index>(state_dim), u.size());
    for (Eigen::Index c = 0; c < u.size(); ++c) {
        const double h = fd_step(u(c));
        Vec up = u, um = u;
        up(c) += h;
        um(c) -= h;
        out.col(c) = (drift(x, up) - drift(x, um)) / (2.0 * h);
    }
    return out;
}

Vec VectorFieldSet::second_order_noise(const Vec& x, const Mat& sigma, const Eigen::Ref<const RowMajorMat>& area) const {
    Vec out = Vec::Zero(static_cast<Eigen::Index>(state_dim));
    if (area_is_zero(area)) return out;
    const std::vector<Mat> jac = dsigma(x);
    for (std::size_t j = 0; j < noise_dim; ++j) {
        for (std::size_t i = 0; i < noise_dim; ++i) {
            const double a = area(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (a != 0.0) out += a * (jac[j] * sigma.col(static_cast<Eigen::Index>(i)));
        }
    }
    return out;
}

ControlPath ControlPath::constant(const TimeGrid& grid, const Vec& u) {
    return ControlPath{grid, std::vector<Vec>(grid.steps(), u)};
}

Vec davie_step(const Vec& y, const VectorFieldSet& vf, const Vec& u, const Eigen::Ref<const Vec>& delta,
               const Eigen::Ref<const RowMajorMat>& area, double dt, std::size_t step_index) {
    require(dt > 0.0, "step length must be positive");
    const Mat sigma = vf.diffusion(y);
    Vec next = y + vf.drift(y, u) * dt + sigma * delta + vf.second_order_noise(y, sigma, area);
    if (!next.allFinite()) throw NumericalOverflow("non-finite state in RDE step", step_index);
    return next;
}

namespace {

void check_shared_grid(const ControlPath& mu, const GridRoughPath& eta, std::size_t start) {
    require(mu.grid == eta.grid(), "control and driver must share a grid");
    require(mu.values.size() == eta.steps(), "control needs one value per interval");
    require(start <= eta.steps(), "start index beyond horizon");
}

}  // namespace

RdeSolution solve_controlled_rde(const Vec& x0, std::size_t start, const VectorFieldSet& vf, const ControlPath& mu,
                                 const GridRoughPath& eta) {
    check_shared_grid(mu, eta, start);
    require(static_cast<std::size_t>(x0.size()) == vf.state_dim, "initial state has wrong dimension");
    require(eta.dim() == vf.noise_dim, "driver dimension does not match diffusion");
    RdeSolution sol{eta.grid(), start, {}, {}};
    sol.states.reserve(eta.steps() - start + 1);
    sol.states.push_back(x0);
    for (std::size_t k = start; k < eta.steps(); ++k) {
        sol.states.push_back(davie_step(sol.states.back(), vf, mu.values[k], eta.delta(k), eta.area(k), eta.grid().dt(k), k));
    }
    return sol;
}

RdeSolution solve_closed_loop(const Vec& x0, std::size_t start, const VectorFieldSet& vf,
                              const std::function<Vec(double, const Vec&)>& policy, const GridRoughPath& eta,
                              ControlPath* realized) {
    require(start <= eta.steps(), "start index beyond horizon");
    require(eta.dim() == vf.noise_dim, "driver dimension does not match diffusion");
    RdeSolution sol{eta.grid(), start, {}, {}};
    sol.states.reserve(eta.steps() - start + 1);
    sol.states.push_back(x0);
    if (realized) {
        *realized = ControlPath{eta.grid(), std::vector<Vec>(eta.steps(), Vec::Zero(static_cast<Eigen::Index>(vf.control_dim)))};
    }
    for (std::size_t k = start; k < eta.steps(); ++k) {
        const Vec u = policy(eta.grid()[k], sol.states.back());
        if (realized) realized->values[k] = u;
        sol.states.push_back(davie_step(sol.states.back(), vf, u, eta.delta(k), eta.area(k), eta.grid().dt(k), k));
    }
    return sol;
}

Mat linearized_step_matrix(const Vec& x, const Vec& u, const VectorFieldSet& vf, const Eigen::Ref<const Vec>& delta,
                           const Eigen::Ref<const RowMajorMat>& area, double dt) {
    const auto e = static_cast<Eigen::Index>(vf.state_dim);
    Mat phi = Mat::Identity(e, e) + vf.db_dx(x, u) * dt;
    const std::vector<Mat> jac = vf.dsigma(x);
    for (std::size_t i = 0; i < vf.noise_dim; ++i) phi += delta(static_cast<Eigen::Index>(i)) * jac[i];
    if (area_is_zero(area)) return phi;
    const Mat sigma = vf.diffusion(x);
    for (std::size_t i = 0; i < vf.noise_dim; ++i) {
        // D(D sigma_j)[sigma_i] for all j
        const std::vector<Mat> curv = vf.d2sigma(x, sigma.col(static_cast<Eigen::Index>(i)));
        for (std::size_t j = 0; j < vf.noise_dim; ++j) {
            const double a = area(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (a != 0.0) phi += a * (jac[j] * jac[i] + curv[j]);
        }
    }
    return phi;
}

std::vector<Vec> solve_adjoint_backward(const Vec& pT, const RdeSolution& traj, const ControlPath& mu,
                                        const VectorFieldSet& vf,
                                        const std::function<Vec(std::size_t, const Vec&, const Vec&)>& df,
                                        const GridRoughPath& eta) {
    check_shared_grid(mu, eta, traj.start);
    require(traj.grid == eta.grid(), "trajectory and driver must share a grid");
    require(pT.allFinite(), "terminal adjoint must be finite");
    const std::size_t n = eta.steps();
    std::vector<Vec> p(n - traj.start + 1);
    p.back() = pT;
    for (std::size_t k = n; k-- > traj.start;) {
        const Vec& x = traj.at(k);
        const double dt = eta.grid().dt(k);
        const Mat phi = linearized_step_matrix(x, mu.values[k], vf, eta.delta(k), eta.area(k), dt);
        Vec next = phi.transpose() * p[k + 1 - traj.start];
        if (df) next += df(k, x, mu.values[k]) * dt;
        if (!next.allFinite()) throw NumericalOverflow("non-finite adjoint", k);
        p[k - traj.start] = std::move(next);
    }
    return p;
}

std::vector<Vec> solve_linearized(const Vec& y0, const RdeSolution& traj, const ControlPath& mu,
                                  const VectorFieldSet& vf, const std::function<Vec(std::size_t)>& forcing,
                                  const GridRoughPath& eta) {
    check_shared_grid(mu, eta, traj.start);
    const std::size_t n = eta.steps();
    std::vector<Vec> y;
    y.reserve(n - traj.start + 1);
    y.push_back(y0);
    for (std::size_t k = traj.start; k < n; ++k) {
        const double dt = eta.grid().dt(k);
        const Mat phi = linearized_step_matrix(traj.at(k), mu.values[k], vf, eta.delta(k), eta.area(k), dt);
        Vec next = phi * y.back();
        if (forcing) next += forcing(k) * dt;
        if (!next.allFinite()) throw NumericalOverflow("non-finite linearized state", k);
        y.push_back(std::move(next));
    }
    return y;
}

}  // namespace roughctl
