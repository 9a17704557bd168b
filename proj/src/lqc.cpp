#include "roughctl/lqc.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <unsupported/Eigen/MatrixFunctions>

#include "roughctl/errors.hpp"
#include "roughctl/parallel.hpp"

namespace roughctl {

void AdditiveLqcSpec::validate() const {
    const Eigen::Index e = M.rows();
    require(e >= 1 && M.cols() == e, "M must be square");
    require(N.rows() == e && N.cols() >= 1, "N must have one row per state");
    require(Q.rows() == e && Q.cols() == e && G.rows() == e && G.cols() == e, "Q and G must match the state");
    require(R.rows() == N.cols() && R.cols() == N.cols(), "R must match the control");
    require(T > 0.0, "horizon must be positive");
    Eigen::JacobiSVD<Mat> svd(R);
    const auto& s = svd.singularValues();
    require(s.minCoeff() > 1e-12 * std::max(1.0, s.maxCoeff()), "R must be invertible");
}

void MultiplicativeLqcSpec::validate() const {
    require(R != 0.0, "R must be nonzero");
    require(T > 0.0, "horizon must be positive");
}

namespace {

std::size_t locate(const TimeGrid& grid, double t) {
    const double tol = 1e-12 * std::max(1.0, std::abs(grid.horizon()));
    if (t < grid.start() - tol || t > grid.horizon() + tol) throw std::invalid_argument("time outside the Riccati horizon");
    const auto times = grid.times();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t i = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
    return std::min(i, grid.steps() - 1);
}

using Rhs = std::function<Mat(const Mat&)>;

// Backward RK4 on (P, I) with I' = -Tr P.
RiccatiSolution integrate_backward(const Mat& terminal, const Rhs& rhs, double horizon, std::size_t n_steps, double cap,
                                   bool with_trace) {
    require(n_steps >= 1, "Riccati solve needs at least one step");
    TimeGrid grid = make_uniform_grid(horizon, n_steps);
    std::vector<Mat> P(n_steps + 1);
    std::vector<double> trace(n_steps + 1, 0.0);
    P[n_steps] = terminal;
    for (std::size_t k = n_steps; k-- > 0;) {
        const double h = -grid.dt(k);
        const Mat& p = P[k + 1];
        const Mat k1 = rhs(p);
        const Mat p2 = p + 0.5 * h * k1;
        const Mat k2 = rhs(p2);
        const Mat p3 = p + 0.5 * h * k2;
        const Mat k3 = rhs(p3);
        const Mat p4 = p + h * k3;
        const Mat k4 = rhs(p4);
        Mat next = p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        next = 0.5 * (next + next.transpose()).eval();
        if (!next.allFinite() || next.norm() > cap) throw FiniteEscape("Riccati solution exceeded its norm cap");
        if (with_trace) {
            trace[k] = trace[k + 1] - h / 6.0 * (p.trace() + 2.0 * p2.trace() + 2.0 * p3.trace() + p4.trace());
        }
        P[k] = std::move(next);
    }
    return RiccatiSolution{std::move(grid), std::move(P), std::move(trace)};
}

}  // namespace

Mat RiccatiSolution::at(double t) const {
    const std::size_t i = locate(grid, t);
    const double w = std::clamp((t - grid[i]) / grid.dt(i), 0.0, 1.0);
    if (w == 0.0) return P[i];
    if (w == 1.0) return P[i + 1];
    return (1.0 - w) * P[i] + w * P[i + 1];
}

double RiccatiSolution::trace_integral_at(double t) const {
    const std::size_t i = locate(grid, t);
    const double w = std::clamp((t - grid[i]) / grid.dt(i), 0.0, 1.0);
    if (w == 0.0) return trace_integral[i];
    if (w == 1.0) return trace_integral[i + 1];
    return (1.0 - w) * trace_integral[i] + w * trace_integral[i + 1];
}

RiccatiSolution riccati_solve_additive(const AdditiveLqcSpec& spec, std::size_t n_steps, double cap) {
    spec.validate();
    const Mat gain = spec.N * spec.R.inverse() * spec.N.transpose();
    auto rhs = [&](const Mat& P) -> Mat {
        return -P * spec.M - spec.M.transpose() * P + P * gain * P - spec.Q;
    };
    return integrate_backward(spec.G, rhs, spec.T, n_steps, cap, true);
}

RiccatiSolution riccati_solve_multiplicative(const MultiplicativeLqcSpec& spec, std::size_t n_steps, double cap) {
    spec.validate();
    auto rhs = [&](const Mat& Pm) -> Mat {
        const double p = Pm(0, 0);
        return Mat::Constant(1, 1, -(2.0 * p * spec.M + 2.0 * p * spec.C * spec.C + spec.Q - spec.N * spec.N * p * p / spec.R));
    };
    return integrate_backward(Mat::Constant(1, 1, spec.G), rhs, spec.T, n_steps, cap, false);
}

double lqc_additive_value(const RiccatiSolution& sol, double t, const Vec& x) {
    const Mat P = sol.at(t);
    require(P.rows() == x.size(), "state dimension does not match P");
    return 0.5 * x.dot(P * x) + 0.5 * sol.trace_integral_at(t);
}

Vec lqc_additive_feedback(const AdditiveLqcSpec& spec, const RiccatiSolution& sol, double t, const Vec& x) {
    return -spec.R.inverse() * spec.N.transpose() * (sol.at(t) * x);
}

double lqc_multiplicative_value(const RiccatiSolution& sol, double t, double x) { return 0.5 * sol.scalar_at(t) * x * x; }

double lqc_multiplicative_feedback(const MultiplicativeLqcSpec& spec, const RiccatiSolution& sol, double t, double x) {
    return -spec.N * sol.scalar_at(t) * x / spec.R;
}

std::vector<Mat> riccati_on_grid(const RiccatiSolution& sol, const TimeGrid& grid) {
    std::vector<Mat> out;
    out.reserve(grid.steps() + 1);
    for (double t : grid.times()) out.push_back(sol.at(t));
    return out;
}

std::vector<Vec> lambda1_additive(const AdditiveLqcSpec& spec, const RiccatiSolution& sol, const GridRoughPath& eta) {
    spec.validate();
    require(eta.dim() == spec.state_dim(), "driver dimension must equal the state dimension");
    const std::vector<Mat> P = riccati_on_grid(sol, eta.grid());
    const std::size_t n = eta.steps();
    std::vector<Vec> out(n);
    Vec S = Vec::Zero(spec.M.rows());
    const Mat Mt = spec.M.transpose();
    double cached_dt = -1.0;
    Mat propagator;
    for (std::size_t k = n; k-- > 0;) {
        // S_k = P_k delta_k + exp(M^T dt_k) S_{k+1}
        const double dt = eta.grid().dt(k);
        if (dt != cached_dt) {
            propagator = (Mt * dt).exp();
            cached_dt = dt;
        }
        S = P[k] * eta.delta(k) + propagator * S;
        out[k] = -spec.N.transpose() * S;
    }
    return out;
}

double gammaR_additive(const AdditiveLqcSpec& spec, const RiccatiSolution& sol, const GridRoughPath& eta,
                       std::size_t start, const Vec& x) {
    spec.validate();
    require(eta.dim() == spec.state_dim(), "driver dimension must equal the state dimension");
    require(start <= eta.steps(), "start index beyond horizon");
    const std::vector<Mat> P = riccati_on_grid(sol, eta.grid());
    CompensatedSum sum;
    Vec X = x;
    for (std::size_t k = start; k < eta.steps(); ++k) {
        const auto delta = eta.delta(k);
        const auto area = eta.area(k);
        sum.add((P[k] * X).dot(delta));
        sum.add((P[k].array() * area.transpose().array()).sum());
        X = X + spec.M * X * eta.grid().dt(k) + delta;
    }
    sum.add(-0.5 * sol.trace_integral_at(eta.grid()[start]));
    return sum.value();
}

std::vector<double> gamma_propagator(const MultiplicativeLqcSpec& spec, const GridRoughPath& eta, std::size_t start) {
    require(eta.dim() == 1, "multiplicative propagator needs a scalar driver");
    require(start <= eta.steps(), "start index beyond horizon");
    std::vector<double> G;
    G.reserve(eta.steps() - start + 1);
    G.push_back(1.0);
    for (std::size_t k = start; k < eta.steps(); ++k) {
        const double phi = 1.0 + spec.M * eta.grid().dt(k) + spec.C * eta.delta(k)(0) + spec.C * spec.C * eta.area(k)(0, 0);
        const double next = G.back() * phi;
        if (!std::isfinite(next) || next == 0.0 || std::abs(next) < 1e-300) {
            throw NumericalOverflow("propagator underflow or overflow", k);
        }
        G.push_back(next);
    }
    return G;
}

std::vector<double> theta(const MultiplicativeLqcSpec& spec, const RiccatiSolution& sol, const GridRoughPath& eta,
                          std::size_t start) {
    const std::vector<double> G = gamma_propagator(spec, eta, start);
    const std::size_t n = eta.steps();
    std::vector<double> out(n - start + 1, 0.0);
    double suffix = 0.0;
    for (std::size_t k = n; k-- > start;) {
        const double pk = sol.scalar_at(eta.grid()[k]);
        const double w = eta.delta(k)(0) + 2.0 * spec.C * eta.area(k)(0, 0) - spec.C * eta.grid().dt(k);
        const double gk = G[k - start];
        suffix += pk * gk * gk * w;
        out[k - start] = suffix / (gk * gk);
    }
    return out;
}

double z1_multiplicative(const MultiplicativeLqcSpec& spec, const RiccatiSolution& sol, const GridRoughPath& eta,
                         std::size_t start, double x, const ControlPath& mu) {
    require(mu.grid == eta.grid() && mu.values.size() == eta.steps(), "control and driver must share a grid");
    const std::vector<double> th = theta(spec, sol, eta, start);
    CompensatedSum sum;
    double X = x;
    for (std::size_t k = start; k < eta.steps(); ++k) {
        const double dt = eta.grid().dt(k);
        const double u = mu.values[k](0);
        sum.add(X * th[k - start] * u * dt);
        const double phi = 1.0 + spec.M * dt + spec.C * eta.delta(k)(0) + spec.C * spec.C * eta.area(k)(0, 0);
        X = X * phi + spec.N * u * dt;
    }
    return 2.0 * spec.C * spec.N * sum.value();
}

double z2_multiplicative(const MultiplicativeLqcSpec& spec, const RiccatiSolution& sol, const GridRoughPath& eta,
                         std::size_t start, double x, const ControlPath& mu) {
    require(mu.grid == eta.grid() && mu.values.size() == eta.steps(), "control and driver must share a grid");
    const std::vector<double> G = gamma_propagator(spec, eta, start);
    const std::vector<double> th = theta(spec, sol, eta, start);
    const std::size_t n = eta.steps();
    CompensatedSum cross, quad;
    double prefix = 0.0;  // sum_{a<b} mu_a dt_a / G_{a+1}
    for (std::size_t b = start; b < n; ++b) {
        const double w = mu.values[b](0) * eta.grid().dt(b);
        const double g1 = G[b + 1 - start];
        const double t1 = th[b + 1 - start];
        cross.add(g1 * t1 * w);
        quad.add(t1 * w * (2.0 * g1 * prefix + w));
        prefix += w / g1;
    }
    return spec.C * th[0] * x * x + 2.0 * spec.C * spec.N * x * cross.value() + spec.C * spec.N * spec.N * quad.value();
}

}  // namespace roughctl
