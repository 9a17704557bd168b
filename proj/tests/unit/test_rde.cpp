#include <gtest/gtest.h>

#include <cmath>

#include "roughctl/errors.hpp"
#include "roughctl/rde.hpp"

using namespace roughctl;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

// dY = a Y dt + c Y d eta: for geometric drivers Y_t = y0 exp(a t + c eta_t).
VectorFieldSet linear_field(double a, double c) {
    VectorFieldSet vf;
    vf.drift = [a](const Vec& y, const Vec&) { return Vec(a * y); };
    vf.diffusion = [c](const Vec& y) -> Mat { return Mat::Constant(1, 1, c * y(0)); };
    return vf;  // derivatives by finite differences
}

// dY = (sin Y + u) dt + cos(Y)/2 d eta, analytic derivatives.
VectorFieldSet nonlinear_field() {
    VectorFieldSet vf;
    vf.drift = [](const Vec& y, const Vec& u) { return v1(std::sin(y(0)) + u(0)); };
    vf.drift_jacobian = [](const Vec& y, const Vec&) -> Mat { return Mat::Constant(1, 1, std::cos(y(0))); };
    vf.drift_control_jacobian = [](const Vec&, const Vec&) -> Mat { return Mat::Identity(1, 1); };
    vf.diffusion = [](const Vec& y) -> Mat { return Mat::Constant(1, 1, 0.5 * std::cos(y(0))); };
    vf.diffusion_jacobian = [](const Vec& y) { return std::vector<Mat>{Mat::Constant(1, 1, -0.5 * std::sin(y(0)))}; };
    vf.diffusion_curvature = [](const Vec& y, const Vec& v) {
        return std::vector<Mat>{Mat::Constant(1, 1, -0.5 * std::cos(y(0)) * v(0))};
    };
    return vf;
}

double terminal_error(std::size_t n) {
    const GridRoughPath fine = sample_brownian_lift(42, make_uniform_grid(1.0, 4096), 1, 1);
    const GridRoughPath eta = fine.coarsen(4096 / n);
    const VectorFieldSet vf = linear_field(0.3, 0.8);
    const RdeSolution sol = solve_controlled_rde(v1(1.0), 0, vf, ControlPath::constant(eta.grid(), v1(0.0)), eta);
    const double exact = std::exp(0.3 + 0.8 * eta.values()(0, static_cast<Eigen::Index>(n)));
    return std::abs(sol.terminal()(0) - exact);
}

}  // namespace

TEST(Davie, LinearEquationConvergesToExponential) {
    const double coarse = terminal_error(64), fine = terminal_error(1024);
    EXPECT_LT(fine, 2e-2);
    EXPECT_LT(fine, coarse / 4.0);
}

TEST(Davie, AdditiveNoiseIsExact) {
    VectorFieldSet vf;
    vf.drift = [](const Vec&, const Vec& u) { return Vec(u); };
    vf.diffusion = [](const Vec&) -> Mat { return Mat::Identity(1, 1); };
    const GridRoughPath eta = sample_brownian_lift(3, make_uniform_grid(1.0, 50), 2, 1);
    ControlPath mu{eta.grid(), {}};
    double drift = 0.0;
    for (std::size_t k = 0; k < 50; ++k) {
        mu.values.push_back(v1(std::cos(static_cast<double>(k))));
        drift += mu.values.back()(0) * eta.grid().dt(k);
    }
    const RdeSolution sol = solve_controlled_rde(v1(0.5), 0, vf, mu, eta);
    EXPECT_NEAR(sol.terminal()(0), 0.5 + drift + eta.values()(0, 50), 1e-13);
}

TEST(Davie, OverflowReportsStep) {
    VectorFieldSet vf;
    vf.drift = [](const Vec& y, const Vec&) { return Vec(y.cwiseProduct(y)); };
    vf.diffusion = [](const Vec&) -> Mat { return Mat::Zero(1, 1); };
    const GridRoughPath eta = zero_path(make_uniform_grid(1.0, 10), 1);
    try {
        solve_controlled_rde(v1(1e200), 0, vf, ControlPath::constant(eta.grid(), v1(0.0)), eta);
        FAIL() << "expected overflow";
    } catch (const NumericalOverflow& e) {
        EXPECT_EQ(e.step(), 0u);
    }
}

TEST(Davie, StartIndexSolvesTail) {
    const VectorFieldSet vf = nonlinear_field();
    const GridRoughPath eta = sample_brownian_lift(8, make_uniform_grid(1.0, 32), 1, 1);
    const ControlPath mu = ControlPath::constant(eta.grid(), v1(0.2));
    const RdeSolution full = solve_controlled_rde(v1(0.1), 0, vf, mu, eta);
    const RdeSolution tail = solve_controlled_rde(full.at(10), 10, vf, mu, eta);
    EXPECT_EQ(tail.states.size(), 23u);
    EXPECT_EQ(tail.terminal()(0), full.terminal()(0));
}

TEST(ClosedLoop, ConstantPolicyMatchesOpenLoop) {
    const VectorFieldSet vf = nonlinear_field();
    const GridRoughPath eta = sample_brownian_lift(9, make_uniform_grid(1.0, 32), 1, 1);
    const RdeSolution open = solve_controlled_rde(v1(0.3), 0, vf, ControlPath::constant(eta.grid(), v1(-0.4)), eta);
    ControlPath realized{eta.grid(), {}};
    const RdeSolution closed =
        solve_closed_loop(v1(0.3), 0, vf, [](double, const Vec&) { return v1(-0.4); }, eta, &realized);
    EXPECT_EQ(open.terminal()(0), closed.terminal()(0));
    ASSERT_EQ(realized.values.size(), 32u);
}

TEST(Linearized, MatchesFiniteDifferenceOfTheScheme) {
    const VectorFieldSet vf = nonlinear_field();
    const GridRoughPath eta = sample_brownian_lift(10, make_uniform_grid(1.0, 64), 2, 1);
    const ControlPath mu = ControlPath::constant(eta.grid(), v1(0.1));
    const double h = 1e-6;
    const RdeSolution base = solve_controlled_rde(v1(0.4), 0, vf, mu, eta);
    const RdeSolution up = solve_controlled_rde(v1(0.4 + h), 0, vf, mu, eta);
    const RdeSolution dn = solve_controlled_rde(v1(0.4 - h), 0, vf, mu, eta);
    const std::vector<Vec> y = solve_linearized(v1(1.0), base, mu, vf, [](std::size_t) { return v1(0.0); }, eta);
    for (std::size_t k : {1ul, 20ul, 64ul}) {
        const double fd = (up.at(k)(0) - dn.at(k)(0)) / (2.0 * h);
        EXPECT_NEAR(y[k](0), fd, 1e-6 * (1.0 + std::abs(fd)));
    }
}

TEST(Adjoint, PairingIsConserved) {
    const VectorFieldSet vf = nonlinear_field();
    const GridRoughPath eta = sample_brownian_lift(12, make_uniform_grid(1.0, 40), 1, 1);
    const ControlPath mu = ControlPath::constant(eta.grid(), v1(-0.2));
    const RdeSolution traj = solve_controlled_rde(v1(0.7), 0, vf, mu, eta);
    const std::vector<Vec> y = solve_linearized(v1(1.3), traj, mu, vf, [](std::size_t) { return v1(0.0); }, eta);
    const std::vector<Vec> p = solve_adjoint_backward(v1(-0.9), traj, mu, vf, {}, eta);
    for (std::size_t k = 0; k <= 40; k += 10) EXPECT_NEAR(p[k].dot(y[k]), p[40].dot(y[40]), 1e-12);
}

TEST(FlowDecomposition, AgreesWithDirectSolve) {
    const VectorFieldSet vf = nonlinear_field();
    const GridRoughPath eta = sample_brownian_lift(13, make_uniform_grid(1.0, 256), 1, 1);
    const ControlPath mu = ControlPath::constant(eta.grid(), v1(0.3));
    std::vector<double> mesh;
    for (int j = 0; j <= 800; ++j) mesh.push_back(-4.0 + 0.01 * j);
    const FlowDecomposition fd = flow_decomposition_solve(v1(0.2), 0, vf, mu, eta, mesh);
    const RdeSolution direct = solve_controlled_rde(v1(0.2), 0, vf, mu, eta);
    EXPECT_NEAR(fd.solution.terminal()(0), direct.terminal()(0), 2e-2);
    EXPECT_EQ(fd.transformed.size(), 257u);
    EXPECT_THROW(flow_decomposition_solve(v1(0.2), 0, vf, mu, eta, {0.1, 0.15}), OutOfDomain);
}

TEST(VectorFields, FiniteDifferenceDerivativesMatchAnalytic) {
    VectorFieldSet fd = nonlinear_field();
    fd.drift_jacobian = nullptr;
    fd.diffusion_jacobian = nullptr;
    fd.diffusion_curvature = nullptr;
    const VectorFieldSet exact = nonlinear_field();
    const Vec x = v1(0.37), u = v1(0.5), dir = v1(1.0);
    EXPECT_NEAR(fd.db_dx(x, u)(0, 0), exact.db_dx(x, u)(0, 0), 1e-8);
    EXPECT_NEAR(fd.dsigma(x)[0](0, 0), exact.dsigma(x)[0](0, 0), 1e-8);
    EXPECT_NEAR(fd.d2sigma(x, dir)[0](0, 0), exact.d2sigma(x, dir)[0](0, 0), 1e-5);
}

TEST(VectorFields, ValidateRejectsMissingFields) {
    VectorFieldSet vf;
    EXPECT_THROW(vf.validate(), std::invalid_argument);
}
