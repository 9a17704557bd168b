#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "roughctl/duality.hpp"
#include "roughctl/errors.hpp"
#include "roughctl/fixtures.hpp"
#include "roughctl/lqc.hpp"

using namespace roughctl;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

AdditiveLqcSpec scalar_additive(double M, double N, double Q, double R, double G, double T) {
    AdditiveLqcSpec a;
    a.M = Mat::Constant(1, 1, M);
    a.N = Mat::Constant(1, 1, N);
    a.Q = Mat::Constant(1, 1, Q);
    a.R = Mat::Constant(1, 1, R);
    a.G = Mat::Constant(1, 1, G);
    a.T = T;
    return a;
}

// P = Y / X with (X, Y)' = [[M, -N^2/R], [-Q, -M]] (X, Y), X(T) = 1, Y(T) = G.
double riccati_oracle(double M, double N, double Q, double R, double G, double T, double t) {
    Eigen::Matrix2d H;
    H << M, -N * N / R, -Q, -M;
    const Eigen::Vector2d xy = (H * (t - T)).exp() * Eigen::Vector2d(1.0, G);
    return xy(1) / xy(0);
}

ControlSet wide() { return ControlSet::box(v1(-6.0), v1(6.0), 41); }

}  // namespace

TEST(Riccati, AdditiveMatchesLinearizedOracle) {
    const RiccatiSolution sol = riccati_solve_additive(scalar_additive(0.1, 1, -1, -1, -1, 1), 2560);
    for (double t : {0.0, 0.3, 0.75}) {
        EXPECT_NEAR(sol.scalar_at(t), riccati_oracle(0.1, 1, -1, -1, -1, 1, t), 1e-12);
    }
    EXPECT_EQ(sol.P.back()(0, 0), -1.0);
}

TEST(Riccati, MultiplicativeShiftsDriftByCSquared) {
    const MultiplicativeLqcSpec m{0.1, 1, 0.3, -1, -1, -1, 1};
    const RiccatiSolution sol = riccati_solve_multiplicative(m, 2560);
    EXPECT_NEAR(sol.scalar_at(0.0), riccati_oracle(0.1 + 0.09, 1, -1, -1, -1, 1, 0.0), 1e-12);
    EXPECT_EQ(sol.P.back()(0, 0), -1.0);
}

TEST(Riccati, MatrixSolutionSymmetricWithExactTerminal) {
    AdditiveLqcSpec a;
    a.M = (Mat(2, 2) << 0.1, 0.4, -0.3, 0.2).finished();
    a.N = (Mat(2, 1) << 1.0, 0.5).finished();
    a.Q = -Mat::Identity(2, 2);
    a.R = -Mat::Identity(1, 1);
    a.G = (Mat(2, 2) << -1.0, 0.2, 0.2, -0.5).finished();
    const RiccatiSolution sol = riccati_solve_additive(a, 400);
    EXPECT_EQ(sol.P.back(), a.G);
    for (const Mat& P : sol.P) EXPECT_LE((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(sol.trace_integral.front(), 0.0 - 10.0);
}

TEST(Riccati, FiniteEscapeIsReported) {
    EXPECT_THROW(riccati_solve_additive(scalar_additive(1.0, 1, 10, -1, 10, 5), 1000), FiniteEscape);
}

TEST(Riccati, RejectsSingularR) {
    EXPECT_THROW(riccati_solve_additive(scalar_additive(0.1, 1, -1, 0.0, -1, 1), 10), std::invalid_argument);
}

TEST(Propagator, MatchesExponentialOfDriver) {
    const MultiplicativeLqcSpec m{0.1, 1, 0.3, -1, -1, -1, 1};
    const GridRoughPath eta = sample_brownian_lift(5, make_uniform_grid(1.0, 1024), 1, 1);
    const std::vector<double> gam = gamma_propagator(m, eta, 100);
    const Mat vals = eta.values();
    for (std::size_t k : {100ul, 500ul, 1024ul}) {
        const double t = eta.grid()[k] - eta.grid()[100];
        const double exact = std::exp(m.M * t + m.C * (vals(0, static_cast<Eigen::Index>(k)) - vals(0, 100)));
        EXPECT_NEAR(gam[k - 100], exact, 2e-3 * exact);
    }
}

TEST(Additive, LambdaOneMatchesDavisBursteinRoute) {
    const AdditiveLqcSpec a = scalar_additive(0.1, 1, -1, -1, -1, 1);
    const RiccatiSolution sol = riccati_solve_additive(a, 2560);
    const ControlProblem prob = lqc_additive_problem(a, wide());
    const auto policy = lqc_additive_policy(a, sol, wide());
    const GridRoughPath eta = sample_brownian_lift(3, make_uniform_grid(1.0, 256), 1, 1);
    const std::vector<Vec> lam1 = lambda1_additive(a, sol, eta);
    for (std::size_t k : {0ul, 100ul, 200ul}) {
        const double star = db_lambda_star(prob, policy, eta, k, v1(0.8), true)(0);
        EXPECT_NEAR(star, -lam1[k](0), 1e-2 * std::max(1.0, std::abs(star)));
    }
}

TEST(Additive, PenaltyDifferenceIsGammaR) {
    const AdditiveLqcSpec a = scalar_additive(0.1, 1, -1, -1, -1, 1);
    const RiccatiSolution sol = riccati_solve_additive(a, 2560);
    const ControlProblem prob = lqc_additive_problem(a, wide());
    const GridRoughPath eta = sample_brownian_lift(17, make_uniform_grid(1.0, 256), 1, 1);
    const std::vector<Vec> lam1 = lambda1_additive(a, sol, eta);
    const double gamma = gammaR_additive(a, sol, eta, 0, v1(1.0));
    const RogersPenalty h = lqc_additive_value_penalty(a, sol);
    for (int c = 0; c < 3; ++c) {
        ControlPath mu{eta.grid(), {}};
        double z1 = 0.0;
        for (std::size_t k = 0; k < 256; ++k) {
            mu.values.push_back(v1(std::sin(0.1 * static_cast<double>(k) + c) * (c + 1)));
            z1 -= lam1[k](0) * mu.values.back()(0) * eta.grid().dt(k);
        }
        const RdeSolution traj = solve_controlled_rde(v1(1.0), 0, prob.vf, mu, eta);
        const double z2 = rogers_penalty_value(h, traj, mu, eta, prob).increment;
        EXPECT_NEAR(z2 - z1, gamma, 1e-2 * std::max(1.0, std::abs(gamma)));
    }
}

TEST(Multiplicative, LambdaStarIsTwoNCxTheta) {
    const MultiplicativeLqcSpec m{0.1, 1, 0.3, -1, -1, -1, 1};
    const RiccatiSolution sol = riccati_solve_multiplicative(m, 2560);
    const ControlProblem prob = lqc_multiplicative_problem(m, wide());
    const auto policy = lqc_multiplicative_policy(m, sol, wide());
    const GridRoughPath eta = sample_brownian_lift(23, make_uniform_grid(1.0, 256), 1, 1);
    const std::vector<double> th = theta(m, sol, eta, 0);
    for (std::size_t k : {0ul, 64ul, 192ul}) {
        const double x = 0.9;
        const double star = db_lambda_star(prob, policy, eta, k, v1(x), true)(0);
        const double formula = 2.0 * m.N * m.C * x * th[k];
        EXPECT_NEAR(star, formula, 2e-2 * std::max(std::abs(formula), 1e-2));
    }
}

TEST(Multiplicative, SecondPenaltyMatchesRogersIntegral) {
    const MultiplicativeLqcSpec m{0.1, 1, 0.3, -1, -1, -1, 1};
    const RiccatiSolution sol = riccati_solve_multiplicative(m, 2560);
    const ControlProblem prob = lqc_multiplicative_problem(m, wide());
    const GridRoughPath eta = sample_brownian_lift(29, make_uniform_grid(1.0, 128), 1, 1);
    ControlPath mu{eta.grid(), {}};
    for (std::size_t k = 0; k < 128; ++k) mu.values.push_back(v1(std::cos(0.2 * static_cast<double>(k))));
    const RdeSolution traj = solve_controlled_rde(v1(1.0), 0, prob.vf, mu, eta);
    const double direct = rogers_penalty_value(lqc_multiplicative_value_penalty(m, sol), traj, mu, eta, prob).integral;
    EXPECT_NEAR(z2_multiplicative(m, sol, eta, 0, 1.0, mu), direct, 1e-10 * std::max(1.0, std::abs(direct)));
}

TEST(Feedback, ProjectedOntoBox) {
    const AdditiveLqcSpec a = scalar_additive(0.1, 1, -1, -1, -1, 1);
    const RiccatiSolution sol = riccati_solve_additive(a, 100);
    const ControlSet narrow = ControlSet::box(v1(-0.5), v1(0.5), 3);
    const auto policy = lqc_additive_policy(a, sol, narrow);
    EXPECT_EQ(policy(0.0, v1(10.0))(0), -0.5);
    EXPECT_NEAR(policy(0.0, v1(0.1))(0), lqc_additive_feedback(a, sol, 0.0, v1(0.1))(0), 1e-15);
}
