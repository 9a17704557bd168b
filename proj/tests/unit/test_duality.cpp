#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "roughctl/duality.hpp"
#include "roughctl/errors.hpp"
#include "roughctl/fixtures.hpp"

using namespace roughctl;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

AdditiveLqcSpec scalar_spec() {
    AdditiveLqcSpec s;
    s.M = Mat::Constant(1, 1, 0.1);
    s.N = Mat::Constant(1, 1, 1.0);
    s.Q = Mat::Constant(1, 1, -1.0);
    s.R = Mat::Constant(1, 1, -1.0);
    s.G = Mat::Constant(1, 1, -1.0);
    s.T = 1.0;
    return s;
}

struct Additive {
    AdditiveLqcSpec spec = scalar_spec();
    RiccatiSolution sol = riccati_solve_additive(spec, 640);
    ControlSet controls = ControlSet::box(v1(-4.0), v1(4.0), 41);
    ControlProblem problem = lqc_additive_problem(spec, controls);
};

SamplerSettings sampler(std::size_t steps, std::size_t workers = 1) {
    SamplerSettings s;
    s.master_seed = 77;
    s.steps = steps;
    s.workers = workers;
    return s;
}

ControlPath wiggle(const TimeGrid& grid) {
    ControlPath mu{grid, {}};
    for (std::size_t k = 0; k < grid.steps(); ++k) mu.values.push_back(v1(std::sin(0.3 * static_cast<double>(k))));
    return mu;
}

}  // namespace

TEST(Rogers, ConstantTestFunctionLeavesPayoffUnchanged) {
    const Additive a;
    RogersPenalty h;
    h.h = [](double, const Vec&) { return 3.0; };
    const ControlProblem shifted = rogers_transform(h, a.problem, 0.0, v1(1.0), 1.0);
    const GridRoughPath eta = sample_brownian_lift(5, make_uniform_grid(1.0, 64), 1, 1);
    const ControlPath mu = wiggle(eta.grid());
    EXPECT_NEAR(payoff(shifted, mu, eta, 0, v1(1.0)), payoff(a.problem, mu, eta, 0, v1(1.0)), 1e-9);
}

TEST(Rogers, IncrementAndIntegralFormsAgree) {
    const Additive a;
    const RogersPenalty h = lqc_additive_value_penalty(a.spec, a.sol);
    const GridRoughPath eta = sample_brownian_lift(6, make_uniform_grid(1.0, 512), 1, 1);
    const ControlPath mu = wiggle(eta.grid());
    const RdeSolution traj = solve_controlled_rde(v1(1.0), 0, a.problem.vf, mu, eta);
    const RogersValue r = rogers_penalty_value(h, traj, mu, eta, a.problem);
    EXPECT_NEAR(r.increment, r.integral, 2e-2);
    EXPECT_NEAR(r.difference, r.increment - r.integral, 1e-15);
}

TEST(Rogers, ValuePenaltyGivesNearlyZeroVarianceUpperBound) {
    const Additive a;
    const double V = lqc_additive_value(a.sol, 0.0, v1(1.0));
    const BoundEstimate up = mc_upper_bound(a.problem, lqc_additive_value_penalty(a.spec, a.sol), sampler(64), 16,
                                            StateMesh::uniform(-2.0, 4.0, 401), v1(1.0));
    EXPECT_EQ(up.stats.count, 16u);
    EXPECT_NEAR(up.stats.mean, V, 2e-2 * std::abs(V));
    EXPECT_LT(up.stats.std_error, 1e-2 * std::abs(V));
}

TEST(Duality, PathwiseSupDominatesAdaptedPolicy) {
    const Additive a;
    const auto policy = lqc_additive_policy(a.spec, a.sol, a.controls);
    const BoundEstimate lo = mc_lower_bound(a.problem, policy, sampler(64), 12, v1(1.0));
    const BoundEstimate up = mc_upper_bound(a.problem, ZeroPenalty{}, sampler(64), 12,
                                            StateMesh::uniform(-3.0, 5.0, 401), v1(1.0));
    ASSERT_EQ(lo.values.size(), 12u);
    ASSERT_EQ(up.values.size(), 12u);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_GE(up.values[i], lo.values[i] - 1e-2) << i;
}

TEST(Duality, BoundsIndependentOfWorkerCount) {
    const Additive a;
    const RogersPenalty h = lqc_additive_value_penalty(a.spec, a.sol);
    const StateMesh mesh = StateMesh::uniform(-2.0, 4.0, 201);
    const BoundEstimate one = mc_upper_bound(a.problem, h, sampler(32, 1), 9, mesh, v1(1.0));
    const BoundEstimate three = mc_upper_bound(a.problem, h, sampler(32, 3), 9, mesh, v1(1.0));
    EXPECT_EQ(one.values, three.values);
    EXPECT_EQ(one.stats.mean, three.stats.mean);
    EXPECT_EQ(one.stats.std_error, three.stats.std_error);
}

TEST(Duality, AbortsWhenPathsFail) {
    const Additive a;
    const auto nan_policy = [](double, const Vec&) { return v1(std::numeric_limits<double>::quiet_NaN()); };
    EXPECT_THROW(mc_lower_bound(a.problem, nan_policy, sampler(16), 10, v1(1.0)), AbortedRun);
}

TEST(DavisBurstein, VariationalGradientMatchesFiniteDifferences) {
    const Additive a;
    const auto policy = lqc_additive_policy(a.spec, a.sol, a.controls);
    const GridRoughPath eta = sample_brownian_lift(8, make_uniform_grid(1.0, 128), 1, 1);
    for (bool running : {false, true}) {
        const Vec var = db_value_gradient(a.problem, policy, eta, 10, v1(0.7), running, GradientMode::Variational);
        const Vec fd = db_value_gradient(a.problem, policy, eta, 10, v1(0.7), running, GradientMode::FiniteDifference);
        EXPECT_NEAR(var(0), fd(0), 1e-5 * std::max(1.0, std::abs(fd(0))));
    }
}

TEST(DavisBurstein, AffineDriftPassesConcavityCheck) {
    const Additive a;
    const auto policy = lqc_additive_policy(a.spec, a.sol, a.controls);
    const std::vector<GridRoughPath> drivers = {sample_brownian_lift(1, make_uniform_grid(1.0, 32), 1, 1),
                                                sample_brownian_lift(2, make_uniform_grid(1.0, 32), 1, 1)};
    const ConcavityReport r = concavity_check(a.problem, policy, drivers, {{0, v1(1.0)}, {16, v1(-0.5)}}, true);
    EXPECT_EQ(r.probes, 4u);
    EXPECT_EQ(r.violations, 0u);
    EXPECT_EQ(r.affine, 4u);
}

TEST(DavisBurstein, PenaltyValueIsLinearPairing) {
    const TimeGrid grid = make_uniform_grid(1.0, 4);
    RdeSolution traj{grid, 0, {}, {}};
    for (int k = 0; k <= 4; ++k) traj.states.push_back(v1(k));
    ControlPath mu = ControlPath::constant(grid, v1(2.0));
    const double z = db_penalty_value([](std::size_t, const Vec& x) { return Vec(x); }, traj, mu);
    EXPECT_NEAR(z, 2.0 * (0 + 1 + 2 + 3) * 0.25, 1e-15);
}

TEST(Report, DescribeAndCsvShape) {
    EXPECT_EQ(describe(ZeroPenalty{}), "zero");
    EXPECT_EQ(describe(RogersPenalty{}), "rogers");
    EXPECT_EQ(describe(DavisBursteinPenalty{}), "davis-burstein(running)");
    DualityReport rep;
    rep.fixture = "lqc-additive";
    const auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), ',') + 1; };
    EXPECT_EQ(count(DualityReport::csv_header()), 12);
    EXPECT_EQ(count(rep.csv_row()), 12);
}
