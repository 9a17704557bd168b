#include "roughctl/fixtures.hpp"

#include <memory>

namespace roughctl {

namespace {

Vec project(const ControlSet& set, Vec u) { return u.cwiseMax(set.lower).cwiseMin(set.upper); }

}  // namespace

ControlProblem lqc_additive_problem(const AdditiveLqcSpec& spec, const ControlSet& controls) {
    spec.validate();
    const auto s = std::make_shared<const AdditiveLqcSpec>(spec);
    const Eigen::Index e = spec.M.rows();
    ControlProblem p;
    p.vf.state_dim = static_cast<std::size_t>(e);
    p.vf.noise_dim = static_cast<std::size_t>(e);
    p.vf.control_dim = spec.control_dim();
    p.vf.drift = [s](const Vec& x, const Vec& u) -> Vec { return s->M * x + s->N * u; };
    p.vf.diffusion = [e](const Vec&) -> Mat { return Mat::Identity(e, e); };
    p.vf.diffusion_jacobian = [e](const Vec&) { return std::vector<Mat>(static_cast<std::size_t>(e), Mat::Zero(e, e)); };
    p.vf.diffusion_curvature = [e](const Vec&, const Vec&) {
        return std::vector<Mat>(static_cast<std::size_t>(e), Mat::Zero(e, e));
    };
    p.vf.drift_jacobian = [s](const Vec&, const Vec&) -> Mat { return s->M; };
    p.vf.drift_control_jacobian = [s](const Vec&, const Vec&) -> Mat { return s->N; };
    p.f = [s](double, const Vec& x, const Vec& u) { return 0.5 * (x.dot(s->Q * x) + u.dot(s->R * u)); };
    p.df = [s](double, const Vec& x, const Vec&) -> Vec { return s->Q * x; };
    p.g = [s](const Vec& x) { return 0.5 * x.dot(s->G * x); };
    p.dg = [s](const Vec& x) -> Vec { return s->G * x; };
    p.controls = controls;
    return p;
}

ControlProblem lqc_multiplicative_problem(const MultiplicativeLqcSpec& spec, const ControlSet& controls) {
    spec.validate();
    const MultiplicativeLqcSpec s = spec;
    ControlProblem p;
    p.vf.drift = [s](const Vec& x, const Vec& u) -> Vec { return Vec::Constant(1, s.M * x(0) + s.N * u(0)); };
    p.vf.diffusion = [s](const Vec& x) -> Mat { return Mat::Constant(1, 1, s.C * x(0)); };
    p.vf.diffusion_jacobian = [s](const Vec&) { return std::vector<Mat>{Mat::Constant(1, 1, s.C)}; };
    p.vf.diffusion_curvature = [](const Vec&, const Vec&) { return std::vector<Mat>{Mat::Zero(1, 1)}; };
    p.vf.drift_jacobian = [s](const Vec&, const Vec&) -> Mat { return Mat::Constant(1, 1, s.M); };
    p.vf.drift_control_jacobian = [s](const Vec&, const Vec&) -> Mat { return Mat::Constant(1, 1, s.N); };
    p.f = [s](double, const Vec& x, const Vec& u) { return 0.5 * (s.Q * x(0) * x(0) + s.R * u(0) * u(0)); };
    p.df = [s](double, const Vec& x, const Vec&) -> Vec { return Vec::Constant(1, s.Q * x(0)); };
    p.g = [s](const Vec& x) { return 0.5 * s.G * x(0) * x(0); };
    p.dg = [s](const Vec& x) -> Vec { return Vec::Constant(1, s.G * x(0)); };
    p.controls = controls;
    return p;
}

RogersPenalty lqc_additive_value_penalty(const AdditiveLqcSpec& spec, const RiccatiSolution& sol) {
    const auto s = std::make_shared<const AdditiveLqcSpec>(spec);
    const auto r = std::make_shared<const RiccatiSolution>(sol);
    const auto gain = std::make_shared<const Mat>(spec.N * spec.R.inverse() * spec.N.transpose());
    RogersPenalty h;
    h.h = [r](double t, const Vec& x) { return lqc_additive_value(*r, t, x); };
    h.h_t = [s, r, gain](double t, const Vec& x) {
        const Mat P = r->at(t);
        const Mat Pdot = -P * s->M - s->M.transpose() * P + P * *gain * P - s->Q;
        return 0.5 * x.dot(Pdot * x) - 0.5 * P.trace();
    };
    h.grad = [r](double t, const Vec& x) -> Vec { return r->at(t) * x; };
    h.hess = [r](double t, const Vec&) -> Mat { return r->at(t); };
    return h;
}

RogersPenalty lqc_multiplicative_value_penalty(const MultiplicativeLqcSpec& spec, const RiccatiSolution& sol) {
    const MultiplicativeLqcSpec s = spec;
    const auto r = std::make_shared<const RiccatiSolution>(sol);
    RogersPenalty h;
    h.h = [r](double t, const Vec& x) { return lqc_multiplicative_value(*r, t, x(0)); };
    h.h_t = [s, r](double t, const Vec& x) {
        const double p = r->scalar_at(t);
        const double pdot = -(2.0 * p * s.M + 2.0 * p * s.C * s.C + s.Q - s.N * s.N * p * p / s.R);
        return 0.5 * pdot * x(0) * x(0);
    };
    h.grad = [r](double t, const Vec& x) -> Vec { return Vec::Constant(1, r->scalar_at(t) * x(0)); };
    h.hess = [r](double t, const Vec&) -> Mat { return Mat::Constant(1, 1, r->scalar_at(t)); };
    return h;
}

std::function<Vec(double, const Vec&)> lqc_additive_policy(const AdditiveLqcSpec& spec, const RiccatiSolution& sol,
                                                          const ControlSet& controls) {
    const auto s = std::make_shared<const AdditiveLqcSpec>(spec);
    const auto r = std::make_shared<const RiccatiSolution>(sol);
    return [s, r, controls](double t, const Vec& x) { return project(controls, lqc_additive_feedback(*s, *r, t, x)); };
}

std::function<Vec(double, const Vec&)> lqc_multiplicative_policy(const MultiplicativeLqcSpec& spec,
                                                                const RiccatiSolution& sol, const ControlSet& controls) {
    const MultiplicativeLqcSpec s = spec;
    const auto r = std::make_shared<const RiccatiSolution>(sol);
    return [s, r, controls](double t, const Vec& x) {
        return project(controls, Vec::Constant(1, lqc_multiplicative_feedback(s, *r, t, x(0))));
    };
}

}  // namespace roughctl
